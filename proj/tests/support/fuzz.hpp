#pragma once

// Seeded random driver for the session engine. Commands are biased toward
// moves that make progress (recipe-valid splices, matching cards) so that a
// few hundred steps reach every event type; pipeline requests are answered
// out of order with occasional failures and duplicates.

#include <deque>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "session_fixture.hpp"

namespace tenon::testing {

class RandomSession {
 public:
  explicit RandomSession(std::uint64_t seed, SessionConfig config = mini_config(), int users = 4)
      : rng_(seed), session_(mini_catalog(), config) {
    for (int i = 0; i < users; ++i) users_.push_back("u" + std::to_string(i + 1));
  }

  void run(int steps) {
    for (int i = 0; i < steps; ++i) step();
  }

  void step() {
    clock_ms_ += pick(0, 120);
    if (!pending_.empty() && chance(0.3)) {
      fulfil();
      return;
    }
    issue(users_[pick(0, static_cast<int>(users_.size()) - 1)]);
  }

  Session& session() { return session_; }
  const std::vector<Command>& commands() const { return commands_; }
  const std::vector<PipelineResult>& results() const { return results_; }
  std::size_t pending() const { return pending_.size(); }

  // Drains every outstanding pipeline request.
  void settle() {
    while (!pending_.empty()) fulfil();
  }

 private:
  int pick(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool chance(double p) { return std::bernoulli_distribution(p)(rng_); }

  template <typename Map>
  typename Map::key_type any_key(const Map& m) {
    auto it = m.begin();
    std::advance(it, pick(0, static_cast<int>(m.size()) - 1));
    return it->first;
  }

  const World& world() const { return session_.state().world; }
  const PartCatalog& catalog() const { return *session_.state().catalog; }

  void record(const Outcome& out) {
    for (const auto& r : out.requests) pending_.push_back(r);
  }

  void send(const std::string& user, CommandBody body) {
    std::int64_t seq = ++seq_[user];
    if (chance(0.02)) seq = seq_[user] - pick(1, 3);  // stale or duplicate sequence
    Command c{UserId(user), seq, clock_ms_, Origin::kClient, std::move(body)};
    commands_.push_back(c);
    record(session_.handle(c));
  }

  void ingest(PipelineResult r) {
    results_.push_back(r);
    record(session_.ingest(r));
  }

  std::vector<InstanceId> held(const std::string& user) const { return held_by(world(), UserId(user)); }

  std::vector<InstanceId> on_bench() const {
    std::vector<InstanceId> out;
    for (const auto& [id, inst] : world().instances) {
      if (const auto* z = std::get_if<InZone>(&inst.location); z && zone_within(z->zone, Zone::kCharacterArea))
        out.push_back(id);
    }
    return out;
  }

  std::optional<InstanceId> recipe_partner(const InstanceId& a, const std::vector<InstanceId>& pool) const {
    const auto& pa = world().instances.at(a).part;
    for (const auto& b : pool) {
      if (b != a && splice(catalog(), pa, world().instances.at(b).part)) return b;
    }
    return std::nullopt;
  }

  Zone random_zone() {
    static constexpr Zone zones[] = {Zone::kSpeechArea, Zone::kModelArea, Zone::kCharacterArea,
                                     Zone::kVerificationZone};
    return zones[pick(0, 3)];
  }

  void issue(const std::string& u) {
    const auto& users = world().users;
    auto it = users.find(UserId(u));
    if (it == users.end() || !it->second.present) {
      if (chance(0.9)) return send(u, cmd::Join{u});
    }
    const int roll = pick(0, 99);
    const auto mine = held(u);
    if (roll < 22) {
      if (world().instances.empty()) return send(u, cmd::Grab{InstanceId("i0")});
      // Prefer a recipe-useful bench part, otherwise anything (conflicts included).
      auto bench = on_bench();
      if (!mine.empty() && chance(0.6)) {
        if (auto b = recipe_partner(mine.front(), bench)) return send(u, cmd::Grab{*b});
      }
      return send(u, cmd::Grab{any_key(world().instances)});
    }
    if (roll < 40 && !mine.empty()) {
      auto a = mine[pick(0, static_cast<int>(mine.size()) - 1)];
      auto pool = mine;
      auto bench = on_bench();
      pool.insert(pool.end(), bench.begin(), bench.end());
      if (chance(0.75)) {
        if (auto b = recipe_partner(a, pool)) return send(u, cmd::Splice{a, *b});
      }
      if (pool.empty()) return;
      return send(u, cmd::Splice{a, pool[pick(0, static_cast<int>(pool.size()) - 1)]});
    }
    if (roll < 52 && !mine.empty()) {
      auto a = mine[pick(0, static_cast<int>(mine.size()) - 1)];
      return send(u, cmd::PlaceInZone{a, chance(0.6) ? Zone::kVerificationZone : random_zone()});
    }
    if (roll < 58) return send(u, cmd::Release{random_zone()});
    if (roll < 68) {
      const auto& lex = catalog().lexicon();
      if (chance(0.05)) return send(u, cmd::Speak{chance(0.5) ? "" : std::string(600, 'x')});
      auto word = any_key(lex);
      return send(u, cmd::Speak{"a little " + word});
    }
    if (roll < 76) {
      if (world().tasks.empty() || chance(0.05)) return send(u, cmd::GenerateModel{TaskId("t99")});
      return send(u, cmd::GenerateModel{any_key(world().tasks)});
    }
    if (roll < 86) {
      // Prefer a model and card that belong together.
      for (const auto& [cid, card] : world().cards) {
        if (card.owner != UserId(u) || card.state != CardState::kUnspent || !chance(0.8)) continue;
        for (const auto& [mid, model] : world().models) {
          if (model.state == ModelState::kUnactivated &&
              world().tasks.at(model.task).core_character == card.character)
            return send(u, cmd::ActivateModel{mid, cid});
        }
      }
      ModelId m = world().models.empty() ? ModelId("m0") : any_key(world().models);
      CardId c = world().cards.empty() ? CardId("c0") : any_key(world().cards);
      return send(u, cmd::ActivateModel{m, c});
    }
    if (roll < 97) {
      return send(u, cmd::PoseUpdate{pick(-50, 50) / 10.0, pick(-50, 50) / 10.0, double(pick(0, 359))});
    }
    send(u, cmd::Leave{});
  }

  // Answers a random outstanding request.
  void fulfil() {
    auto idx = pick(0, static_cast<int>(pending_.size()) - 1);
    auto r = pending_[idx];
    pending_.erase(pending_.begin() + idx);
    const int roll = pick(0, 99);
    std::visit(
        [&](const auto& q) {
          using Q = std::decay_t<decltype(q)>;
          if constexpr (std::is_same_v<Q, req::ExtractCoreCharacter>) {
            if (roll < 8) return ingest(res::Failed{q.task_id, "extract", "no match"});
            if (roll < 12) return ingest(res::CoreCharacterExtracted{q.task_id, "小猫"});
            std::string ch = "猫";
            for (const auto& [word, c] : catalog().lexicon()) {
              if (q.text.ends_with(" " + word)) ch = c;
            }
            ingest(res::CoreCharacterExtracted{q.task_id, ch});
          } else if constexpr (std::is_same_v<Q, req::GenerateImage>) {
            if (roll < 8) return ingest(res::Failed{q.task_id, "image", "http 500"});
            ingest(res::ImageReady{q.task_id, AssetRef{"mock://image/" + q.core, Media::kPng, 11}});
          } else {
            if (roll < 8) return ingest(res::Failed{q.task_id, "model3d", "timeout"});
            res::ModelReady ready{q.task_id, q.model_id, AssetRef{"mock://model/x", Media::kGlb, 22}};
            ingest(ready);
            if (roll < 14) ingest(ready);  // duplicate delivery
          }
        },
        r);
  }

  std::mt19937_64 rng_;
  Session session_;
  std::vector<std::string> users_;
  std::map<std::string, std::int64_t> seq_;
  std::deque<PipelineRequest> pending_;
  std::vector<Command> commands_;
  std::vector<PipelineResult> results_;
  std::int64_t clock_ms_ = 0;
};

}  // namespace tenon::testing
