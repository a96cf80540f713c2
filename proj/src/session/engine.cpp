#include "tenon/session/engine.hpp"

#include <algorithm>

#include "tenon/core/hash.hpp"
#include "tenon/core/utf8.hpp"
#include "tenon/session/codec.hpp"

namespace tenon {

const TaskId& task_of(const PipelineRequest& r) {
  return std::visit([](const auto& x) -> const TaskId& { return x.task_id; }, r);
}

const TaskId& task_of(const PipelineResult& r) {
  return std::visit([](const auto& x) -> const TaskId& { return x.task_id; }, r);
}

std::optional<UserId> current_host(const World& world) {
  for (const auto& [id, u] : world.users) {
    if (u.present && u.role == Role::kHost) return id;
  }
  return std::nullopt;
}

std::size_t present_users(const World& world) {
  return static_cast<std::size_t>(
      std::count_if(world.users.begin(), world.users.end(), [](const auto& kv) { return kv.second.present; }));
}

std::vector<InstanceId> held_by(const World& world, const UserId& user) {
  std::vector<InstanceId> out;
  for (const auto& [id, inst] : world.instances) {
    if (const auto* h = std::get_if<HeldBy>(&inst.location); h && h->user == user) out.push_back(id);
  }
  return out;
}

Snapshot snapshot(const SessionState& state) {
  Snapshot s;
  s.bytes = world_to_json(state.world).dump();
  s.digest = fnv1a64(s.bytes);
  return s;
}

std::uint64_t digest(const SessionState& state) { return snapshot(state).digest; }

// ---------------------------------------------------------------------------
// Fold

namespace {

template <typename Map, typename Id>
auto& must_find(Map& map, const Id& id, const char* what) {
  auto it = map.find(id);
  if (it == map.end()) throw ReplayError(std::string("event references unknown ") + what + " " + id.str());
  return it->second;
}

InstanceId instance_id(std::uint64_t n) { return InstanceId("i" + std::to_string(n)); }

struct Folder {
  SessionState& s;
  World& w = s.world;

  void operator()(const ev::SessionCreated& e) {
    if (!w.session_name.empty() || !w.instances.empty()) throw ReplayError("SessionCreated after genesis");
    w.session_name = e.session_name;
    w.max_users = e.max_users;
    w.catalog_digest = e.catalog_digest;
    for (const auto& spawn : e.spawn) {
      if (!s.catalog->contains(spawn.part)) throw ReplayError("spawn of unknown part " + spawn.part.str());
      for (int k = 0; k < spawn.count; ++k) {
        auto id = instance_id(w.counters.next_instance++);
        w.instances.emplace(id, PartInstance{id, spawn.part, InZone{Zone::kCharacterArea}});
      }
    }
  }
  void operator()(const ev::UserJoined& e) {
    auto& u = w.users[e.user_id];
    u.id = e.user_id;
    u.display_name = e.name;
    u.role = e.role;
    u.present = true;
    u.joined_seq = s.presence.event_seq;
  }
  void operator()(const ev::UserLeft& e) {
    auto& u = must_find(w.users, e.user_id, "user");
    u.present = false;
    u.role = Role::kClient;
    for (const auto& id : e.returned) must_find(w.instances, id, "instance").location = InZone{Zone::kCharacterArea};
    if (e.new_host) must_find(w.users, *e.new_host, "user").role = Role::kHost;
    s.presence.poses.erase(e.user_id);
  }
  void operator()(const ev::TaskCreated& e) {
    LearningTask t;
    t.id = e.task_id;
    t.ordinal = w.counters.next_task++;
    t.owner = e.owner;
    t.raw_text = e.text;
    w.tasks.emplace(e.task_id, std::move(t));
  }
  void operator()(const ev::CoreCharacterExtracted& e) {
    must_find(w.tasks, e.task_id, "task").core_character = e.character;
  }
  void operator()(const ev::ImageReady& e) { must_find(w.tasks, e.task_id, "task").image = e.asset; }
  void operator()(const ev::TaskFailed& e) {
    auto& t = must_find(w.tasks, e.task_id, "task");
    t.failed = true;
    t.failure = e.stage + ": " + e.reason;
  }
  void operator()(const ev::ModelJobStarted& e) {
    ++w.counters.next_model;
    w.models.emplace(e.model_id, ModelEntity{e.model_id, e.task_id, std::nullopt, ModelState::kGenerating});
    must_find(w.tasks, e.task_id, "task").model = e.model_id;
  }
  void operator()(const ev::ModelReady& e) {
    auto& m = must_find(w.models, e.model_id, "model");
    m.state = ModelState::kUnactivated;
    m.asset = e.asset;
  }
  void operator()(const ev::Grabbed& e) {
    must_find(w.instances, e.instance_id, "instance").location = HeldBy{e.user_id};
  }
  void operator()(const ev::Released& e) {
    for (const auto& id : e.instance_ids) must_find(w.instances, id, "instance").location = InZone{e.zone};
  }
  void operator()(const ev::Placed& e) {
    must_find(w.instances, e.instance_id, "instance").location = InZone{e.zone};
  }
  void operator()(const ev::SpliceSucceeded& e) {
    for (const auto& id : e.consumed) {
      must_find(w.instances, id, "instance");
      w.instances.erase(id);
    }
    ++w.counters.next_instance;
    w.instances.emplace(e.produced, PartInstance{e.produced, e.part, HeldBy{e.user_id}});
  }
  void operator()(const ev::SpliceRejected&) {}
  void operator()(const ev::VerificationSucceeded& e) {
    ++w.counters.next_card;
    w.cards.emplace(e.card_id, RoundCard{e.card_id, e.character, CardState::kUnspent, e.owner, e.task_id});
    must_find(w.tasks, e.task_id, "task").card_issued = true;
  }
  void operator()(const ev::VerificationFailed&) {}
  void operator()(const ev::CardSpent& e) { must_find(w.cards, e.card_id, "card").state = CardState::kSpent; }
  void operator()(const ev::ModelActivated& e) {
    must_find(w.models, e.model_id, "model").state = ModelState::kActivated;
  }
  void operator()(const ev::PoseUpdated& e) {
    s.presence.poses[e.user_id] = e.pose;
    s.presence.last_pose_ms[e.user_id] = e.time_ms;
  }
  void operator()(const ev::Error&) {}
  void operator()(const ev::Checkpoint& e) {
    auto actual = digest(s);
    if (actual != e.digest) {
      throw ReplayError("checkpoint at seq " + std::to_string(s.presence.event_seq) + " expects digest " +
                        to_hex(e.digest) + ", state has " + to_hex(actual));
    }
  }
};

bool consumes_client_seq(const Event& e) {
  if (!e.issuer || e.client_seq <= 0) return false;
  if (const auto* err = std::get_if<ev::Error>(&e.body)) {
    return err->code != codes::kBadSeq && err->code != codes::kUnknownUser;
  }
  return true;
}

}  // namespace

void apply_event(SessionState& state, const Event& event) {
  if (event.seq != state.presence.event_seq + 1) {
    throw ReplayError("event seq " + std::to_string(event.seq) + " does not follow " +
                      std::to_string(state.presence.event_seq));
  }
  if (event.seq == 1 && !event.is<ev::SessionCreated>()) throw ReplayError("log must start with SessionCreated");
  if (event.seq % kCheckpointInterval == 0 && !event.is<ev::Checkpoint>()) {
    throw ReplayError("seq " + std::to_string(event.seq) + " must hold a Checkpoint");
  }
  state.presence.event_seq = event.seq;
  std::visit(Folder{state}, event.body);
  if (consumes_client_seq(event)) state.presence.last_client_seq[*event.issuer] = event.client_seq;
}

// ---------------------------------------------------------------------------
// Command handling

namespace {

class Step {
 public:
  Step(SessionState& state, Outcome& out, std::optional<UserId> issuer, std::int64_t cseq)
      : state_(state), out_(out), issuer_(std::move(issuer)), cseq_(cseq) {}

  void emit(EventBody body) {
    push(Event{state_.presence.event_seq + 1, issuer_, cseq_, std::move(body)});
    if ((state_.presence.event_seq + 1) % kCheckpointInterval == 0) {
      push(Event{state_.presence.event_seq + 1, std::nullopt, 0, ev::Checkpoint{digest(state_)}});
    }
  }

  void error(const char* code, std::string message) { emit(ev::Error{code, std::move(message)}); }

  void request(PipelineRequest r) { out_.requests.push_back(std::move(r)); }

 private:
  void push(Event e) {
    apply_event(state_, e);
    out_.events.push_back(std::move(e));
  }

  SessionState& state_;
  Outcome& out_;
  std::optional<UserId> issuer_;
  std::int64_t cseq_;
};

const UserId* holder_of(const PartInstance& inst) {
  const auto* h = std::get_if<HeldBy>(&inst.location);
  return h ? &h->user : nullptr;
}

bool lies_in(const PartInstance& inst, Zone zone) {
  const auto* z = std::get_if<InZone>(&inst.location);
  return z && zone_within(z->zone, zone);
}

// The issuer's newest task that has a core character and no card yet.
const LearningTask* verification_target(const World& w, const UserId& issuer) {
  const LearningTask* best = nullptr;
  for (const auto& [id, t] : w.tasks) {
    if (t.owner != issuer || t.failed || t.card_issued || !t.core_character) continue;
    if (!best || t.ordinal > best->ordinal) best = &t;
  }
  return best;
}

struct CommandHandler {
  SessionState& s;
  const Command& c;
  Step& step;
  World& w = s.world;

  void operator()(const cmd::Join& j) {
    auto it = w.users.find(c.issuer);
    const bool rejoin = it != w.users.end();
    if (rejoin && it->second.present) return step.error(codes::kBadState, "user already joined");
    if (present_users(w) >= static_cast<std::size_t>(w.max_users)) {
      return step.error(codes::kSessionFull, "session has " + std::to_string(w.max_users) + " users");
    }
    const Role role = current_host(w) ? Role::kClient : Role::kHost;
    step.emit(ev::UserJoined{c.issuer, j.name.empty() ? c.issuer.str() : j.name, role, rejoin});
  }

  void operator()(const cmd::Leave&) {
    ev::UserLeft left{c.issuer, held_by(w, c.issuer), std::nullopt};
    if (w.users.at(c.issuer).role == Role::kHost) {
      const UserRecord* next = nullptr;
      for (const auto& [id, u] : w.users) {
        if (id == c.issuer || !u.present) continue;
        if (!next || u.joined_seq < next->joined_seq) next = &u;
      }
      if (next) left.new_host = next->id;
    }
    step.emit(std::move(left));
  }

  void operator()(const cmd::Speak& sp) {
    auto n = utf8::length(sp.text);
    if (!n || utf8::trim(sp.text).empty()) return step.error(codes::kBadState, "speech text must be non-empty UTF-8");
    if (*n > kMaxSpeakChars) return step.error(codes::kBadState, "speech text exceeds 512 characters");
    TaskId id("t" + std::to_string(w.counters.next_task));
    step.emit(ev::TaskCreated{id, c.issuer, sp.text});
    step.request(req::ExtractCoreCharacter{id, sp.text});
  }

  void operator()(const cmd::GenerateModel& g) {
    auto it = w.tasks.find(g.task_id);
    if (it == w.tasks.end()) return step.error(codes::kUnknownTask, "unknown task " + g.task_id.str());
    const auto& t = it->second;
    if (t.failed) return step.error(codes::kBadState, "task " + t.id.str() + " failed");
    if (!t.image) return step.error(codes::kBadState, "task " + t.id.str() + " has no image yet");
    if (t.model) return step.error(codes::kBadState, "task " + t.id.str() + " already has model " + t.model->str());
    ModelId id("m" + std::to_string(w.counters.next_model));
    step.emit(ev::ModelJobStarted{id, t.id});
    step.request(req::GenerateModel3D{t.id, id, *t.image});
  }

  void operator()(const cmd::Grab& g) {
    auto it = w.instances.find(g.instance_id);
    if (it == w.instances.end()) return step.error(codes::kUnknownInstance, "unknown instance " + g.instance_id.str());
    if (const auto* h = holder_of(it->second)) {
      if (*h == c.issuer) return step.error(codes::kBadState, "already holding " + g.instance_id.str());
      return step.error(codes::kGrabConflict, g.instance_id.str() + " is held by " + h->str());
    }
    step.emit(ev::Grabbed{g.instance_id, c.issuer});
  }

  void operator()(const cmd::Release& r) {
    if (r.zone == Zone::kVerificationZone) {
      return step.error(codes::kBadState, "use PlaceInZone to enter the verification zone");
    }
    auto held = held_by(w, c.issuer);
    if (held.empty()) return step.error(codes::kNotHolder, "nothing held");
    step.emit(ev::Released{std::move(held), r.zone, c.issuer});
  }

  void operator()(const cmd::Splice& sp) {
    if (sp.instance_a == sp.instance_b) return step.error(codes::kBadState, "cannot splice an instance with itself");
    auto a = w.instances.find(sp.instance_a);
    auto b = w.instances.find(sp.instance_b);
    if (a == w.instances.end()) return step.error(codes::kUnknownInstance, "unknown instance " + sp.instance_a.str());
    if (b == w.instances.end()) return step.error(codes::kUnknownInstance, "unknown instance " + sp.instance_b.str());
    auto mine = [&](const PartInstance& i) {
      const auto* h = holder_of(i);
      return h && *h == c.issuer;
    };
    auto reachable = [&](const PartInstance& i) { return mine(i) || lies_in(i, Zone::kCharacterArea); };
    const bool ok = (mine(a->second) && reachable(b->second)) || (mine(b->second) && reachable(a->second));
    if (!ok) return step.error(codes::kNotHolder, "hold one part; the other must be held or on the bench");
    auto result = splice(*s.catalog, a->second.part, b->second.part);
    if (!result) return step.emit(ev::SpliceRejected{sp.instance_a, sp.instance_b, codes::kNoRecipe, c.issuer});
    step.emit(ev::SpliceSucceeded{{sp.instance_a, sp.instance_b}, instance_id(w.counters.next_instance), *result,
                                  c.issuer});
  }

  void operator()(const cmd::PlaceInZone& p) {
    auto it = w.instances.find(p.instance_id);
    if (it == w.instances.end()) return step.error(codes::kUnknownInstance, "unknown instance " + p.instance_id.str());
    const auto* h = holder_of(it->second);
    if (!h || *h != c.issuer) return step.error(codes::kNotHolder, "not holding " + p.instance_id.str());
    const PartId part = it->second.part;
    step.emit(ev::Placed{p.instance_id, p.zone, c.issuer});
    if (p.zone != Zone::kVerificationZone) return;

    const auto& label = s.catalog->part(part).label;
    const LearningTask* task = verification_target(w, c.issuer);
    if (!task) return step.emit(ev::VerificationFailed{p.instance_id, std::nullopt, "", label, c.issuer});
    if (!verify_assembly(*s.catalog, part, *task->core_character)) {
      return step.emit(ev::VerificationFailed{p.instance_id, task->id, *task->core_character, label, c.issuer});
    }
    CardId card("c" + std::to_string(w.counters.next_card));
    step.emit(ev::VerificationSucceeded{card, task->id, p.instance_id, *task->core_character, c.issuer});
  }

  void operator()(const cmd::ActivateModel& a) {
    auto m = w.models.find(a.model_id);
    if (m == w.models.end()) return step.error(codes::kUnknownModel, "unknown model " + a.model_id.str());
    auto card = w.cards.find(a.card_id);
    if (card == w.cards.end()) return step.error(codes::kUnknownCard, "unknown card " + a.card_id.str());
    if (card->second.state == CardState::kSpent) return step.error(codes::kCardSpent, a.card_id.str() + " is spent");
    if (card->second.owner != c.issuer) {
      return step.error(codes::kCardMismatch, a.card_id.str() + " belongs to " + card->second.owner.str());
    }
    if (m->second.state != ModelState::kUnactivated) {
      return step.error(codes::kBadState, a.model_id.str() + " is " + std::string(to_string(m->second.state)));
    }
    const auto& task = w.tasks.at(m->second.task);
    if (!task.core_character || card->second.character != *task.core_character) {
      return step.error(codes::kCardMismatch, "card is for " + card->second.character + ", model needs " +
                                                  task.core_character.value_or("?"));
    }
    step.emit(ev::ModelActivated{a.model_id, a.card_id, c.issuer});
    step.emit(ev::CardSpent{a.card_id});
  }

  void operator()(const cmd::PoseUpdate& p) {
    auto last = s.presence.last_pose_ms.find(c.issuer);
    if (last != s.presence.last_pose_ms.end() && c.time_ms - last->second < kPoseThrottleMs) return;
    step.emit(ev::PoseUpdated{c.issuer, Pose{p.x, p.y, p.yaw}, c.time_ms});
  }
};

}  // namespace

Outcome handle_command(SessionState& state, const Command& command) {
  Outcome out;
  Step step(state, out, command.issuer, command.origin == Origin::kClient ? command.client_seq : 0);
  const bool is_join = std::holds_alternative<cmd::Join>(command.body);

  if (!is_join) {
    auto it = state.world.users.find(command.issuer);
    if (it == state.world.users.end() || !it->second.present) {
      step.error(codes::kUnknownUser, "unknown or departed user " + command.issuer.str());
      return out;
    }
  }
  if (command.origin == Origin::kClient) {
    if (command.client_seq < 1) {
      step.error(codes::kBadSeq, "client_seq must be >= 1");
      return out;
    }
    // A join opens a fresh connection, so its sequence restarts.
    if (!is_join) {
      auto last = state.presence.last_client_seq.find(command.issuer);
      if (last != state.presence.last_client_seq.end() && command.client_seq <= last->second) {
        step.error(codes::kBadSeq, "client_seq " + std::to_string(command.client_seq) + " not above " +
                                       std::to_string(last->second));
        return out;
      }
    }
  }
  std::visit(CommandHandler{state, command, step}, command.body);
  return out;
}

Outcome ingest_pipeline_result(SessionState& state, const PipelineResult& result) {
  Outcome out;
  Step step(state, out, std::nullopt, 0);
  World& w = state.world;
  auto task_it = w.tasks.find(task_of(result));
  if (task_it == w.tasks.end()) {
    step.error(codes::kUnknownTask, "pipeline result for unknown task " + task_of(result).str());
    return out;
  }
  LearningTask& task = task_it->second;

  std::visit(
      [&](const auto& r) {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, res::CoreCharacterExtracted>) {
          if (task.failed || task.core_character) {
            return step.error(codes::kBadState, "task " + task.id.str() + " is not awaiting extraction");
          }
          if (!utf8::is_single_scalar(r.character)) {
            step.error(codes::kBadState, "core character '" + r.character + "' is not exactly one character");
            return step.emit(ev::TaskFailed{task.id, "extract", "NotOneCharacter"});
          }
          step.emit(ev::CoreCharacterExtracted{task.id, r.character});
          step.request(req::GenerateImage{task.id, r.character});
        } else if constexpr (std::is_same_v<T, res::ImageReady>) {
          if (task.failed || !task.core_character || task.image) {
            return step.error(codes::kBadState, "task " + task.id.str() + " is not awaiting an image");
          }
          step.emit(ev::ImageReady{task.id, r.asset});
        } else if constexpr (std::is_same_v<T, res::ModelReady>) {
          auto m = w.models.find(r.model_id);
          if (m == w.models.end() || m->second.task != task.id) {
            return step.error(codes::kBadState, "model " + r.model_id.str() + " does not belong to " + task.id.str());
          }
          if (m->second.state != ModelState::kGenerating) {
            return step.error(codes::kBadState, "model " + r.model_id.str() + " is already " +
                                                    std::string(to_string(m->second.state)));
          }
          step.emit(ev::ModelReady{r.model_id, r.asset});
        } else {
          if (task.failed) return step.error(codes::kBadState, "task " + task.id.str() + " already failed");
          step.emit(ev::TaskFailed{task.id, r.stage, r.reason});
        }
      },
      result);
  return out;
}

// ---------------------------------------------------------------------------
// Construction and replay

SessionStart create_session(std::shared_ptr<const PartCatalog> catalog, const SessionConfig& config) {
  for (const auto& spawn : config.spawn) {
    if (!catalog->contains(spawn.part)) throw UnknownPart(spawn.part);
  }
  SessionStart start{SessionState{std::move(catalog), {}, {}}, {}};
  start.genesis = Event{1, std::nullopt, 0,
                        ev::SessionCreated{config.session_name, config.max_users, config.spawn,
                                           start.state.catalog->digest()}};
  apply_event(start.state, start.genesis);
  return start;
}

SessionState replay(std::shared_ptr<const PartCatalog> catalog, std::span<const Event> events) {
  if (events.empty() || !events.front().is<ev::SessionCreated>()) {
    throw ReplayError("log must start with SessionCreated");
  }
  const auto& genesis = events.front().as<ev::SessionCreated>();
  if (genesis.catalog_digest != catalog->digest()) {
    throw ReplayError("log was recorded against catalog " + to_hex(genesis.catalog_digest) + ", not " +
                      to_hex(catalog->digest()));
  }
  SessionState state{std::move(catalog), {}, {}};
  for (const auto& e : events) apply_event(state, e);
  return state;
}

SessionState replay(std::shared_ptr<const PartCatalog> catalog, const SessionConfig& config,
                    std::span<const Event> events) {
  if (events.empty() || !events.front().is<ev::SessionCreated>()) {
    throw ReplayError("log must start with SessionCreated");
  }
  const auto& g = events.front().as<ev::SessionCreated>();
  if (g.session_name != config.session_name || g.max_users != config.max_users || g.spawn != config.spawn) {
    throw ReplayError("log's SessionCreated does not match the supplied session config");
  }
  return replay(std::move(catalog), events);
}

SessionState state_from_snapshot(std::shared_ptr<const PartCatalog> catalog, const World& world,
                                 const Presence& presence) {
  return SessionState{std::move(catalog), world, presence};
}

// ---------------------------------------------------------------------------
// Session

Session::Session(std::shared_ptr<const PartCatalog> catalog, const SessionConfig& config) : config_(config) {
  auto start = create_session(std::move(catalog), config);
  state_ = std::move(start.state);
  log_.push_back(std::move(start.genesis));
}

Outcome Session::handle(const Command& command) {
  auto out = handle_command(state_, command);
  record(out);
  return out;
}

Outcome Session::ingest(const PipelineResult& result) {
  auto out = ingest_pipeline_result(state_, result);
  record(out);
  return out;
}

void Session::record(const Outcome& out) { log_.insert(log_.end(), out.events.begin(), out.events.end()); }

}  // namespace tenon
