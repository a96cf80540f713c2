#include "tenon/harness/report.hpp"

#include <set>
#include <sstream>

#include "tenon/core/hash.hpp"

namespace tenon::harness {

using ojson = nlohmann::ordered_json;

std::size_t CatalogReport::foldable() const {
  std::size_t n = 0;
  for (const auto& f : folds) n += f.ok;
  return n;
}

std::string CatalogReport::text(const PartCatalog& catalog) const {
  std::ostringstream out;
  out << "parts: " << parts << " (" << primitives << " primitive, " << composites << " composite)\n"
      << "classes: " << classes << "\n"
      << "recipes: " << recipes << "\n"
      << "characters: " << folds.size() << "\n";
  for (const auto& f : folds) {
    out << "  " << f.character << "  ";
    if (f.ok) {
      out << "ok -> " << *f.result << "\n";
    } else {
      out << "FAIL: " << f.failure << "\n";
    }
  }
  out << foldable() << "/" << folds.size() << " characters foldable\n";
  out << "reusability (recipes using the part's class):\n";
  for (const auto& [id, n] : reusability) {
    out << "  " << id << " " << catalog.part(id).label << "  " << n << "\n";
  }
  return out.str();
}

ojson CatalogReport::to_json(const PartCatalog& catalog) const {
  ojson folds_json = ojson::array();
  for (const auto& f : folds) {
    ojson o{{"character", f.character}, {"ok", f.ok}};
    if (f.result) o["result"] = f.result->str();
    if (!f.ok) o["failure"] = f.failure;
    folds_json.push_back(std::move(o));
  }
  ojson reuse = ojson::object();
  for (const auto& [id, n] : reusability) reuse[id.str()] = n;
  return ojson{{"parts", parts},
               {"primitives", primitives},
               {"composites", composites},
               {"classes", classes},
               {"recipes", recipes},
               {"characters", folds.size()},
               {"foldable", foldable()},
               {"folds", std::move(folds_json)},
               {"reusability", std::move(reuse)},
               {"catalog_digest", to_hex(catalog.digest())}};
}

CatalogReport check_catalog(const PartCatalog& catalog) {
  CatalogReport r;
  r.parts = catalog.parts().size();
  for (const auto& [id, p] : catalog.parts()) (p.kind == PartKind::kPrimitive ? r.primitives : r.composites)++;
  r.classes = catalog.classes().size();
  r.recipes = catalog.recipes().size();
  for (const auto& [ch, tree] : catalog.decompositions()) r.folds.push_back(fold_character(catalog, ch));
  for (const auto& [id, cls] : catalog.equivalence()) {
    int n = 0;
    for (const auto& [pair, result] : catalog.recipes()) n += (pair.first() == cls || pair.second() == cls);
    r.reusability[id] = n;
  }
  return r;
}

std::string SessionSummary::text() const {
  std::ostringstream out;
  out << "events: " << events << "\n"
      << "users joined: " << users_joined << "\n"
      << "tasks: " << tasks << " (" << tasks_failed << " failed)\n"
      << "cards minted: " << cards_minted << "\n"
      << "models ready: " << models_ready << "\n"
      << "models activated: " << models_activated << "\n"
      << "splices ok: " << splices_ok << "\n"
      << "splices rejected: " << splices_rejected << "\n";
  for (const auto& [code, n] : errors) out << "error " << code << ": " << n << "\n";
  return out.str();
}

ojson SessionSummary::to_json() const {
  ojson errs = ojson::object();
  for (const auto& [code, n] : errors) errs[code] = n;
  return ojson{{"events", events},
               {"users_joined", users_joined},
               {"tasks", tasks},
               {"tasks_failed", tasks_failed},
               {"cards_minted", cards_minted},
               {"models_ready", models_ready},
               {"models_activated", models_activated},
               {"splices_ok", splices_ok},
               {"splices_rejected", splices_rejected},
               {"errors", std::move(errs)}};
}

SessionSummary summarize(std::span<const Event> events) {
  SessionSummary s;
  s.events = events.size();
  for (const auto& e : events) {
    s.users_joined += e.is<ev::UserJoined>();
    s.tasks += e.is<ev::TaskCreated>();
    s.tasks_failed += e.is<ev::TaskFailed>();
    s.cards_minted += e.is<ev::VerificationSucceeded>();
    s.models_ready += e.is<ev::ModelReady>();
    s.models_activated += e.is<ev::ModelActivated>();
    s.splices_ok += e.is<ev::SpliceSucceeded>();
    s.splices_rejected += e.is<ev::SpliceRejected>();
    if (e.is<ev::Error>()) ++s.errors[e.as<ev::Error>().code];
  }
  return s;
}

std::vector<std::string> check_expectation(const Expectation& expect, std::span<const Event> events,
                                           std::uint64_t digest) {
  std::map<std::string, int> by_type;
  std::map<std::string, int> by_code;
  for (const auto& e : events) {
    ++by_type[std::string(event_name(e.body))];
    if (e.is<ev::Error>()) ++by_code[e.as<ev::Error>().code];
  }
  std::vector<std::string> out;
  auto compare = [&](const std::map<std::string, int>& want, std::map<std::string, int>& got, const char* what) {
    for (const auto& [k, n] : want) {
      if (got[k] != n) {
        out.push_back(std::string(what) + " " + k + ": expected " + std::to_string(n) + ", got " +
                      std::to_string(got[k]));
      }
    }
  };
  compare(expect.events, by_type, "event");
  compare(expect.errors, by_code, "error");
  if (expect.digest && *expect.digest != digest) {
    out.push_back("digest: expected " + to_hex(*expect.digest) + ", got " + to_hex(digest));
  }
  return out;
}

}  // namespace tenon::harness
