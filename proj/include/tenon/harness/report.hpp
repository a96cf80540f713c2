#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tenon/core/catalog.hpp"
#include "tenon/harness/script.hpp"
#include "tenon/session/types.hpp"

namespace tenon::harness {

struct CatalogReport {
  std::size_t parts = 0;
  std::size_t primitives = 0;
  std::size_t composites = 0;
  std::size_t classes = 0;
  std::size_t recipes = 0;
  std::vector<FoldOutcome> folds;
  // Recipes whose inputs include the part's class (a recipe counts once).
  std::map<PartId, int> reusability;

  std::size_t foldable() const;
  bool ok() const { return foldable() == folds.size(); }
  std::string text(const PartCatalog& catalog) const;
  nlohmann::ordered_json to_json(const PartCatalog& catalog) const;
};

CatalogReport check_catalog(const PartCatalog& catalog);

struct SessionSummary {
  std::size_t events = 0;
  std::size_t users_joined = 0;
  std::size_t tasks = 0;
  std::size_t tasks_failed = 0;
  std::size_t cards_minted = 0;
  std::size_t models_ready = 0;
  std::size_t models_activated = 0;
  std::size_t splices_ok = 0;
  std::size_t splices_rejected = 0;
  std::map<std::string, std::size_t> errors;  // code -> count

  std::string text() const;
  nlohmann::ordered_json to_json() const;
};

SessionSummary summarize(std::span<const Event> events);

// Human-readable reasons the log does not meet `expect`; empty when it does.
std::vector<std::string> check_expectation(const Expectation& expect, std::span<const Event> events,
                                           std::uint64_t digest);

}  // namespace tenon::harness
