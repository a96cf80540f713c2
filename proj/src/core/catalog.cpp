#include "tenon/core/catalog.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tenon/core/hash.hpp"
#include "tenon/core/utf8.hpp"

namespace tenon {

using json = nlohmann::json;
using Kind = ValidationError::Kind;

std::string_view to_string(ValidationError::Kind kind) {
  switch (kind) {
    case Kind::kEmptyParts: return "EmptyParts";
    case Kind::kBadField: return "BadField";
    case Kind::kDuplicatePart: return "DuplicatePart";
    case Kind::kDuplicateLabel: return "DuplicateLabel";
    case Kind::kDualClass: return "DualClass";
    case Kind::kDanglingReference: return "DanglingReference";
    case Kind::kRecipeResultNotComposite: return "RecipeResultNotComposite";
    case Kind::kConflictingRecipe: return "ConflictingRecipe";
    case Kind::kOrphanComposite: return "OrphanComposite";
    case Kind::kCycle: return "Cycle";
    case Kind::kBadTree: return "BadTree";
    case Kind::kNotFoldable: return "NotFoldable";
    case Kind::kUnsupportedVersion: return "UnsupportedVersion";
  }
  return "Unknown";
}

std::string_view to_string(PartKind kind) {
  return kind == PartKind::kPrimitive ? "Primitive" : "Composite";
}

namespace {

// IDS operators that take exactly two operands.
const std::set<std::string>& binary_operators() {
  static const std::set<std::string> ops = {"⿰", "⿱", "⿴", "⿵", "⿶",
                                            "⿷", "⿸", "⿹", "⿺", "⿻"};
  return ops;
}

[[noreturn]] void fail(Kind kind, const std::string& entity, const std::string& what) {
  throw ValidationError(kind, entity, std::string(to_string(kind)) + ": " + what);
}

std::pair<std::size_t, std::size_t> line_col(std::string_view text, std::size_t offset) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

const std::string& require_string(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string() || it->get_ref<const std::string&>().empty()) {
    fail(Kind::kBadField, where, where + " needs non-empty string field '" + key + "'");
  }
  return it->get_ref<const std::string&>();
}

const json& require_field(const json& doc, const char* key, json::value_t type) {
  auto it = doc.find(key);
  if (it == doc.end() || it->type() != type) {
    fail(Kind::kBadField, key, std::string("top-level field '") + key + "' missing or wrong type");
  }
  return *it;
}

std::unique_ptr<DecompositionNode> parse_tree(const json& node, const std::string& ch,
                                              const std::map<PartId, Part>& parts) {
  if (!node.is_object()) fail(Kind::kBadTree, ch, "tree node for " + ch + " is not an object");
  auto out = std::make_unique<DecompositionNode>();
  if (node.contains("part")) {
    PartId id(require_string(node, "part", ch));
    auto it = parts.find(id);
    if (it == parts.end()) {
      fail(Kind::kDanglingReference, id.str(), "decomposition of " + ch + " references unknown part " + id.str());
    }
    if (it->second.kind != PartKind::kPrimitive) {
      fail(Kind::kBadTree, id.str(), "decomposition leaf " + id.str() + " in " + ch + " is not Primitive");
    }
    out->node = DecompositionNode::Leaf{std::move(id)};
    return out;
  }
  const auto& op = require_string(node, "op", ch);
  if (!binary_operators().contains(op)) {
    fail(Kind::kBadTree, ch, "operator '" + op + "' in " + ch + " is not a binary IDS operator");
  }
  if (!node.contains("left") || !node.contains("right")) {
    fail(Kind::kBadTree, ch, "internal node in " + ch + " needs both 'left' and 'right'");
  }
  DecompositionNode::Join join;
  join.op = op;
  join.left = parse_tree(node.at("left"), ch, parts);
  join.right = parse_tree(node.at("right"), ch, parts);
  out->node = std::move(join);
  return out;
}

std::size_t count_internal(const DecompositionNode& n) {
  if (n.is_leaf()) return 0;
  const auto& j = std::get<DecompositionNode::Join>(n.node);
  return 1 + count_internal(*j.left) + count_internal(*j.right);
}

std::size_t tree_height(const DecompositionNode& n) {
  if (n.is_leaf()) return 0;
  const auto& j = std::get<DecompositionNode::Join>(n.node);
  return 1 + std::max(tree_height(*j.left), tree_height(*j.right));
}

json tree_to_json(const DecompositionNode& n) {
  if (n.is_leaf()) return json{{"part", std::get<DecompositionNode::Leaf>(n.node).part.str()}};
  const auto& j = std::get<DecompositionNode::Join>(n.node);
  return json{{"op", j.op}, {"left", tree_to_json(*j.left)}, {"right", tree_to_json(*j.right)}};
}

}  // namespace

std::size_t DecompositionTree::internal_nodes() const { return tree ? count_internal(*tree) : 0; }
std::size_t DecompositionTree::height() const { return tree ? tree_height(*tree) : 0; }

const Part& PartCatalog::part(const PartId& id) const {
  auto it = parts_.find(id);
  if (it == parts_.end()) throw UnknownPart(id);
  return it->second;
}

std::optional<PartId> PartCatalog::find_by_label(std::string_view label) const {
  auto it = by_label_.find(std::string(label));
  if (it == by_label_.end()) return std::nullopt;
  return it->second;
}

std::vector<PartId> PartCatalog::members(const ClassId& cls) const {
  std::vector<PartId> out;
  for (const auto& [id, c] : class_of_) {
    if (c == cls) out.push_back(id);
  }
  return out;
}

std::vector<ClassId> PartCatalog::classes() const {
  std::set<ClassId> seen;
  for (const auto& [id, c] : class_of_) seen.insert(c);
  return {seen.begin(), seen.end()};
}

std::string PartCatalog::to_json() const {
  json doc;
  doc["version"] = 1;
  doc["normalization"] = normalization_;
  json parts = json::array();
  for (const auto& [id, p] : parts_) {
    parts.push_back({{"id", id.str()}, {"label", p.label}, {"kind", to_string(p.kind)}});
  }
  doc["parts"] = std::move(parts);
  json eq = json::array();
  for (const auto& cls : classes()) {
    auto m = members(cls);
    if (m.size() < 2) continue;
    json arr = json::array();
    for (const auto& id : m) arr.push_back(id.str());
    eq.push_back(std::move(arr));
  }
  doc["equivalence"] = std::move(eq);
  json recipes = json::array();
  for (const auto& [pair, result] : recipes_) {
    recipes.push_back({{"a", pair.first().str()}, {"b", pair.second().str()}, {"result", result.str()}});
  }
  doc["recipes"] = std::move(recipes);
  json decomp = json::object();
  for (const auto& [ch, t] : decompositions_) decomp[ch] = tree_to_json(*t.tree);
  doc["decompositions"] = std::move(decomp);
  doc["lexicon"] = lexicon_;
  return doc.dump();
}

std::uint64_t PartCatalog::digest() const { return fnv1a64(to_json()); }

PartCatalog load_catalog_text(std::string_view text, const LoadOptions& options) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    auto [line, col] = line_col(text, e.byte > 0 ? e.byte - 1 : 0);
    throw ParseError("catalog parse error at line " + std::to_string(line) + ", column " +
                         std::to_string(col) + ": " + e.what(),
                     line, col);
  }
  if (!doc.is_object()) throw ParseError("catalog root must be a JSON object", 1, 1);

  auto version = doc.find("version");
  if (version == doc.end() || !version->is_number_integer() || version->get<int>() != 1) {
    fail(Kind::kUnsupportedVersion, "version", "catalog must declare \"version\": 1");
  }

  PartCatalog cat;
  if (auto it = doc.find("normalization"); it != doc.end()) {
    if (!it->is_string() || (*it != "NFC" && *it != "NFD")) {
      fail(Kind::kBadField, "normalization", "normalization must be \"NFC\" or \"NFD\"");
    }
    cat.normalization_ = it->get<std::string>();
  }

  // Parts.
  const auto& parts = require_field(doc, "parts", json::value_t::array);
  if (parts.empty()) fail(Kind::kEmptyParts, "parts", "catalog declares no parts");
  for (const auto& p : parts) {
    if (!p.is_object()) fail(Kind::kBadField, "parts", "part entries must be objects");
    PartId id(require_string(p, "id", "part"));
    const auto& label = require_string(p, "label", id.str());
    const auto& kind = require_string(p, "kind", id.str());
    if (!utf8::is_valid(label)) fail(Kind::kBadField, id.str(), "label of " + id.str() + " is not UTF-8");
    Part part{id, label, PartKind::kPrimitive, 0};
    if (kind == "Primitive") {
      part.kind = PartKind::kPrimitive;
    } else if (kind == "Composite") {
      part.kind = PartKind::kComposite;
    } else {
      fail(Kind::kBadField, id.str(), "part " + id.str() + " has unknown kind '" + kind + "'");
    }
    if (cat.parts_.contains(id)) fail(Kind::kDuplicatePart, id.str(), "duplicate part id " + id.str());
    if (cat.by_label_.contains(label)) {
      fail(Kind::kDuplicateLabel, label,
           "label " + label + " used by both " + cat.by_label_.at(label).str() + " and " + id.str());
    }
    cat.by_label_.emplace(label, id);
    cat.parts_.emplace(id, std::move(part));
  }

  // Equivalence classes. The class id is the smallest member id.
  std::map<PartId, std::size_t> listed_in;
  if (auto it = doc.find("equivalence"); it != doc.end()) {
    if (!it->is_array()) fail(Kind::kBadField, "equivalence", "equivalence must be an array of arrays");
    for (std::size_t ci = 0; ci < it->size(); ++ci) {
      const auto& cls = (*it)[ci];
      if (!cls.is_array() || cls.empty()) {
        fail(Kind::kBadField, "equivalence", "equivalence class " + std::to_string(ci) + " must be a non-empty array");
      }
      std::vector<PartId> members;
      for (const auto& m : cls) {
        if (!m.is_string()) fail(Kind::kBadField, "equivalence", "equivalence members must be part ids");
        PartId id(m.get<std::string>());
        if (!cat.parts_.contains(id)) {
          fail(Kind::kDanglingReference, id.str(), "equivalence class references unknown part " + id.str());
        }
        if (auto prev = listed_in.find(id); prev != listed_in.end()) {
          fail(Kind::kDualClass, id.str(),
               "part " + id.str() + " appears in equivalence classes " + std::to_string(prev->second) +
                   " and " + std::to_string(ci));
        }
        listed_in.emplace(id, ci);
        members.push_back(std::move(id));
      }
      ClassId cls_id(std::min_element(members.begin(), members.end())->str());
      for (const auto& m : members) cat.class_of_.emplace(m, cls_id);
    }
  }
  for (const auto& [id, p] : cat.parts_) {
    if (!cat.class_of_.contains(id)) cat.class_of_.emplace(id, ClassId(id.str()));
  }

  // Recipes.
  const auto& recipes = require_field(doc, "recipes", json::value_t::array);
  std::map<PartId, std::vector<ClassPair>> produced_by;
  for (const auto& r : recipes) {
    if (!r.is_object()) fail(Kind::kBadField, "recipes", "recipe entries must be objects");
    PartId a(require_string(r, "a", "recipe"));
    PartId b(require_string(r, "b", "recipe"));
    PartId result(require_string(r, "result", "recipe"));
    for (const auto* id : {&a, &b, &result}) {
      if (!cat.parts_.contains(*id)) {
        fail(Kind::kDanglingReference, id->str(), "recipe references undeclared part " + id->str());
      }
    }
    if (cat.parts_.at(result).kind != PartKind::kComposite) {
      fail(Kind::kRecipeResultNotComposite, result.str(), "recipe result " + result.str() + " is not Composite");
    }
    ClassPair key(cat.class_of_.at(a), cat.class_of_.at(b));
    auto [it, inserted] = cat.recipes_.emplace(key, result);
    if (!inserted && it->second != result) {
      fail(Kind::kConflictingRecipe, a.str() + "+" + b.str(),
           "recipes for classes {" + key.first().str() + ", " + key.second().str() + "} disagree: " +
               it->second.str() + " vs " + result.str());
    }
    if (inserted) produced_by[result].push_back(key);
  }
  for (const auto& [id, p] : cat.parts_) {
    if (p.kind == PartKind::kComposite && !produced_by.contains(id)) {
      fail(Kind::kOrphanComposite, id.str(), "composite part " + id.str() + " is not produced by any recipe");
    }
  }

  // Depths with cycle detection over part -> producing-input edges.
  enum class Mark { kNone, kVisiting, kDone };
  std::map<PartId, Mark> mark;
  std::vector<PartId> stack;
  std::function<int(const PartId&)> depth_of = [&](const PartId& id) -> int {
    auto& m = mark[id];
    if (m == Mark::kDone) return cat.parts_.at(id).depth;
    if (m == Mark::kVisiting) {
      auto start = std::find(stack.begin(), stack.end(), id);
      std::string path;
      for (auto it = start; it != stack.end(); ++it) path += it->str() + " -> ";
      path += id.str();
      fail(Kind::kCycle, id.str(), "recipe cycle: " + path);
    }
    m = Mark::kVisiting;
    stack.push_back(id);
    int depth = 0;
    if (auto it = produced_by.find(id); it != produced_by.end()) {
      int deepest_input = 0;
      for (const auto& pair : it->second) {
        for (const auto* cls : {&pair.first(), &pair.second()}) {
          for (const auto& member : cat.members(*cls)) {
            deepest_input = std::max(deepest_input, depth_of(member));
          }
        }
      }
      depth = deepest_input + 1;
    }
    stack.pop_back();
    mark[id] = Mark::kDone;
    cat.parts_.at(id).depth = depth;
    return depth;
  };
  for (const auto& [id, p] : cat.parts_) depth_of(id);

  // Decompositions.
  if (auto it = doc.find("decompositions"); it != doc.end()) {
    if (!it->is_object()) fail(Kind::kBadField, "decompositions", "decompositions must be an object");
    for (const auto& [ch, tree] : it->items()) {
      if (!utf8::is_single_scalar(ch)) {
        fail(Kind::kBadTree, ch, "decomposition key '" + ch + "' is not a single character");
      }
      auto root = cat.find_by_label(ch);
      if (!root) fail(Kind::kDanglingReference, ch, "no part is labeled " + ch);
      DecompositionTree t;
      t.character = ch;
      t.root = *root;
      t.tree = parse_tree(tree, ch, cat.parts_);
      cat.decompositions_.emplace(ch, std::move(t));
    }
  }

  // Lexicon.
  if (auto it = doc.find("lexicon"); it != doc.end()) {
    if (!it->is_object()) fail(Kind::kBadField, "lexicon", "lexicon must be an object");
    for (const auto& [kw, ch] : it->items()) {
      if (kw.empty() || utf8::ascii_lower(kw) != kw) {
        fail(Kind::kBadField, kw, "lexicon keyword '" + kw + "' must be non-empty lowercase");
      }
      if (!ch.is_string() || !utf8::is_single_scalar(ch.get<std::string>())) {
        fail(Kind::kBadField, kw, "lexicon entry '" + kw + "' must map to one character");
      }
      cat.lexicon_.emplace(kw, ch.get<std::string>());
    }
  }

  if (options.require_foldable) {
    for (const auto& [ch, t] : cat.decompositions_) {
      auto outcome = fold_character(cat, ch);
      if (!outcome.ok) fail(Kind::kNotFoldable, ch, ch + " does not fold: " + outcome.failure);
    }
  }
  return cat;
}

PartCatalog load_catalog(std::istream& source, const LoadOptions& options) {
  std::ostringstream buf;
  buf << source.rdbuf();
  return load_catalog_text(buf.str(), options);
}

PartCatalog load_catalog_file(const std::string& path, const LoadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open catalog file " + path, 0, 0);
  return load_catalog(in, options);
}

ClassId canonicalize(const PartCatalog& catalog, const PartId& part) {
  auto it = catalog.equivalence().find(part);
  if (it == catalog.equivalence().end()) throw UnknownPart(part);
  return it->second;
}

std::optional<PartId> splice(const PartCatalog& catalog, const PartId& a, const PartId& b) {
  ClassPair key(canonicalize(catalog, a), canonicalize(catalog, b));
  auto it = catalog.recipes().find(key);
  if (it == catalog.recipes().end()) return std::nullopt;
  return it->second;
}

bool verify_assembly(const PartCatalog& catalog, const PartId& assembled, std::string_view target) {
  return catalog.part(assembled).label == target;
}

namespace {

struct FoldFailure {
  std::string why;
};

PartId fold_node(const PartCatalog& catalog, const DecompositionNode& node,
                 std::vector<SpliceStep>* steps) {
  if (node.is_leaf()) return std::get<DecompositionNode::Leaf>(node.node).part;
  const auto& j = std::get<DecompositionNode::Join>(node.node);
  PartId left = fold_node(catalog, *j.left, steps);
  PartId right = fold_node(catalog, *j.right, steps);
  auto result = splice(catalog, left, right);
  if (!result) {
    throw FoldFailure{"no recipe for " + catalog.part(left).label + " + " + catalog.part(right).label};
  }
  if (steps) steps->push_back({left, right, *result});
  return *result;
}

}  // namespace

FoldOutcome fold_character(const PartCatalog& catalog, std::string_view character) {
  FoldOutcome out;
  out.character = std::string(character);
  auto it = catalog.decompositions().find(out.character);
  if (it == catalog.decompositions().end()) throw UnknownCharacter(out.character);
  try {
    out.result = fold_node(catalog, *it->second.tree, nullptr);
  } catch (const FoldFailure& f) {
    out.failure = f.why;
    return out;
  }
  const auto& label = catalog.part(*out.result).label;
  if (label != out.character) {
    out.failure = "folds to " + label;
    return out;
  }
  out.ok = true;
  return out;
}

std::vector<SpliceStep> assembly_plan(const PartCatalog& catalog, std::string_view target) {
  auto it = catalog.decompositions().find(std::string(target));
  if (it == catalog.decompositions().end()) throw UnknownCharacter(std::string(target));
  std::vector<SpliceStep> steps;
  try {
    fold_node(catalog, *it->second.tree, &steps);
  } catch (const FoldFailure& f) {
    throw ValidationError(Kind::kNotFoldable, std::string(target),
                          "NotFoldable: " + std::string(target) + ": " + f.why);
  }
  return steps;
}

}  // namespace tenon
