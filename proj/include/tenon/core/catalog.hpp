#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "tenon/core/ids.hpp"

namespace tenon {

// ---------------------------------------------------------------------------
// Errors

class CatalogError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed catalog text. line/column are 1-based; 0 when unknown.
class ParseError : public CatalogError {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : CatalogError(what), line_(line), column_(column) {}
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

// Well-formed document that breaks a catalog invariant.
class ValidationError : public CatalogError {
 public:
  enum class Kind {
    kEmptyParts,
    kBadField,
    kDuplicatePart,
    kDuplicateLabel,
    kDualClass,
    kDanglingReference,
    kRecipeResultNotComposite,
    kConflictingRecipe,
    kOrphanComposite,
    kCycle,
    kBadTree,
    kNotFoldable,
    kUnsupportedVersion,
  };

  ValidationError(Kind kind, std::string entity, const std::string& what)
      : CatalogError(what), kind_(kind), entity_(std::move(entity)) {}

  Kind kind() const noexcept { return kind_; }
  // The id, label, or character the error is about.
  const std::string& entity() const noexcept { return entity_; }

 private:
  Kind kind_;
  std::string entity_;
};

std::string_view to_string(ValidationError::Kind kind);

class UnknownPart : public std::out_of_range {
 public:
  explicit UnknownPart(const PartId& id)
      : std::out_of_range("unknown part: " + id.str()), id_(id) {}
  const PartId& id() const noexcept { return id_; }

 private:
  PartId id_;
};

class UnknownCharacter : public std::out_of_range {
 public:
  explicit UnknownCharacter(const std::string& ch)
      : std::out_of_range("no decomposition for character: " + ch), ch_(ch) {}
  const std::string& character() const noexcept { return ch_; }

 private:
  std::string ch_;
};

// ---------------------------------------------------------------------------
// Model

enum class PartKind { kPrimitive, kComposite };

std::string_view to_string(PartKind kind);

struct Part {
  PartId id;
  std::string label;
  PartKind kind = PartKind::kPrimitive;
  int depth = 0;
};

// Unordered class pair; the constructor sorts so {a,b} == {b,a}.
class ClassPair {
 public:
  ClassPair(ClassId a, ClassId b) {
    if (b < a) std::swap(a, b);
    first_ = std::move(a);
    second_ = std::move(b);
  }
  const ClassId& first() const noexcept { return first_; }
  const ClassId& second() const noexcept { return second_; }
  friend auto operator<=>(const ClassPair&, const ClassPair&) = default;
  friend bool operator==(const ClassPair&, const ClassPair&) = default;

 private:
  ClassId first_;
  ClassId second_;
};

// Binary composition tree. A leaf names a primitive part; an internal node
// carries an IDS operator such as "⿰" that is layout-only.
struct DecompositionNode {
  struct Leaf {
    PartId part;
  };
  struct Join {
    std::string op;
    std::unique_ptr<DecompositionNode> left;
    std::unique_ptr<DecompositionNode> right;
  };
  std::variant<Leaf, Join> node;

  bool is_leaf() const noexcept { return std::holds_alternative<Leaf>(node); }
};

struct DecompositionTree {
  std::string character;
  PartId root;  // part whose label is `character`
  std::shared_ptr<const DecompositionNode> tree;

  std::size_t internal_nodes() const;
  std::size_t height() const;  // leaf-only tree has height 0
};

struct SpliceStep {
  PartId left;
  PartId right;
  PartId result;
  friend bool operator==(const SpliceStep&, const SpliceStep&) = default;
};

struct LoadOptions {
  // Reject catalogs in which some decomposition does not fold to its
  // character through the recipe table.
  bool require_foldable = true;
};

// Immutable after construction; safe to share across threads.
class PartCatalog {
 public:
  const std::map<PartId, Part>& parts() const noexcept { return parts_; }
  const std::map<PartId, ClassId>& equivalence() const noexcept { return class_of_; }
  const std::map<ClassPair, PartId>& recipes() const noexcept { return recipes_; }
  const std::map<std::string, DecompositionTree>& decompositions() const noexcept {
    return decompositions_;
  }
  const std::map<std::string, std::string>& lexicon() const noexcept { return lexicon_; }
  const std::string& normalization() const noexcept { return normalization_; }

  bool contains(const PartId& id) const { return parts_.contains(id); }
  const Part& part(const PartId& id) const;
  std::optional<PartId> find_by_label(std::string_view label) const;

  // Members of a class, sorted.
  std::vector<PartId> members(const ClassId& cls) const;
  std::vector<ClassId> classes() const;

  // FNV-1a over the canonical JSON form; pins a log to the catalog it ran on.
  std::uint64_t digest() const;

  std::string to_json() const;

 private:
  friend PartCatalog load_catalog(std::istream&, const LoadOptions&);
  friend PartCatalog load_catalog_text(std::string_view, const LoadOptions&);

  std::map<PartId, Part> parts_;
  std::map<PartId, ClassId> class_of_;
  std::map<ClassPair, PartId> recipes_;
  std::map<std::string, DecompositionTree> decompositions_;
  std::map<std::string, std::string> lexicon_;
  std::map<std::string, PartId> by_label_;
  std::string normalization_ = "NFC";
};

// Parses and validates a catalog document. Throws ParseError or
// ValidationError; every invariant is checked before returning.
PartCatalog load_catalog(std::istream& source, const LoadOptions& options = {});
PartCatalog load_catalog_text(std::string_view text, const LoadOptions& options = {});
PartCatalog load_catalog_file(const std::string& path, const LoadOptions& options = {});

ClassId canonicalize(const PartCatalog& catalog, const PartId& part);

// nullopt means the class pair has no recipe (a rejected attempt, not a fault).
std::optional<PartId> splice(const PartCatalog& catalog, const PartId& a, const PartId& b);

bool verify_assembly(const PartCatalog& catalog, const PartId& assembled,
                     std::string_view target);

// Post-order splice steps for the character's tree.
std::vector<SpliceStep> assembly_plan(const PartCatalog& catalog, std::string_view target);

// Result of folding one decomposition through splice().
struct FoldOutcome {
  std::string character;
  bool ok = false;
  std::optional<PartId> result;
  std::string failure;  // empty when ok
};

FoldOutcome fold_character(const PartCatalog& catalog, std::string_view character);

}  // namespace tenon
