#include <gtest/gtest.h>

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tenon/core/catalog.hpp"
#include "tenon/core/utf8.hpp"

using namespace tenon;
using json = nlohmann::json;

namespace {

std::string fixture(const std::string& name) { return std::string(TENON_FIXTURE_DIR) + "/" + name; }

const PartCatalog& mini() {
  static const PartCatalog cat = load_catalog_file(fixture("catalog_mini.json"));
  return cat;
}

PartId id_of(const std::string& label) { return *mini().find_by_label(label); }

ValidationError::Kind rejection_kind(const std::string& text) {
  try {
    load_catalog_text(text);
  } catch (const ValidationError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "catalog was accepted";
  return ValidationError::Kind::kBadField;
}

// Three splices: ⿱(⿰(一,丨), ⿰(口,丶)).
constexpr const char* kDeepCatalog = R"({
  "version": 1,
  "parts": [
    {"id": "a", "label": "一", "kind": "Primitive"},
    {"id": "b", "label": "丨", "kind": "Primitive"},
    {"id": "c", "label": "口", "kind": "Primitive"},
    {"id": "d", "label": "丶", "kind": "Primitive"},
    {"id": "ab", "label": "十", "kind": "Composite"},
    {"id": "cd", "label": "叧", "kind": "Composite"},
    {"id": "abcd", "label": "古", "kind": "Composite"}
  ],
  "recipes": [
    {"a": "a", "b": "b", "result": "ab"},
    {"a": "c", "b": "d", "result": "cd"},
    {"a": "ab", "b": "cd", "result": "abcd"}
  ],
  "decompositions": {
    "古": {"op": "⿱",
           "left": {"op": "⿰", "left": {"part": "a"}, "right": {"part": "b"}},
           "right": {"op": "⿰", "left": {"part": "c"}, "right": {"part": "d"}}}
  }
})";

}  // namespace

TEST(Utf8, CountsScalars) {
  EXPECT_EQ(utf8::length("猫"), 1u);
  EXPECT_EQ(utf8::length("小猫"), 2u);
  EXPECT_EQ(utf8::length("a😀"), 2u);
  EXPECT_FALSE(utf8::length("\xE7\x8C"));        // truncated
  EXPECT_FALSE(utf8::length("\xC0\xAF"));        // overlong
  EXPECT_FALSE(utf8::length("\xED\xA0\x80"));    // surrogate
  EXPECT_EQ(utf8::trim(" \t猫\n　"), "猫");
}

TEST(LoadCatalog, MiniFixtureCounts) {
  const auto& cat = mini();
  EXPECT_EQ(cat.parts().size(), 20u);
  EXPECT_EQ(cat.recipes().size(), 8u);
  EXPECT_EQ(cat.decompositions().size(), 6u);
  std::size_t primitives = 0;
  for (const auto& [id, p] : cat.parts()) primitives += p.kind == PartKind::kPrimitive;
  EXPECT_EQ(primitives, 12u);
  EXPECT_EQ(cat.classes().size(), 19u);  // 亻/人 share a class
  EXPECT_EQ(cat.lexicon().at("cat"), "猫");
}

TEST(LoadCatalog, DepthsFollowRecipes) {
  const auto& cat = mini();
  EXPECT_EQ(cat.part(id_of("日")).depth, 0);
  EXPECT_EQ(cat.part(id_of("明")).depth, 1);
  EXPECT_EQ(cat.part(id_of("苗")).depth, 1);
  EXPECT_EQ(cat.part(id_of("猫")).depth, 2);
  EXPECT_EQ(cat.part(id_of("晴")).depth, 2);
  // Every recipe result sits strictly above all members of both input classes.
  for (const auto& [pair, result] : cat.recipes()) {
    for (const auto* cls : {&pair.first(), &pair.second()}) {
      for (const auto& m : cat.members(*cls)) {
        EXPECT_GT(cat.part(result).depth, cat.part(m).depth) << result << " vs " << m;
      }
    }
  }
}

TEST(LoadCatalog, EmptyPartsRejected) {
  EXPECT_EQ(rejection_kind(R"({"version":1,"parts":[],"recipes":[]})"), ValidationError::Kind::kEmptyParts);
}

TEST(LoadCatalog, DanglingResultNamesPart) {
  try {
    load_catalog_file(fixture("bad/dangling_result.json"));
    FAIL() << "accepted";
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.kind(), ValidationError::Kind::kDanglingReference);
    EXPECT_EQ(e.entity(), "P999");
    EXPECT_NE(std::string(e.what()).find("P999"), std::string::npos);
  }
}

TEST(LoadCatalog, MalformedReportsPosition) {
  try {
    load_catalog_file(fixture("bad/malformed.json"));
    FAIL() << "accepted";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 4u);
    EXPECT_GT(e.column(), 1u);
  }
}

TEST(LoadCatalog, RejectsStructuralProblems) {
  using K = ValidationError::Kind;
  EXPECT_EQ(rejection_kind(R"({"parts":[{"id":"a","label":"一","kind":"Primitive"}],"recipes":[]})"),
            K::kUnsupportedVersion);
  EXPECT_EQ(rejection_kind(R"({"version":1,"parts":[{"id":"a","label":"一","kind":"Primitive"},
      {"id":"b","label":"一","kind":"Primitive"}],"recipes":[]})"),
            K::kDuplicateLabel);
  EXPECT_EQ(rejection_kind(R"({"version":1,"parts":[{"id":"a","label":"一","kind":"Primitive"},
      {"id":"b","label":"二","kind":"Composite"}],"recipes":[]})"),
            K::kOrphanComposite);
  EXPECT_EQ(rejection_kind(R"({"version":1,"parts":[{"id":"a","label":"一","kind":"Primitive"},
      {"id":"b","label":"二","kind":"Primitive"}],"recipes":[{"a":"a","b":"a","result":"b"}]})"),
            K::kRecipeResultNotComposite);
  EXPECT_EQ(rejection_kind(R"({"version":1,"parts":[{"id":"a","label":"一","kind":"Primitive"},
      {"id":"b","label":"二","kind":"Composite"},{"id":"c","label":"三","kind":"Composite"}],
      "recipes":[{"a":"a","b":"a","result":"b"},{"a":"a","b":"a","result":"c"}]})"),
            K::kConflictingRecipe);
  EXPECT_EQ(rejection_kind(R"({"version":1,"parts":[{"id":"a","label":"一","kind":"Primitive"}],
      "recipes":[],"decompositions":{"一":{"op":"⿲","left":{"part":"a"},"right":{"part":"a"}}}})"),
            K::kBadTree);
  // Tree folds to the wrong character.
  EXPECT_EQ(rejection_kind(R"({"version":1,"parts":[{"id":"a","label":"一","kind":"Primitive"},
      {"id":"b","label":"二","kind":"Composite"},{"id":"c","label":"三","kind":"Primitive"}],
      "recipes":[{"a":"a","b":"a","result":"b"}],
      "decompositions":{"三":{"op":"⿱","left":{"part":"a"},"right":{"part":"a"}}}})"),
            K::kNotFoldable);
}

TEST(LoadCatalog, IdenticalDuplicateRecipesAreMerged) {
  auto cat = load_catalog_text(R"({"version":1,"parts":[{"id":"a","label":"一","kind":"Primitive"},
      {"id":"b","label":"丨","kind":"Primitive"},{"id":"c","label":"十","kind":"Composite"}],
      "recipes":[{"a":"a","b":"b","result":"c"},{"a":"b","b":"a","result":"c"}]})");
  EXPECT_EQ(cat.recipes().size(), 1u);
}

TEST(LoadCatalog, NonFoldableAllowedWhenRequested) {
  const char* text = R"({"version":1,"parts":[{"id":"a","label":"一","kind":"Primitive"},
      {"id":"c","label":"三","kind":"Primitive"}],"recipes":[],
      "decompositions":{"三":{"op":"⿱","left":{"part":"a"},"right":{"part":"a"}}}})";
  auto cat = load_catalog_text(text, LoadOptions{.require_foldable = false});
  auto outcome = fold_character(cat, "三");
  EXPECT_FALSE(outcome.ok);
  EXPECT_NE(outcome.failure.find("no recipe"), std::string::npos);
}

TEST(Canonicalize, SingletonAndShared) {
  const auto& cat = mini();
  EXPECT_EQ(canonicalize(cat, id_of("日")), ClassId("P001"));
  EXPECT_EQ(canonicalize(cat, id_of("亻")), canonicalize(cat, id_of("人")));
  EXPECT_NE(canonicalize(cat, id_of("亻")), canonicalize(cat, id_of("木")));
  EXPECT_THROW(canonicalize(cat, PartId("PX")), UnknownPart);
}

TEST(Splice, FixtureExamples) {
  const auto& cat = mini();
  EXPECT_EQ(splice(cat, id_of("日"), id_of("月")), id_of("明"));
  EXPECT_EQ(splice(cat, id_of("月"), id_of("日")), id_of("明"));
  EXPECT_EQ(splice(cat, id_of("日"), id_of("日")), std::nullopt);
  // Equivalent variant substitutes for 亻.
  EXPECT_EQ(splice(cat, id_of("人"), id_of("木")), id_of("休"));
  EXPECT_THROW(splice(cat, PartId("PX"), id_of("日")), UnknownPart);
}

// Independent oracle: resolve a pair straight from the raw JSON recipe list
// and equivalence arrays, without the loader's class-pair index.
TEST(Splice, AgreesWithRawRecipeScan) {
  std::ifstream in(fixture("catalog_mini.json"));
  json raw = json::parse(in);
  std::map<std::string, std::set<std::string>> same;
  for (const auto& p : raw["parts"]) same[p["id"]].insert(p["id"].get<std::string>());
  for (const auto& cls : raw["equivalence"]) {
    for (const auto& x : cls) {
      for (const auto& y : cls) same[x].insert(y.get<std::string>());
    }
  }
  auto oracle = [&](const std::string& a, const std::string& b) -> std::optional<std::string> {
    for (const auto& r : raw["recipes"]) {
      const std::string x = r["a"], y = r["b"];
      if ((same[a].contains(x) && same[b].contains(y)) || (same[a].contains(y) && same[b].contains(x))) {
        return r["result"].get<std::string>();
      }
    }
    return std::nullopt;
  };
  const auto& cat = mini();
  for (const auto& [a, pa] : cat.parts()) {
    for (const auto& [b, pb] : cat.parts()) {
      auto got = splice(cat, a, b);
      auto want = oracle(a.str(), b.str());
      ASSERT_EQ(got.has_value(), want.has_value()) << a << "+" << b;
      if (got) EXPECT_EQ(got->str(), *want);
    }
  }
}

TEST(VerifyAssembly, LabelEquality) {
  const auto& cat = mini();
  EXPECT_TRUE(verify_assembly(cat, id_of("猫"), "猫"));
  EXPECT_FALSE(verify_assembly(cat, id_of("明"), "猫"));
  EXPECT_TRUE(verify_assembly(cat, id_of("明"), "明"));
  EXPECT_THROW(verify_assembly(cat, PartId("PX"), "明"), UnknownPart);
}

TEST(AssemblyPlan, Examples) {
  const auto& cat = mini();
  auto plan = assembly_plan(cat, "明");
  ASSERT_EQ(plan.size(), 1u);
  EXPECT_EQ(plan[0], (SpliceStep{id_of("日"), id_of("月"), id_of("明")}));

  auto cat_plan = assembly_plan(cat, "猫");
  ASSERT_EQ(cat_plan.size(), 2u);
  EXPECT_EQ(cat_plan[0], (SpliceStep{id_of("艹"), id_of("田"), id_of("苗")}));
  EXPECT_EQ(cat_plan[1], (SpliceStep{id_of("犭"), id_of("苗"), id_of("猫")}));

  EXPECT_THROW(assembly_plan(cat, "Q"), UnknownCharacter);

  auto deep = load_catalog_text(kDeepCatalog);
  EXPECT_EQ(assembly_plan(deep, "古").size(), 3u);
  EXPECT_EQ(deep.decompositions().at("古").internal_nodes(), 3u);
}

TEST(AssemblyPlan, PlansExecuteForEveryCharacter) {
  const auto& cat = mini();
  for (const auto& [ch, tree] : cat.decompositions()) {
    auto plan = assembly_plan(cat, ch);
    EXPECT_EQ(plan.size(), tree.internal_nodes());
    std::optional<PartId> last;
    for (const auto& step : plan) {
      last = splice(cat, step.left, step.right);
      ASSERT_TRUE(last) << ch;
      EXPECT_EQ(*last, step.result);
    }
    ASSERT_TRUE(last);
    EXPECT_EQ(cat.part(*last).label, ch);
  }
}

TEST(Catalog, DigestIsStableAcrossLoads) {
  auto again = load_catalog_file(fixture("catalog_mini.json"));
  EXPECT_EQ(again.digest(), mini().digest());
  EXPECT_EQ(again.to_json(), mini().to_json());
}
