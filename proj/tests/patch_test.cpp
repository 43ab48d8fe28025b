// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "eor/model.hpp"
#include "eor/patch.hpp"
#include "eor/solver.hpp"
#include "test_util.hpp"

namespace eor {
namespace {

using testing::aircraft_source;

const char* const kFleetLimitPatch =
    R"({"ADD CONSTRAINT": "MaxTypeA: A <= 15\nMaxTypeB: B <= 30"})";

ViolationKind violation_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const PatchError& e) {
    return e.violation().kind;
  }
  ADD_FAILURE() << "no PatchError thrown";
  return ViolationKind::kMalformedDocument;
}

double resolve(const std::string& source) {
  const Solution s = solve_milp(parse_model(source));
  EXPECT_EQ(s.status, SolveStatus::kOptimal);
  return std::round(s.objective);
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

TEST(ParsePatch, FleetLimitPatch) {
  const QueryPatch p = parse_patch(kFleetLimitPatch);
  ASSERT_TRUE(p.add_constraint.has_value());
  EXPECT_EQ(*p.add_constraint, "MaxTypeA: A <= 15\nMaxTypeB: B <= 30");
  EXPECT_FALSE(p.add_data.has_value());
  EXPECT_FALSE(p.delete_constraint.has_value());
  EXPECT_EQ(p.raw, kFleetLimitPatch);
  EXPECT_EQ(p.keys(), std::vector<std::string>{"ADD CONSTRAINT"});
}

TEST(ParsePatch, UnknownKey) {
  EXPECT_EQ(violation_of([] { (void)parse_patch(R"({"UPDATE OBJECTIVE": "x"})"); }),
            ViolationKind::kUnknownKey);
}

TEST(ParsePatch, EmptyObject) {
  EXPECT_EQ(violation_of([] { (void)parse_patch("{}"); }), ViolationKind::kMalformedDocument);
}

TEST(ParsePatch, MalformedDocuments) {
  for (const char* doc : {"", "[]", "\"ADD DATA\"", R"({"ADD DATA": 5})", R"({"ADD DATA": "a")",
                          R"({"ADD DATA": null})"}) {
    EXPECT_EQ(violation_of([&] { (void)parse_patch(doc); }), ViolationKind::kMalformedDocument)
        << doc;
  }
}

TEST(ParsePatch, CanonicalDocumentRoundTrips) {
  const QueryPatch p = parse_patch(
      R"({"ADD DATA": "param costA = 8000", "DELETE CONSTRAINT": "Operational: A + B <= maxAircraft"})");
  const QueryPatch q = parse_patch(p.to_document());
  EXPECT_EQ(q.add_data, p.add_data);
  EXPECT_EQ(q.delete_constraint, p.delete_constraint);
  EXPECT_EQ(q.keys(), (std::vector<std::string>{"DELETE CONSTRAINT", "ADD DATA"}));
}

TEST(ApplyPatch, FleetLimitsGiveFourRowsAndNewOptimum) {
  const std::string out = apply_patch(aircraft_source(), parse_patch(kFleetLimitPatch));
  const LinearModel m = parse_model(out);
  EXPECT_EQ(m.constraints.size(), 4u);
  EXPECT_EQ(m.find_constraint("MaxTypeB")->region, Region::kEditable);
  EXPECT_EQ(resolve(out), 215000);
}

TEST(ApplyPatch, DataOverrideShadowsParameter) {
  const std::string out =
      apply_patch(aircraft_source(), parse_patch(R"({"ADD DATA": "param costA = 8000"})"));
  EXPECT_EQ(parse_model(out).effective_param("costA")->value, 8000);
  EXPECT_EQ(resolve(out), 160000);
}

TEST(ApplyPatch, AllTenQueriesMatchHandEdits) {
  const std::string base = aircraft_source();
  for (int k = 1; k <= 10; ++k) {
    const auto& e = testing::kAircraftEdits[k - 1];
    QueryPatch p;
    if (*e.add_data) p.add_data = e.add_data;
    if (*e.add_constraint) p.add_constraint = e.add_constraint;
    if (*e.delete_line) p.delete_constraint = e.delete_line;
    const std::string out = apply_patch(base, p);
    EXPECT_TRUE(semantically_equal(parse_model(out), parse_model(testing::aircraft_variant(k))))
        << "query " << k;
    EXPECT_EQ(resolve(out), e.truth) << "query " << k;
  }
}

TEST(ApplyPatch, DeleteOutsideEditableRegionIsMissing) {
  const std::string src =
      "# EOR DATA BEGIN\n# EOR DATA END\nminimize: x + y\nsubject to:\n"
      "Fixed: x + y >= 2\n"
      "# EOR CONSTRAINT BEGIN\nSoft: x <= 5\n# EOR CONSTRAINT END\n";
  QueryPatch p;
  p.delete_constraint = "Fixed: x + y >= 2";
  EXPECT_EQ(violation_of([&] { (void)apply_patch(src, p); }), ViolationKind::kDeleteTargetMissing);
  p.delete_constraint = "Soft:   x <=  5";
  EXPECT_EQ(parse_model(apply_patch(src, p)).constraints.size(), 1u);
}

TEST(ApplyPatch, DeleteToleratesCommentsAndBlankLines) {
  QueryPatch p;
  p.delete_constraint = "# operational limit\n\n  Operational:  A + B <= maxAircraft  \n";
  const std::string out = apply_patch(aircraft_source(), p);
  EXPECT_EQ(parse_model(out).find_constraint("Operational"), nullptr);
}

TEST(ApplyPatch, UndeclaredVariableFailsToParse) {
  QueryPatch p;
  p.add_constraint = "Third: A + C <= 4";
  EXPECT_EQ(violation_of([&] { (void)apply_patch(aircraft_source(), p); }),
            ViolationKind::kSnippetParseError);
}

TEST(ApplyPatch, NonParamDataFailsToParse) {
  QueryPatch p;
  p.add_data = "MaxA: A <= 3";
  EXPECT_EQ(violation_of([&] { (void)apply_patch(aircraft_source(), p); }),
            ViolationKind::kSnippetParseError);
}

TEST(ApplyPatch, MarkerLinesAreRejected) {
  QueryPatch p;
  p.add_constraint = "X: A <= 3\n# EOR CONSTRAINT END";
  EXPECT_EQ(violation_of([&] { (void)apply_patch(aircraft_source(), p); }),
            ViolationKind::kMarkerCorruption);
  p = {};
  p.delete_constraint = "# EOR CONSTRAINT BEGIN";
  EXPECT_EQ(violation_of([&] { (void)apply_patch(aircraft_source(), p); }),
            ViolationKind::kMarkerCorruption);
}

TEST(ApplyPatch, SourceWithBrokenMarkersIsRejected) {
  std::string src = aircraft_source();
  src.erase(src.find("# EOR DATA END"), 15);
  QueryPatch p;
  p.add_data = "param costA = 1";
  EXPECT_EQ(violation_of([&] { (void)apply_patch(src, p); }), ViolationKind::kMarkerCorruption);
}

TEST(ApplyPatch, DeleteThenAddReplacesConstraint) {
  QueryPatch p;
  p.delete_constraint = "Operational: A + B <= maxAircraft";
  p.add_constraint = "Operational: A + B <= 25";
  const LinearModel m = parse_model(apply_patch(aircraft_source(), p));
  EXPECT_EQ(m.find_constraint("Operational")->upper, 25);
  EXPECT_EQ(m.constraints.size(), 2u);
}

TEST(ValidatePatch, SameVariablesHaveNoViolations) {
  const LinearModel base = parse_model(aircraft_source());
  EXPECT_TRUE(validate_patch(base, parse_model(testing::aircraft_variant(5))).empty());
  QueryPatch p;
  p.add_data = "param fuelSurcharge = 12";
  EXPECT_TRUE(validate_patch(base, parse_model(apply_patch(aircraft_source(), p))).empty());
}

TEST(ValidatePatch, VariableChangesAreReported) {
  const std::string two = "# EOR DATA BEGIN\n# EOR DATA END\nminimize: x + y\nsubject to:\n"
                          "# EOR CONSTRAINT BEGIN\n# EOR CONSTRAINT END\nintegers: x\n";
  const std::string three = "# EOR DATA BEGIN\n# EOR DATA END\nminimize: x + y + z\nsubject to:\n"
                            "# EOR CONSTRAINT BEGIN\n# EOR CONSTRAINT END\nintegers: x y\n";
  const auto v = validate_patch(parse_model(two), parse_model(three));
  ASSERT_EQ(v.size(), 2u);
  EXPECT_EQ(v[0].kind, ViolationKind::kNewVariableIntroduced);
  EXPECT_NE(v[0].detail.find("'y'"), std::string::npos);
  EXPECT_NE(v[1].detail.find("'z'"), std::string::npos);
  EXPECT_EQ(validate_patch(parse_model(three), parse_model(two)).size(), 2u);
}

TEST(EffectiveLines, DropsBlanksAndComments) {
  EXPECT_EQ(effective_lines("# note\n\nparam  a =  1\n  param b = 2  \n"),
            (std::vector<std::string>{"param a = 1", "param b = 2"}));
}

// Random patches: only data params and constraints over the existing
// variables, with comments and blank lines sprinkled in.
QueryPatch random_patch(std::mt19937& rng, const LinearModel& m) {
  std::uniform_int_distribution<int> count(0, 3);
  std::uniform_int_distribution<int> value(-9, 9);
  std::uniform_int_distribution<std::size_t> var(0, m.variables.size() - 1);
  std::bernoulli_distribution coin(0.5);
  QueryPatch p;
  std::string data, cons;
  const int nd = count(rng);
  for (int k = 0; k < nd; ++k) {
    if (coin(rng)) data += "# note " + std::to_string(k) + "\n";
    data += "param scale = " + std::to_string(value(rng)) + "\n";
  }
  const int nc = count(rng);
  for (int k = 0; k < nc; ++k) {
    if (coin(rng)) cons += "\n";
    cons += "New" + std::to_string(k) + ": " + m.variables[var(rng)].name + " <= " +
            std::to_string(value(rng)) + "\n";
  }
  if (!data.empty()) p.add_data = data;
  if (!cons.empty() || !p.add_data) p.add_constraint = cons.empty() ? "Only: x0 >= -9" : cons;
  return p;
}

TEST(PatchProperty, TextOutsideRegionsIsUntouched) {
  std::mt19937 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const std::string src = testing::random_model_source(rng);
    const QueryPatch p = random_patch(rng, parse_model(src));
    const std::string out = apply_patch(src, p);
    // Everything up to the data end marker's line start, between the two
    // regions, and after the constraint end marker is byte-identical.
    const auto a0 = src.find("# EOR DATA END"), b0 = out.find("# EOR DATA END");
    EXPECT_EQ(src.substr(0, src.find("# EOR DATA BEGIN")), out.substr(0, out.find("# EOR DATA BEGIN")));
    EXPECT_EQ(src.substr(a0, src.find("# EOR CONSTRAINT BEGIN") - a0),
              out.substr(b0, out.find("# EOR CONSTRAINT BEGIN") - b0));
    EXPECT_EQ(src.substr(src.find("# EOR CONSTRAINT END")), out.substr(out.find("# EOR CONSTRAINT END")));
  }
}

TEST(PatchProperty, InsertedLinesAreExactlyTheSnippets) {
  std::mt19937 rng(18);
  for (int trial = 0; trial < 200; ++trial) {
    const std::string src = testing::random_model_source(rng);
    const QueryPatch p = random_patch(rng, parse_model(src));
    const auto before = lines_of(src);
    const auto after = lines_of(apply_patch(src, p));
    std::vector<std::string> inserted;
    // Lines are only inserted, so a two-pointer walk recovers them in order.
    std::size_t i = 0;
    for (const auto& line : after) {
      if (i < before.size() && before[i] == line) {
        ++i;
      } else {
        inserted.push_back(line);
      }
    }
    EXPECT_EQ(i, before.size());
    std::vector<std::string> expected;
    for (const auto* s : {&p.add_data, &p.add_constraint}) {
      if (!*s) continue;
      auto ls = lines_of(**s);
      expected.insert(expected.end(), ls.begin(), ls.end());
    }
    // The walk is greedy, so compare as multisets of lines.
    std::sort(inserted.begin(), inserted.end());
    std::sort(expected.begin(), expected.end());
    EXPECT_EQ(inserted, expected);
  }
}

TEST(PatchProperty, AddThenDeleteRestoresModel) {
  std::mt19937 rng(19);
  for (int trial = 0; trial < 200; ++trial) {
    const std::string src = testing::random_model_source(rng);
    const LinearModel original = parse_model(src);
    QueryPatch add = random_patch(rng, original);
    add.add_data.reset();
    if (!add.add_constraint) add.add_constraint = "Only: x0 >= -9";
    const std::string added = apply_patch(src, add);
    QueryPatch del;
    del.delete_constraint = add.add_constraint;
    const std::string restored = apply_patch(added, del);
    EXPECT_TRUE(semantically_equal(parse_model(restored), original)) << added;
  }
}

}  // namespace
}  // namespace eor
