#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "tomnet/error.hpp"
#include "tomnet/eval.hpp"

using namespace tomnet;

namespace {

const Dataset& eval_set() {
  static const Dataset d = [] {
    DatasetSpec s = testing::tiny_spec(5, 30, 40, 21);
    s.split = Split::Test;
    s.n_test_maps = 5;
    return build_dataset(s);
  }();
  return d;
}

std::vector<EvalCondition> all_conditions() {
  std::vector<EvalCondition> c{EvalCondition::global(), EvalCondition::hidden(),
                               EvalCondition::visible()};
  for (int n = 1; n <= 3; ++n) {
    c.push_back(EvalCondition::neglected(n));
    c.push_back(EvalCondition::neglected(n, true));
    c.push_back(EvalCondition::neglected(n, false));
  }
  return c;
}

std::vector<int> object_cells(const EncodedSample& s) {
  std::vector<int> cells;
  for (int k = 0; k < 4; ++k)
    for (int c = 0; c < kNumCells; ++c)
      if (s.at(c, plane::kObject + k) == 1.0) cells.push_back(c);
  return cells;
}

}  // namespace

TEST_CASE("labels round trip") {
  std::vector<EvalCondition> conds = all_conditions();
  for (int n = 1; n <= 3; ++n) {
    conds.push_back(EvalCondition::aligned(n));
    conds.push_back(EvalCondition::aligned(n, true));
  }
  for (int b : {250, 150, 50, 25}) conds.push_back(EvalCondition::budget(b));
  for (const EvalCondition& c : conds) CHECK(EvalCondition::parse(c.label()) == c);
  CHECK(EvalCondition::neglected(3, true).label() == "neglected3_visible");
  CHECK(EvalCondition::budget(50).label() == "budget50");
  CHECK_THROWS(EvalCondition::parse("neglected4"));
  CHECK_THROWS(EvalCondition::parse("sideways"));
  CHECK_THROWS(EvalCondition::neglected(0));
}

TEST_CASE("hidden and visible partition every sample") {
  for (const EncodedSample& s : eval_set().samples) {
    const bool h = EvalCondition::hidden().matches(s.meta);
    const bool v = EvalCondition::visible().matches(s.meta);
    CHECK(h != v);
    CHECK(EvalCondition::global().matches(s.meta));
    int neglect_rows = 0;
    for (int n = 1; n <= 3; ++n) neglect_rows += EvalCondition::neglected(n).matches(s.meta);
    CHECK(neglect_rows == (s.meta.flags.neglected > 0 && !s.meta.flags.target_identified));
  }
}

TEST_CASE("oracle predictions score 100 everywhere") {
  const auto& samples = eval_set().samples;
  std::vector<int> pred;
  for (const auto& s : samples) pred.push_back(s.label_target);
  for (const EvalCondition& c : all_conditions()) {
    auto acc = accuracy(samples, pred, c);
    if (acc) CHECK(*acc == 100.0);
  }
  CHECK(accuracy(samples, pred, EvalCondition::global()).has_value());
  CHECK(!accuracy(samples, pred, EvalCondition::aligned(2)).has_value());
  CHECK_THROWS_AS(accuracy(samples, std::vector<int>{1}, EvalCondition::global()),
                  ShapeError);
}

TEST_CASE("guessing among the four objects is at chance on hidden targets") {
  const auto& samples = eval_set().samples;
  Rng rng(5);
  std::vector<int> pred;
  for (const auto& s : samples) {
    auto cells = object_cells(s);
    pred.push_back(cells[rng.uniform_index(cells.size())]);
  }
  std::size_t n = 0;
  for (const auto& s : samples) n += EvalCondition::hidden().matches(s.meta);
  REQUIRE(n > 400);
  const double sigma = 100.0 * std::sqrt(0.25 * 0.75 / n);
  auto acc = accuracy(samples, pred, EvalCondition::hidden());
  CHECK(std::abs(*acc - 25.0) < 4 * sigma);
}

TEST_CASE("constant predictors average to one over the free cells") {
  DatasetSpec s = testing::tiny_spec(1, 60, 30, 8);
  Dataset d = build_dataset(s);
  const auto free = d.maps[0].free_cells();
  double total = 0.0;
  for (Position c : free) {
    std::vector<int> pred(d.samples.size(), c.index());
    total += *accuracy(d.samples, pred, EvalCondition::global());
  }
  CHECK(total / free.size() == doctest::Approx(100.0 / free.size()));
}

TEST_CASE("model predictions break ties at the lowest cell") {
  SpsModel m = SpsModel::create(Variant::NoBel, SpsWidths::reduced(), 1);
  for (Param& p : m.params())
    if (p.name.starts_with("head.target.fc") || p.name.starts_with("head.target.branch_out"))
      std::fill(p.value.begin(), p.value.end(), 0.0);
  std::vector<EncodedSample> some(eval_set().samples.begin(),
                                  eval_set().samples.begin() + 10);
  for (int p : predict_targets(m, some)) CHECK(p == 0);
}

TEST_CASE("evaluate_all agrees with single evaluations") {
  SpsModel m = SpsModel::create(Variant::Bel, SpsWidths::reduced(), 2);
  auto conds = all_conditions();
  auto all = evaluate_all(m, eval_set(), conds);
  for (std::size_t i = 0; i < conds.size(); ++i) {
    CHECK(all[i] == evaluate(m, eval_set(), conds[i]));
    if (all[i]) {
      CHECK(*all[i] >= 0.0);
      CHECK(*all[i] <= 100.0);
    }
  }
}

TEST_CASE("sweep csv round trip") {
  std::vector<SweepRecord> recs{
      {"global", 25, Variant::Bel, 0.001, 0, 69.4123456789},
      {"neglected3_visible", 25, Variant::NoBel, 0.00075, 17, std::nullopt},
      {"budget25", 5, Variant::Bel, 0.00015, 3, 100.0}};
  std::string text = sweep_csv(recs);
  CHECK(text.starts_with("condition,maps,variant,lr,seed,accuracy\n"));
  CHECK(text.find("NA") != std::string::npos);
  CHECK(parse_sweep_csv(text) == recs);
  CHECK_THROWS(parse_sweep_csv("condition,maps\nx,1\n"));
}
