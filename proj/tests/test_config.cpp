#include <doctest.h>

#include "tomnet/config.hpp"
#include "tomnet/error.hpp"

using namespace tomnet;

namespace {

std::string key_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "<accepted>";
}

}  // namespace

TEST_CASE("defaults describe the 25-map experiment") {
  ExperimentConfig c = parse_config("");
  CHECK(c.train_maps == std::vector<int>{25});
  CHECK(c.test_maps == 10);
  CHECK(c.trajectories_per_map == 30);
  CHECK(c.window == 5);
  CHECK(c.variants.size() == 2);
  CHECK(c.seeds.size() == 6);
  CHECK(c.planner.sample_budget == 250);
  CHECK(c.sps.batch_size == 32);
  CHECK(c.sps.milestones == std::vector<int>{30, 60, 80, 160});
  CHECK(c.sps.max_epochs == 200);
  CHECK(c.sps.early_stop_patience == 20);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("sections and lists parse") {
  ExperimentConfig c = parse_config(R"(out = results
[dataset]
train_maps = 5, 25
test_maps = 3
budget = 150
master_seed = 42
rollout = uniform
[train]
variants = NOBEL
lrs = 0.0005,0.001
seeds = 7,8,9
max_epochs = 12
widths = reduced
[eval]
conditions = global,hidden,neglected3_visible,aligned2_visible,budget25
aligned = 2
budgets = 25
renders = 1
)");
  CHECK(c.out == "results");
  CHECK(c.train_maps == std::vector<int>{5, 25});
  CHECK(c.test_maps == 3);
  CHECK(c.planner.sample_budget == 150);
  CHECK(c.master_seed == 42);
  CHECK(c.planner.rollout == RolloutPolicy::Uniform);
  CHECK(c.variants == std::vector<Variant>{Variant::NoBel});
  CHECK(c.lrs == std::vector<double>{0.0005, 0.001});
  CHECK(c.seeds == std::vector<std::uint64_t>{7, 8, 9});
  CHECK(c.sps.widths == SpsWidths::reduced());
  CHECK(c.conditions.size() == 5);
  CHECK(c.conditions[3] == EvalCondition::aligned(2, true));
  CHECK(c.renders == 1);

  DatasetSpec test = c.test_spec(2);
  CHECK(test.split == Split::Test);
  CHECK(test.aligned == 2);
  CHECK(c.test_spec(-1, 25).planner.sample_budget == 25);
  SpsConfig run = c.run_config(Variant::NoBel, 0.0005, 8);
  CHECK(run.base_lr == 0.0005);
  CHECK(run.init_seed == 8);
  CHECK(run.max_epochs == 12);
}

TEST_CASE("errors name the offending key") {
  CHECK(key_of("[train]\nvariants = BEL,XYZ\n") == "train.variants");
  CHECK(key_of("[train]\nlrs = 0.01\n") == "train.lrs");
  CHECK(key_of("[train]\nseeds = a\n") == "train.seeds");
  CHECK(key_of("[dataset]\ntrain_maps = 0\n") == "dataset.train_maps");
  CHECK(key_of("[dataset]\ncolour = blue\n") == "dataset.colour");
  CHECK(key_of("[plots]\nx = 1\n") == "plots");
  CHECK(key_of("[eval]\nconditions = aligned2\n") == "eval.conditions");
  CHECK(key_of("[eval]\nconditions = budget25\n") == "eval.conditions");
  CHECK(key_of("[eval]\nconditions = budget25\nbudgets = 25\n") == "<accepted>");
  CHECK(key_of("[eval]\nconditions = sideways\n") == "eval.conditions");
  CHECK(key_of("[eval]\naligned = 4\n") == "eval.aligned");
}

TEST_CASE("canonical form is a fixed point") {
  ExperimentConfig c = parse_config("[train]\nlrs=0.00075\nseeds=3\n[eval]\naligned=1,3\n");
  const std::string canon = c.canonical();
  CHECK(parse_config(canon).canonical() == canon);
  ExperimentConfig other = parse_config("out = elsewhere\n[train]\nlrs=0.00075\nseeds=3\n[eval]\naligned=1,3\n");
  CHECK(other.canonical() == canon);
  CHECK(parse_config("[dataset]\nmaster_seed=2\n").canonical() !=
        parse_config("").canonical());
}
