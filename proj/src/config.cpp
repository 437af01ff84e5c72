#include "tomnet/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "tomnet/error.hpp"

namespace tomnet {

namespace {

namespace pt = boost::property_tree;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T number(const std::string& key, const std::string& text) {
  T v{};
  const std::string s = trim(text);
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || p != s.data() + s.size()) {
    throw ConfigError(key, key + ": cannot parse '" + s + "'");
  }
  return v;
}

template <typename T>
std::vector<T> number_list(const std::string& key, const std::string& text,
                           bool allow_empty = false) {
  std::vector<T> out;
  for (const std::string& item : split_list(text)) out.push_back(number<T>(key, item));
  if (out.empty() && !allow_empty) throw ConfigError(key, key + ": empty list");
  return out;
}

std::string join_doubles(const std::vector<double>& v) {
  std::string s;
  for (double x : v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
    (void)ec;
    if (!s.empty()) s += ',';
    s.append(buf, p);
  }
  return s;
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::string s;
  for (const T& x : v) {
    if (!s.empty()) s += ',';
    s += std::to_string(x);
  }
  return s;
}

std::string real(double x) { return join_doubles({x}); }

}  // namespace

std::vector<EvalCondition> ExperimentConfig::default_conditions() {
  std::vector<EvalCondition> c = {EvalCondition::global(), EvalCondition::hidden(),
                                  EvalCondition::visible()};
  for (bool vis : {true, false}) {
    for (int n = 3; n >= 1; --n) c.push_back(EvalCondition::neglected(n, vis));
  }
  return c;
}

DatasetSpec ExperimentConfig::train_spec(int maps) const {
  DatasetSpec s;
  s.split = Split::Train;
  s.n_train_maps = maps;
  s.n_test_maps = test_maps;
  s.trajectories_per_map = trajectories_per_map;
  s.window = window;
  s.planner = planner;
  s.mapgen = mapgen;
  s.master_seed = master_seed;
  return s;
}

DatasetSpec ExperimentConfig::test_spec(int aligned_k, int budget) const {
  DatasetSpec s = train_spec(*std::max_element(train_maps.begin(), train_maps.end()));
  s.split = Split::Test;
  s.aligned = aligned_k;
  if (budget > 0) s.planner.sample_budget = budget;
  return s;
}

SpsConfig ExperimentConfig::run_config(Variant v, double lr,
                                       std::uint64_t seed) const {
  SpsConfig c = sps;
  c.variant = v;
  c.base_lr = lr;
  c.init_seed = seed;
  return c;
}

void ExperimentConfig::validate() const {
  for (int m : train_maps) {
    if (m < 1 || m > 300) {
      throw ConfigError("dataset.train_maps", "map counts must lie in [1, 300]");
    }
  }
  if (test_maps < 1) throw ConfigError("dataset.test_maps", "test_maps must be positive");
  if (trajectories_per_map < 1) {
    throw ConfigError("dataset.trajectories_per_map", "must be positive");
  }
  if (window < 0 || window > 5) throw ConfigError("dataset.window", "window must lie in [0, 5]");
  try {
    planner.validate();
  } catch (const Error& e) {
    throw ConfigError("dataset.budget", e.what());
  }
  if (mapgen.wall_density < 0 || mapgen.wall_density > 0.35) {
    throw ConfigError("dataset.wall_density", "wall density must lie in [0, 0.35]");
  }
  if (mapgen.columns < 0 || mapgen.columns > 8) {
    throw ConfigError("dataset.columns", "columns must lie in [0, 8]");
  }
  if (variants.empty()) throw ConfigError("train.variants", "no variants");
  for (double lr : lrs) {
    SpsConfig c = sps;
    c.base_lr = lr;
    c.validate();
  }
  sps.validate();
  if (seeds.empty()) throw ConfigError("train.seeds", "no seeds");
  for (int k : aligned) {
    if (k < 1 || k > kNumDistractors) {
      throw ConfigError("eval.aligned", "aligned counts must lie in [1, 3]");
    }
  }
  for (int b : budgets) {
    if (b < 1) throw ConfigError("eval.budgets", "budgets must be positive");
  }
  for (const EvalCondition& c : conditions) {
    if (c.kind == ConditionKind::Aligned &&
        std::find(aligned.begin(), aligned.end(), c.n) == aligned.end()) {
      throw ConfigError("eval.conditions", "condition " + c.label() +
                                               " needs " + std::to_string(c.n) +
                                               " in eval.aligned");
    }
    if (c.kind == ConditionKind::Budget && c.n != planner.sample_budget &&
        std::find(budgets.begin(), budgets.end(), c.n) == budgets.end()) {
      throw ConfigError("eval.conditions", "condition " + c.label() +
                                               " needs " + std::to_string(c.n) +
                                               " in eval.budgets");
    }
  }
  if (renders < 0) throw ConfigError("eval.renders", "renders must be >= 0");
}

std::string ExperimentConfig::canonical() const {
  std::ostringstream os;
  os << "[dataset]\n"
     << "train_maps = " << join(train_maps) << "\n"
     << "test_maps = " << test_maps << "\n"
     << "trajectories_per_map = " << trajectories_per_map << "\n"
     << "window = " << window << "\n"
     << "master_seed = " << master_seed << "\n"
     << "wall_density = " << real(mapgen.wall_density) << "\n"
     << "columns = " << mapgen.columns << "\n"
     << "budget = " << planner.sample_budget << "\n"
     << "ucb_c = " << real(planner.ucb_constant) << "\n"
     << "discount = " << real(planner.discount) << "\n"
     << "rollout_depth = " << planner.rollout_depth << "\n"
     << "step_reward = " << real(planner.step_reward) << "\n"
     << "goal_reward = " << real(planner.goal_reward) << "\n"
     << "max_episode_steps = " << planner.max_episode_steps << "\n"
     << "planner_seed = " << planner.seed << "\n"
     << "rollout = "
     << (planner.rollout == RolloutPolicy::Uniform ? "uniform" : "shortest_path")
     << "\n[train]\nvariants = ";
  for (std::size_t i = 0; i < variants.size(); ++i) {
    os << (i ? "," : "") << variant_name(variants[i]);
  }
  os << "\nlrs = " << join_doubles(lrs) << "\n"
     << "seeds = " << join(seeds) << "\n"
     << "batch_size = " << sps.batch_size << "\n"
     << "l1 = " << real(sps.l1) << "\n"
     << "l2 = " << real(sps.l2) << "\n"
     << "milestones = " << join(sps.milestones) << "\n"
     << "lr_gamma = " << real(sps.lr_gamma) << "\n"
     << "max_epochs = " << sps.max_epochs << "\n"
     << "patience = " << sps.early_stop_patience << "\n"
     << "validation_fraction = " << real(sps.validation_fraction) << "\n"
     << "widths = " << (sps.widths == SpsWidths::reduced() ? "reduced" : "full")
     << "\n[eval]\nconditions = ";
  for (std::size_t i = 0; i < conditions.size(); ++i) {
    os << (i ? "," : "") << conditions[i].label();
  }
  os << "\naligned = " << join(aligned) << "\n"
     << "budgets = " << join(budgets) << "\n"
     << "renders = " << renders << "\n";
  return os.str();
}

ExperimentConfig parse_config(std::string_view text) {
  pt::ptree tree;
  std::istringstream is{std::string(text)};
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("", std::string("malformed config: ") + e.message() +
                              " at line " + std::to_string(e.line()));
  }

  ExperimentConfig c;
  const std::set<std::string> sections = {"dataset", "train", "eval"};
  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      if (name == "out") {
        c.out = trim(node.data());
        continue;
      }
      throw ConfigError(name, "unknown top-level key '" + name + "'");
    }
    if (!sections.contains(name)) {
      throw ConfigError(name, "unknown section [" + name + "]");
    }
    for (const auto& [k, v] : node) {
      const std::string key = name + "." + k;
      const std::string val = trim(v.data());
      if (name == "dataset") {
        if (k == "train_maps") c.train_maps = number_list<int>(key, val);
        else if (k == "test_maps") c.test_maps = number<int>(key, val);
        else if (k == "trajectories_per_map") c.trajectories_per_map = number<int>(key, val);
        else if (k == "window") c.window = number<int>(key, val);
        else if (k == "master_seed") c.master_seed = number<std::uint64_t>(key, val);
        else if (k == "wall_density") c.mapgen.wall_density = number<double>(key, val);
        else if (k == "columns") c.mapgen.columns = number<int>(key, val);
        else if (k == "budget") c.planner.sample_budget = number<int>(key, val);
        else if (k == "ucb_c") c.planner.ucb_constant = number<double>(key, val);
        else if (k == "discount") c.planner.discount = number<double>(key, val);
        else if (k == "rollout_depth") c.planner.rollout_depth = number<int>(key, val);
        else if (k == "step_reward") c.planner.step_reward = number<double>(key, val);
        else if (k == "goal_reward") c.planner.goal_reward = number<double>(key, val);
        else if (k == "max_episode_steps") c.planner.max_episode_steps = number<int>(key, val);
        else if (k == "planner_seed") c.planner.seed = number<std::uint64_t>(key, val);
        else if (k == "rollout") {
          if (val == "uniform") c.planner.rollout = RolloutPolicy::Uniform;
          else if (val == "shortest_path") c.planner.rollout = RolloutPolicy::ShortestPath;
          else throw ConfigError(key, key + ": unknown rollout policy '" + val + "'");
        } else {
          throw ConfigError(key, "unknown key '" + key + "'");
        }
      } else if (name == "train") {
        if (k == "variants") {
          c.variants.clear();
          for (const std::string& item : split_list(val)) {
            auto variant = parse_variant(item);
            if (!variant) {
              throw ConfigError(key, key + ": unknown variant '" + item +
                                         "' (expected BEL or NOBEL)");
            }
            c.variants.push_back(*variant);
          }
          if (c.variants.empty()) throw ConfigError(key, key + ": empty list");
        } else if (k == "lrs") {
          c.lrs = number_list<double>(key, val);
          for (double lr : c.lrs) {
            if (!(lr >= kMinLearningRate * (1 - 1e-12) &&
                  lr <= kMaxLearningRate * (1 + 1e-12))) {
              throw ConfigError(key, key + ": learning rate outside [0.00015, 0.001]");
            }
          }
        } else if (k == "seeds") {
          c.seeds = number_list<std::uint64_t>(key, val);
        } else if (k == "batch_size") {
          c.sps.batch_size = number<int>(key, val);
        } else if (k == "l1") {
          c.sps.l1 = number<double>(key, val);
        } else if (k == "l2") {
          c.sps.l2 = number<double>(key, val);
        } else if (k == "milestones") {
          c.sps.milestones = number_list<int>(key, val);
        } else if (k == "lr_gamma") {
          c.sps.lr_gamma = number<double>(key, val);
        } else if (k == "max_epochs") {
          c.sps.max_epochs = number<int>(key, val);
        } else if (k == "patience") {
          c.sps.early_stop_patience = number<int>(key, val);
        } else if (k == "validation_fraction") {
          c.sps.validation_fraction = number<double>(key, val);
        } else if (k == "widths") {
          if (val == "full") c.sps.widths = SpsWidths{};
          else if (val == "reduced") c.sps.widths = SpsWidths::reduced();
          else throw ConfigError(key, key + ": expected full or reduced");
        } else {
          throw ConfigError(key, "unknown key '" + key + "'");
        }
      } else {
        if (k == "conditions") {
          c.conditions.clear();
          for (const std::string& item : split_list(val)) {
            try {
              c.conditions.push_back(EvalCondition::parse(item));
            } catch (const ConfigError&) {
              throw;
            } catch (const Error& e) {
              throw ConfigError(key, key + ": " + e.what());
            }
          }
        } else if (k == "aligned") {
          c.aligned = number_list<int>(key, val, true);
        } else if (k == "budgets") {
          c.budgets = number_list<int>(key, val, true);
        } else if (k == "renders") {
          c.renders = number<int>(key, val);
        } else {
          throw ConfigError(key, "unknown key '" + key + "'");
        }
      }
    }
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("", "cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace tomnet
