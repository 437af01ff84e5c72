#include "tomnet/pipeline.hpp"

#include <omp.h>

#include <atomic>
#include <charconv>
#include <exception>
#include <fstream>
#include <mutex>
#include <json.hpp>
#include <set>
#include <sstream>
#include <thread>

#include "tomnet/binio.hpp"
#include "tomnet/error.hpp"
#include "tomnet/render.hpp"

namespace tomnet {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string shortest(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, p);
}

/// Runs body(i) for i in [0, n) on up to `jobs` threads. The first failure
/// by index is rethrown after all workers finish.
template <typename F>
void parallel_for(std::size_t n, int jobs, F&& body) {
  const std::size_t workers =
      std::min<std::size_t>(n, static_cast<std::size_t>(std::max(jobs, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      // Runs already proceed in parallel; keep each one single-threaded.
      omp_set_num_threads(1);
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::string curves_csv(const TrainingCurves& c) {
  std::ostringstream os;
  os << "epoch,lr,train_total,train_target,train_action,train_state,"
        "train_belief,val_total,val_target,val_action,val_state,val_belief,"
        "best\n";
  for (const EpochRecord& e : c.epochs) {
    os << e.epoch << ',' << shortest(e.lr);
    for (const LossComponents* l : {&e.train, &e.validation}) {
      os << ',' << shortest(l->total) << ',' << shortest(l->target) << ','
         << shortest(l->action) << ',' << shortest(l->state) << ','
         << shortest(l->belief);
    }
    os << ',' << (e.epoch == c.best_epoch ? 1 : 0) << '\n';
  }
  return os.str();
}

}  // namespace

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::Gen: return "gen";
    case Stage::Train: return "train";
    case Stage::Eval: return "eval";
    case Stage::Report: return "report";
  }
  return "?";
}

std::string RunManifest::to_json() const {
  json j;
  j["tool_version"] = tool_version;
  j["config_hash"] = config_hash;
  j["stages"] = json::object();
  for (Stage s : kStages) {
    auto it = stages.find(stage_name(s));
    StageRecord r = it == stages.end() ? StageRecord{} : it->second;
    j["stages"][stage_name(s)] = {{"complete", r.complete},
                                  {"artifacts", r.artifacts}};
  }
  return j.dump(2) + "\n";
}

RunManifest RunManifest::from_json(const std::string& text) {
  RunManifest m;
  try {
    const json j = json::parse(text);
    m.tool_version = j.at("tool_version").get<std::string>();
    m.config_hash = j.at("config_hash").get<std::string>();
    for (const auto& [name, rec] : j.at("stages").items()) {
      StageRecord r;
      r.complete = rec.at("complete").get<bool>();
      r.artifacts = rec.at("artifacts").get<std::map<std::string, std::string>>();
      m.stages[name] = std::move(r);
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

std::string RunKey::name() const {
  return std::string(variant_name(variant)) + "_maps" + std::to_string(maps) +
         "_lr" + shortest(lr) + "_seed" + std::to_string(seed);
}

Pipeline::Pipeline(ExperimentConfig cfg, PipelineOptions opts)
    : cfg_(std::move(cfg)), opts_(opts) {
  cfg_.validate();
  const std::string canon = cfg_.canonical();
  manifest_.config_hash = sha256_hex(std::span(
      reinterpret_cast<const std::uint8_t*>(canon.data()), canon.size()));
  const fs::path mpath = cfg_.out / "manifest.json";
  if (fs::exists(mpath)) {
    const auto bytes = read_file(mpath);
    RunManifest old;
    try {
      old = RunManifest::from_json(std::string(bytes.begin(), bytes.end()));
    } catch (const FormatError& e) {
      log(std::string("ignoring manifest: ") + e.what());
    }
    if (old.config_hash == manifest_.config_hash &&
        old.tool_version == manifest_.tool_version) {
      manifest_.stages = std::move(old.stages);
      verify_manifest();
    } else if (!old.config_hash.empty()) {
      log("config changed since the last run; starting fresh");
    }
  }
}

void Pipeline::log(const std::string& line) const {
  if (opts_.log) *opts_.log << line << std::endl;
}

void Pipeline::verify_manifest() {
  for (Stage s : kStages) {
    auto it = manifest_.stages.find(stage_name(s));
    if (it == manifest_.stages.end()) continue;
    StageRecord& r = it->second;
    bool intact = true;
    for (auto a = r.artifacts.begin(); a != r.artifacts.end();) {
      const fs::path p = cfg_.out / a->first;
      if (!fs::exists(p) || sha256_file(p) != a->second) {
        log(std::string("artifact changed on disk: ") + a->first);
        intact = false;
        a = r.artifacts.erase(a);
      } else {
        ++a;
      }
    }
    if (r.complete && !intact) {
      reset_from(s);
      break;
    }
  }
}

bool Pipeline::stage_done(Stage s) const {
  auto it = manifest_.stages.find(stage_name(s));
  return it != manifest_.stages.end() && it->second.complete;
}

void Pipeline::require(Stage s, Stage needed) const {
  if (!stage_done(needed)) {
    throw StageError(s, std::string("stage ") + stage_name(needed) +
                            " has not completed");
  }
}

void Pipeline::record(Stage s, const fs::path& artifact) {
  const std::string rel = fs::relative(artifact, cfg_.out).generic_string();
  manifest_.stages[stage_name(s)].artifacts[rel] = sha256_file(artifact);
}

void Pipeline::begin(Stage s) {
  StageRecord& r = manifest_.stages[stage_name(s)];
  before_ = r;
  r.complete = false;
}

void Pipeline::finish(Stage s) {
  StageRecord& r = manifest_.stages[stage_name(s)];
  if (!before_.complete || before_.artifacts != r.artifacts) {
    reset_from(s);
  }
  r.complete = true;
  save_manifest();
  log(std::string("stage ") + stage_name(s) + " complete");
}

void Pipeline::reset_from(Stage s) {
  bool later = false;
  for (Stage t : kStages) {
    if (t == s) later = true;
    if (!later) continue;
    auto it = manifest_.stages.find(stage_name(t));
    if (it == manifest_.stages.end()) continue;
    it->second.complete = false;
    if (t != s) it->second.artifacts.clear();
  }
}

void Pipeline::save_manifest() const {
  write_text_atomic(cfg_.out / "manifest.json", manifest_.to_json());
}

fs::path Pipeline::dataset_path(const std::string& name) const {
  return cfg_.out / "data" / (name + ".tomg");
}

fs::path Pipeline::checkpoint_path(const RunKey& k) const {
  return cfg_.out / "runs" / (k.name() + ".sps");
}

std::vector<RunKey> Pipeline::runs() const {
  std::vector<RunKey> out;
  for (int maps : cfg_.train_maps) {
    for (Variant v : cfg_.variants) {
      for (double lr : cfg_.lrs) {
        for (std::uint64_t seed : cfg_.seeds) out.push_back({maps, v, lr, seed});
      }
    }
  }
  return out;
}

std::vector<std::string> Pipeline::test_set_names() const {
  std::vector<std::string> names = {"test"};
  for (int k : cfg_.aligned) names.push_back("test_aligned" + std::to_string(k));
  for (int b : cfg_.budgets) {
    if (b != cfg_.planner.sample_budget) {
      names.push_back("test_budget" + std::to_string(b));
    }
  }
  return names;
}

std::string Pipeline::test_set_for(const EvalCondition& c) const {
  if (c.kind == ConditionKind::Aligned) return "test_aligned" + std::to_string(c.n);
  if (c.kind == ConditionKind::Budget && c.n != cfg_.planner.sample_budget) {
    return "test_budget" + std::to_string(c.n);
  }
  return "test";
}

void Pipeline::gen_maps() {
  try {
    const int n_train = *std::max_element(cfg_.train_maps.begin(), cfg_.train_maps.end());
    const DatasetSpec train = cfg_.train_spec(n_train);
    const DatasetSpec test = cfg_.test_spec();
    for (const DatasetSpec* spec : {&train, &test}) {
      for (int i = 0; i < spec->map_count(); ++i) {
        const GridMap map = dataset_map(*spec, i);
        const fs::path p = cfg_.out / "maps" / ("map_" + std::to_string(map.id()) + ".txt");
        write_text_atomic(p, map.to_text());
        record(Stage::Gen, p);
      }
    }
    save_manifest();
    log("maps written");
  } catch (const ConfigError&) {
    throw;
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(Stage::Gen, e.what());
  }
}

void Pipeline::gen_data() {
  begin(Stage::Gen);
  gen_maps();
  try {
    struct Job {
      std::string name;
      DatasetSpec spec;
    };
    std::vector<Job> jobs;
    for (int maps : cfg_.train_maps) {
      jobs.push_back({"train_" + std::to_string(maps), cfg_.train_spec(maps)});
    }
    jobs.push_back({"test", cfg_.test_spec()});
    for (int k : cfg_.aligned) {
      jobs.push_back({"test_aligned" + std::to_string(k), cfg_.test_spec(k)});
    }
    for (int b : cfg_.budgets) {
      if (b == cfg_.planner.sample_budget) continue;
      jobs.push_back({"test_budget" + std::to_string(b), cfg_.test_spec(-1, b)});
    }
    parallel_for(jobs.size(), opts_.jobs, [&](std::size_t i) {
      const Dataset d = build_dataset(jobs[i].spec);
      save_dataset(d, dataset_path(jobs[i].name));
    });
    for (const Job& j : jobs) {
      const fs::path p = dataset_path(j.name);
      record(Stage::Gen, p);
      record(Stage::Gen, fs::path(p.string() + ".txt"));
      log("dataset " + j.name + " written");
    }
  } catch (const std::exception& e) {
    throw StageError(Stage::Gen, e.what());
  }
  finish(Stage::Gen);
}

void Pipeline::train() {
  require(Stage::Train, Stage::Gen);
  begin(Stage::Train);
  StageRecord& rec = manifest_.stages[stage_name(Stage::Train)];
  if (!opts_.resume) rec.artifacts.clear();
  try {
    std::map<int, Dataset> data;
    for (int maps : cfg_.train_maps) {
      data.emplace(maps, load_dataset(dataset_path("train_" + std::to_string(maps))));
    }
    std::vector<RunKey> todo;
    for (const RunKey& k : runs()) {
      const std::string rel =
          fs::relative(checkpoint_path(k), cfg_.out).generic_string();
      if (opts_.resume && rec.artifacts.contains(rel)) {
        log("run " + k.name() + " already trained");
        continue;
      }
      todo.push_back(k);
    }
    std::mutex mu;
    parallel_for(todo.size(), opts_.jobs, [&](std::size_t i) {
      const RunKey& k = todo[i];
      const TrainResult r =
          tomnet::train(data.at(k.maps), cfg_.run_config(k.variant, k.lr, k.seed));
      const fs::path ck = checkpoint_path(k);
      const fs::path curves = cfg_.out / "runs" / (k.name() + ".curves.csv");
      write_text_atomic(curves, curves_csv(r.curves));
      save_checkpoint(ck, r.model, r.adam);
      std::lock_guard lock(mu);
      record(Stage::Train, curves);
      record(Stage::Train, ck);
      save_manifest();
      log("run " + k.name() + " trained: " + std::to_string(r.curves.epochs.size()) +
          " epochs, best " + std::to_string(r.curves.best_epoch));
    });
  } catch (const std::exception& e) {
    save_manifest();
    throw StageError(Stage::Train, e.what());
  }
  finish(Stage::Train);
}

void Pipeline::eval() {
  require(Stage::Eval, Stage::Train);
  begin(Stage::Eval);
  manifest_.stages[stage_name(Stage::Eval)].artifacts.clear();
  try {
    std::vector<EvalCondition> conds = cfg_.conditions;
    for (int k : cfg_.aligned) {
      conds.push_back(EvalCondition::aligned(k, true));
      conds.push_back(EvalCondition::aligned(k, false));
    }
    for (int b : cfg_.budgets) conds.push_back(EvalCondition::budget(b));
    // Drop duplicates, keeping the first occurrence.
    std::vector<EvalCondition> unique;
    for (const EvalCondition& c : conds) {
      if (std::find(unique.begin(), unique.end(), c) == unique.end()) unique.push_back(c);
    }

    std::map<std::string, Dataset> sets;
    for (const EvalCondition& c : unique) {
      const std::string name = test_set_for(c);
      if (!sets.contains(name)) sets.emplace(name, load_dataset(dataset_path(name)));
    }

    const std::vector<RunKey> keys = runs();
    std::vector<std::vector<SweepRecord>> results(keys.size());
    parallel_for(keys.size(), opts_.jobs, [&](std::size_t i) {
      const RunKey& k = keys[i];
      const Checkpoint ck = load_checkpoint(checkpoint_path(k));
      std::map<std::string, std::vector<int>> preds;
      for (const EvalCondition& c : unique) {
        const std::string name = test_set_for(c);
        const Dataset& d = sets.at(name);
        auto it = preds.find(name);
        if (it == preds.end()) {
          it = preds.emplace(name, predict_targets(ck.model, d.samples)).first;
        }
        results[i].push_back({c.label(), k.maps, k.variant, k.lr, k.seed,
                              accuracy(d.samples, it->second, c)});
      }
    });
    std::vector<SweepRecord> all;
    for (auto& r : results) all.insert(all.end(), r.begin(), r.end());
    const fs::path p = cfg_.out / "eval" / "sweep.csv";
    write_text_atomic(p, sweep_csv(all));
    record(Stage::Eval, p);
  } catch (const std::exception& e) {
    throw StageError(Stage::Eval, e.what());
  }
  finish(Stage::Eval);
}

void Pipeline::render() {
  try {
    const Dataset test = load_dataset(dataset_path("test"));
    const int n = std::min<int>(cfg_.renders, static_cast<int>(test.trajectories.size()));
    for (int i = 0; i < n; ++i) {
      const Trajectory& t = test.trajectories[i];
      const fs::path p = cfg_.out / "renders" / ("test_" + std::to_string(i) + ".txt");
      write_text_atomic(p, render_trajectory(test.map_for(t), t));
      record(Stage::Report, p);
    }
  } catch (const std::exception& e) {
    throw StageError(Stage::Report, e.what());
  }
}

void Pipeline::report() {
  require(Stage::Report, Stage::Eval);
  begin(Stage::Report);
  manifest_.stages[stage_name(Stage::Report)].artifacts.clear();
  try {
    const auto bytes = read_file(cfg_.out / "eval" / "sweep.csv");
    const auto records = parse_sweep_csv(std::string(bytes.begin(), bytes.end()));
    const EvalReport rep = build_report(records);
    const fs::path csv = report_dir() / "report.csv";
    const fs::path md = report_dir() / "report.md";
    write_text_atomic(csv, report_csv(rep));
    write_text_atomic(md, report_markdown(rep));
    record(Stage::Report, csv);
    record(Stage::Report, md);
  } catch (const std::exception& e) {
    throw StageError(Stage::Report, e.what());
  }
  render();
  finish(Stage::Report);
}

void Pipeline::run() {
  if (!opts_.resume) {
    reset_from(Stage::Gen);
    for (auto& [name, rec] : manifest_.stages) rec.artifacts.clear();
  }
  for (Stage s : kStages) {
    if (opts_.resume && stage_done(s)) {
      log(std::string("stage ") + stage_name(s) + " verified, skipping");
      continue;
    }
    switch (s) {
      case Stage::Gen: gen_data(); break;
      case Stage::Train: train(); break;
      case Stage::Eval: eval(); break;
      case Stage::Report: report(); break;
    }
  }
}

}  // namespace tomnet
