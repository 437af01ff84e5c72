#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "tomnet/config.hpp"
#include "tomnet/error.hpp"

namespace tomnet {

inline constexpr const char* kToolVersion = "tomnet 0.1.0";

enum class Stage { Gen, Train, Eval, Report };
inline constexpr Stage kStages[] = {Stage::Gen, Stage::Train, Stage::Eval,
                                    Stage::Report};
const char* stage_name(Stage s);

/// A pipeline stage failed; carries the stage name.
class StageError : public Error {
 public:
  StageError(Stage stage, const std::string& cause)
      : Error(std::string("stage ") + stage_name(stage) + " failed: " + cause),
        stage_(stage) {}
  Stage stage() const { return stage_; }

 private:
  Stage stage_;
};

struct StageRecord {
  bool complete = false;
  /// Output-relative path -> SHA-256.
  std::map<std::string, std::string> artifacts;
};

struct RunManifest {
  std::string tool_version = kToolVersion;
  std::string config_hash;
  std::map<std::string, StageRecord> stages;

  std::string to_json() const;
  static RunManifest from_json(const std::string& text);
};

struct PipelineOptions {
  bool resume = false;
  int jobs = 1;
  std::ostream* log = nullptr;
};

/// One training run of the sweep.
struct RunKey {
  int maps = 0;
  Variant variant = Variant::Bel;
  double lr = 0.0;
  std::uint64_t seed = 0;

  /// e.g. "BEL_maps25_lr0.001_seed3"
  std::string name() const;
};

class Pipeline {
 public:
  Pipeline(ExperimentConfig cfg, PipelineOptions opts);

  void gen_maps();
  void gen_data();
  void train();
  void eval();
  void report();
  /// Renders the first `renders` test trajectories into renders/.
  void render();
  /// gen -> train -> eval -> report, skipping verified stages with resume.
  void run();

  const ExperimentConfig& config() const { return cfg_; }
  const RunManifest& manifest() const { return manifest_; }
  std::vector<RunKey> runs() const;

  std::filesystem::path dataset_path(const std::string& name) const;
  std::filesystem::path checkpoint_path(const RunKey& k) const;
  std::filesystem::path report_dir() const { return cfg_.out / "report"; }

 private:
  bool stage_done(Stage s) const;
  void require(Stage s, Stage needed) const;
  void record(Stage s, const std::filesystem::path& artifact);
  /// Marks s as running; later stages stay valid unless s ends with
  /// different artifacts than it had before.
  void begin(Stage s);
  void finish(Stage s);
  void reset_from(Stage s);
  void save_manifest() const;
  void verify_manifest();
  void log(const std::string& line) const;
  std::string test_set_for(const EvalCondition& c) const;
  std::vector<std::string> test_set_names() const;

  ExperimentConfig cfg_;
  PipelineOptions opts_;
  RunManifest manifest_;
  StageRecord before_;
};

}  // namespace tomnet
