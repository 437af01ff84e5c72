#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>
#include <optional>

#include "tomnet/binio.hpp"
#include "tomnet/error.hpp"
#include "tomnet/kernels.hpp"
#include "tomnet/pipeline.hpp"
#include "tomnet/render.hpp"

namespace {

struct Options {
  std::string config;
  int jobs = 1;
  bool resume = false;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  // render
  std::string dataset;
  int trajectory = 0;
  int step = -1;
};

tomnet::ExperimentConfig resolve(const Options& o) {
  if (o.config.empty()) throw tomnet::ConfigError("--config", "--config is required");
  tomnet::ExperimentConfig cfg = tomnet::load_config(o.config);
  if (o.seed) cfg.master_seed = *o.seed;
  if (const char* env = std::getenv("TOMNET_OUT"); env && *env) cfg.out = env;
  if (o.out) cfg.out = *o.out;
  return cfg;
}

int render_dataset(const Options& o) {
  const tomnet::Dataset d = tomnet::load_dataset(o.dataset);
  if (o.trajectory < 0 || o.trajectory >= static_cast<int>(d.trajectories.size())) {
    throw tomnet::Error("trajectory index out of range");
  }
  const tomnet::Trajectory& t = d.trajectories[o.trajectory];
  std::cout << tomnet::render_trajectory(d.map_for(t), t, o.step);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  tomnet::nn::tune_allocator();
  CLI::App app{"Belief-attribution experiments on simulated gridworld actors"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--config", o.config, "experiment config (INI)");
  app.add_option("--jobs", o.jobs, "parallel runs")->check(CLI::PositiveNumber);
  app.add_flag("--resume", o.resume, "skip stages verified in the manifest");
  app.add_option("--seed", o.seed, "master seed override");
  app.add_option("--out", o.out, "output directory");

  auto* gen_maps = app.add_subcommand("gen-maps", "write the train and test maps");
  auto* gen_data = app.add_subcommand("gen-data", "simulate the actor and write datasets");
  auto* train = app.add_subcommand("train", "train every configured run");
  auto* eval = app.add_subcommand("eval", "evaluate checkpoints under all conditions");
  auto* report = app.add_subcommand("report", "write CSV and Markdown tables");
  auto* render = app.add_subcommand("render", "ASCII renders of test trajectories");
  render->add_option("--dataset", o.dataset, "render one trajectory of this dataset to stdout");
  render->add_option("--trajectory", o.trajectory, "trajectory index");
  render->add_option("--step", o.step, "step to show (default: last)");
  auto* run = app.add_subcommand("run", "gen -> train -> eval -> report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (render->parsed() && !o.dataset.empty()) return render_dataset(o);
    tomnet::PipelineOptions popts;
    popts.resume = o.resume;
    popts.jobs = o.jobs;
    popts.log = &std::cerr;
    tomnet::Pipeline p(resolve(o), popts);
    if (gen_maps->parsed()) p.gen_maps();
    else if (gen_data->parsed()) p.gen_data();
    else if (train->parsed()) p.train();
    else if (eval->parsed()) p.eval();
    else if (report->parsed()) p.report();
    else if (render->parsed()) p.render();
    else if (run->parsed()) p.run();
  } catch (const tomnet::ConfigError& e) {
    std::cerr << "config error";
    if (!e.key().empty()) std::cerr << " [" << e.key() << "]";
    std::cerr << ": " << e.what() << "\n";
    return 2;
  } catch (const tomnet::StageError& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
