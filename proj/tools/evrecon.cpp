// evrecon command line: simulate, reconstruct, baseline-cf, metrics, export-flow.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "evrecon/error.hpp"
#include "evrecon/io.hpp"
#include "evrecon/pipeline.hpp"

namespace fs = std::filesystem;
using namespace evrecon;

namespace {

struct Overrides {
  std::optional<double> beta, lambda_sm, lambda_r, cf_cutoff;
  std::optional<std::size_t> block_size;
  std::optional<std::uint64_t> seed;
  std::string input, output, flow_dir, config;
};

void add_common(CLI::App* app, Overrides& o, bool with_weights) {
  app->add_option("--config", o.config, "JSON config file");
  app->add_option("--seed", o.seed, "random seed");
  app->add_option("--input", o.input, "dataset directory (simulator when omitted)");
  app->add_option("--output", o.output, "output directory");
  if (!with_weights) return;
  app->add_option("--beta", o.beta, "edge sensitivity of the depth smoothness weights");
  app->add_option("--lambda-sm", o.lambda_sm, "depth smoothness weight");
  app->add_option("--lambda-r", o.lambda_r, "pose regularizer weight");
  app->add_option("--block-size", o.block_size, "events per block");
  app->add_option("--cf-cutoff", o.cf_cutoff, "complementary filter cut-off (rad/s)");
}

// Stage label carried with the diagnostic.
struct StageError {
  std::string stage;
  std::string message;
};

template <class F>
auto in_stage(const std::string& stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError{stage, e.what()};
  }
}

PipelineConfig make_config(const Overrides& o) {
  return in_stage("config", [&] {
    PipelineConfig c = o.config.empty() ? PipelineConfig{} : load_config(o.config, false);
    if (o.beta) c.beta = *o.beta;
    if (o.lambda_sm) c.lambda_sm = *o.lambda_sm;
    if (o.lambda_r) c.lambda_r = *o.lambda_r;
    if (o.block_size) c.block_size = *o.block_size;
    if (o.cf_cutoff) c.cf_cutoff = *o.cf_cutoff;
    if (o.seed) c.seed = *o.seed;
    if (!o.input.empty()) c.input = o.input;
    if (!o.output.empty()) c.output = o.output;
    if (!o.flow_dir.empty()) c.flow_dir = o.flow_dir;
    c.validate();
    return c;
  });
}

void require_output(const PipelineConfig& c) {
  if (c.output.empty()) throw StageError{"config", "invalid output: an output directory is required"};
}

SimulatorConfig simulator_of(const PipelineConfig& c) {
  SimulatorConfig s = c.simulator.value_or(SimulatorConfig{});
  s.seed = c.seed;
  return s;
}

void print_summary(const PipelineResult& r, const fs::path& out) {
  std::printf("%zu frames written to %s\n", r.frames.size(), out.string().c_str());
  if (!r.metrics.empty()) std::printf("mean PSNR %.3f dB over %zu frames\n", mean_psnr(r.metrics), r.metrics.size());
}

int run_reconstruct(const Overrides& o, bool baseline) {
  const PipelineConfig c = make_config(o);
  require_output(c);
  const SequenceInput input = in_stage("input", [&] { return load_input(c); });
  const PipelineResult r =
      in_stage(baseline ? "baseline-cf" : "reconstruct", [&] { return baseline ? baseline_cf(input, c) : reconstruct(input, c); });
  for (const auto& line : r.log)
    if (line.find("diverg") != std::string::npos || line.find("fallback") != std::string::npos)
      std::fprintf(stderr, "%s\n", line.c_str());
  in_stage("output", [&] { write_outputs(c.output, r, c); });
  print_summary(r, c.output);
  return 0;
}

int run_simulate(const Overrides& o) {
  const PipelineConfig c = make_config(o);
  require_output(c);
  const SimulatorConfig s = simulator_of(c);
  const SimulatedSequence seq = in_stage("simulate", [&] { return simulate(s); });
  in_stage("output", [&] { save_simulation(c.output, seq); });
  std::printf("%zu frames, %zu events written to %s\n", seq.frames.size(), seq.events.size(),
              c.output.string().c_str());
  return 0;
}

int run_metrics(const Overrides& o, const std::string& run_dir, const std::string& method, const std::string& csv) {
  const PipelineConfig c = make_config(o);
  const SequenceInput input = in_stage("input", [&] { return load_input(c); });
  if (!input.truth) throw StageError{"metrics", "ground truth requires a simulator config (no --input)"};
  const auto rows = in_stage("metrics", [&] { return score_directory(run_dir, *input.truth, method); });
  const fs::path target = csv.empty() ? fs::path(run_dir) / "metrics.csv" : fs::path(csv);
  in_stage("output", [&] { write_metrics_csv(target, rows); });
  std::printf("mean PSNR %.3f dB over %zu frames -> %s\n", mean_psnr(rows), rows.size(), target.string().c_str());
  return 0;
}

int run_export_flow(const Overrides& o) {
  const PipelineConfig c = make_config(o);
  require_output(c);
  const SequenceInput input = in_stage("input", [&] { return load_input(c); });
  in_stage("flow", [&] {
    fs::create_directories(c.output);
    char name[64];
    for (std::size_t k = 0; k + 1 < input.frames.size(); ++k) {
      const auto& a = input.frames[k].pixels();
      const auto& b = input.frames[k + 1].pixels();
      std::snprintf(name, sizeof name, "flow_%08zu_fw.flo", k);
      export_flow(c.output / name, estimate_flow(a, b, c.flow));
      std::snprintf(name, sizeof name, "flow_%08zu_bw.flo", k);
      export_flow(c.output / name, estimate_flow(b, a, c.flow));
    }
  });
  std::printf("%zu flow pairs written to %s\n", input.frames.size() - 1, c.output.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Event-aided frame interpolation with depth and ego-motion"};
  app.require_subcommand(1);

  Overrides sim_o, rec_o, cf_o, met_o, flow_o;
  auto* sim = app.add_subcommand("simulate", "render a synthetic dataset with ground truth");
  add_common(sim, sim_o, false);
  auto* rec = app.add_subcommand("reconstruct", "run the depth/pose/render pipeline");
  add_common(rec, rec_o, true);
  rec->add_option("--flow-dir", rec_o.flow_dir, "precomputed flow_%08d_{fw,bw}.flo files");
  auto* cf = app.add_subcommand("baseline-cf", "complementary filter baseline at the same timestamps");
  add_common(cf, cf_o, true);
  auto* met = app.add_subcommand("metrics", "score an output directory against simulator ground truth");
  add_common(met, met_o, false);
  std::string run_dir, method = "pipeline", csv;
  met->add_option("--run", run_dir, "output directory to score")->required();
  met->add_option("--method", method, "method label for the CSV");
  met->add_option("--csv", csv, "CSV path (default <run>/metrics.csv)");
  auto* flow = app.add_subcommand("export-flow", "write forward/backward flow per frame pair");
  add_common(flow, flow_o, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) return run_simulate(sim_o);
    if (*rec) return run_reconstruct(rec_o, false);
    if (*cf) return run_reconstruct(cf_o, true);
    if (*met) return run_metrics(met_o, run_dir, method, csv);
    if (*flow) return run_export_flow(flow_o);
  } catch (const StageError& e) {
    std::fprintf(stderr, "evrecon: %s stage failed: %s\n", e.stage.c_str(), e.message.c_str());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "evrecon: %s\n", e.what());
    return 1;
  }
  return 1;
}
