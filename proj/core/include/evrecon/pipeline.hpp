#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "evrecon/depth_opt.hpp"
#include "evrecon/events.hpp"
#include "evrecon/flow.hpp"
#include "evrecon/metrics.hpp"
#include "evrecon/pose_opt.hpp"
#include "evrecon/renderer.hpp"
#include "evrecon/sim.hpp"

namespace evrecon {

struct PipelineConfig {
  double beta = 10.0;
  double lambda_sm = 1.0;
  double lambda_r = 0.01;
  std::size_t block_size = kDefaultBlockSize;
  double cf_cutoff = kDefaultCfCutoff;
  double cf_contrast = 0.1;
  std::uint64_t seed = 7;

  PseudoIntensitySettings pseudo{};
  // Leaky-chained blocks integrated ahead of every pseudo-intensity frame.
  int pseudo_warmup_blocks = 20;
  FlowSettings flow{};
  RefineSettings refine{};
  bool refine_depth = true;
  DepthStageSettings depth{};
  PoseStageSettings pose{};
  double splat_gamma = kDefaultSplatGamma;
  std::string alpha_policy = "linear";
  // Initialize each block from the previous block's poses.
  bool warm_start = true;

  std::filesystem::path input;     // dataset directory
  std::filesystem::path output;
  std::filesystem::path flow_dir;  // optional precomputed flow_%08d_{fw,bw}.flo
  std::optional<SimulatorConfig> simulator;  // used when input is empty

  // Throws ValidationError naming the offending field.
  void validate() const;
  // Stage settings with the top-level weights applied.
  DepthStageSettings depth_settings() const;
  PoseStageSettings pose_settings() const;
};

// JSON config; unknown keys and bad values throw ValidationError. Pass
// validate = false to defer the cross-field checks (e.g. until CLI overrides are applied).
PipelineConfig parse_config(const std::string& json_text, bool validate = true);
PipelineConfig load_config(const std::filesystem::path& path, bool validate = true);
std::string dump_config(const PipelineConfig& config);

struct SequenceInput {
  CameraIntrinsics camera;
  std::vector<IntensityFrame> frames;
  EventStream events;
  std::optional<SimulatedSequence> truth;  // present for simulator runs
  std::vector<std::string> notes;
};

// Throws ValidationError when the config names neither a dataset nor a simulator.
SequenceInput load_input(const PipelineConfig& config);

/// Blocks of one frame-pair window, with the two anchor blocks centred on the frames.
struct WindowBlocks {
  int window = 0;
  double t_k = 0.0;
  double t_k1 = 0.0;
  std::vector<EventBlock> blocks;
  bool short_window = false;
  std::span<const Event> anchor_k;
  std::span<const Event> anchor_k1;
};

std::vector<WindowBlocks> plan_windows(const std::vector<IntensityFrame>& frames, const EventStream& events,
                                       std::size_t block_size);
// The block_size events nearest to time t (fewer when the stream is short).
std::span<const Event> centred_block(const EventStream& events, double t, std::size_t block_size);

/// Pseudo-intensity frames for one window: anchors and the chained blocks.
struct WindowPseudoFrames {
  PseudoIntensityFrame e_k0;
  PseudoIntensityFrame e_k1_0;
  std::vector<PseudoIntensityFrame> blocks;
};

// Pseudo-intensity of `block` (a span into `events`) with up to `warmup`
// preceding blocks of the same size chained in as the leaky prior.
PseudoIntensityFrame chained_pseudo_intensity(const EventStream& events, std::span<const Event> block, int warmup,
                                              const PseudoIntensitySettings& settings, double t_mid, int block_index);

WindowPseudoFrames window_pseudo_frames(const EventStream& events, const WindowBlocks& window,
                                        const PseudoIntensitySettings& settings, int warmup);

struct WindowResult {
  WindowPlan plan;
  Pose xi;
  std::vector<IntermediatePoseEstimate> estimates;
  std::vector<std::string> log;
};

// Stages (a)-(c) for one window. Divergence falls back to the best iterate and is logged.
WindowResult process_window(const IntensityFrame& i_k, const IntensityFrame& i_k1, const EventStream& events,
                            const WindowBlocks& window, const CameraIntrinsics& camera, const PipelineConfig& config,
                            const FlowField* forward_flow = nullptr, const FlowField* backward_flow = nullptr);

// Initial inverse depth of `first` from the flow towards `second`.
DepthMap initial_depth(const ImageGrid& first, const FlowField& flow, const PipelineConfig& config);

struct PipelineResult {
  std::vector<RenderedFrame> frames;
  std::vector<WindowResult> windows;
  std::vector<MetricsRow> metrics;
  std::vector<std::string> log;
};

// In-memory pipeline and baseline; the run_* variants also write the output directory.
PipelineResult reconstruct(const SequenceInput& input, const PipelineConfig& config);
PipelineResult baseline_cf(const SequenceInput& input, const PipelineConfig& config);
PipelineResult run_pipeline(const PipelineConfig& config);
PipelineResult run_baseline_cf(const PipelineConfig& config);

// Metrics of intermediate frames against the simulator's ground-truth renders.
std::vector<MetricsRow> score_frames(const std::vector<RenderedFrame>& frames, const SimulatedSequence& truth,
                                     const std::string& method);

// Dataset layout plus groundtruth/depth_%08d.pfm and groundtruth/trajectory.txt
// (world_from_camera twist at each frame time).
void save_simulation(const std::filesystem::path& directory, const SimulatedSequence& sequence);

// Scores every frame of an output directory's manifest that is not an input
// frame against ground-truth renders at the same timestamps.
std::vector<MetricsRow> score_directory(const std::filesystem::path& run_directory, const SimulatedSequence& truth,
                                        const std::string& method);

// Writes frames/, manifest.txt, metrics.csv and run.log (plus trajectory.txt
// and depth/ when windows are present).
void write_outputs(const std::filesystem::path& directory, const PipelineResult& result,
                   const PipelineConfig& config);

}  // namespace evrecon
