#include "evrecon/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <nlohmann/json.hpp>

#include "evrecon/error.hpp"
#include "evrecon/io.hpp"

namespace evrecon {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Config

void PipelineConfig::validate() const {
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw ValidationError("beta", "must be a non-negative number");
  if (!(lambda_sm >= 0.0) || !std::isfinite(lambda_sm))
    throw ValidationError("lambda_sm", "must be a non-negative number");
  if (!(lambda_r >= 0.0) || !std::isfinite(lambda_r)) throw ValidationError("lambda_r", "must be a non-negative number");
  if (block_size < 1) throw ValidationError("block_size", "must be at least 1");
  if (!(cf_cutoff > 0.0) || !std::isfinite(cf_cutoff)) throw ValidationError("cf_cutoff", "must be positive");
  if (!(cf_contrast > 0.0)) throw ValidationError("cf_contrast", "must be positive");
  if (!(pseudo.contrast > 0.0)) throw ValidationError("pseudo_intensity.contrast", "must be positive");
  if (!(pseudo.decay >= 0.0 && pseudo.decay <= 1.0)) throw ValidationError("pseudo_intensity.decay", "must lie in [0, 1]");
  if (pseudo_warmup_blocks < 0) throw ValidationError("pseudo_warmup_blocks", "must be non-negative");
  if (!(pseudo.tv_weight >= 0.0)) throw ValidationError("pseudo_intensity.tv_weight", "must be non-negative");
  if (pseudo.tv_iterations < 0) throw ValidationError("pseudo_intensity.tv_iterations", "must be non-negative");
  if (flow.levels < 1) throw ValidationError("flow.levels", "must be at least 1");
  if (flow.iterations < 1) throw ValidationError("flow.iterations", "must be at least 1");
  if (!(flow.smoothness > 0.0)) throw ValidationError("flow.smoothness", "must be positive");
  if (flow.warps < 1) throw ValidationError("flow.warps", "must be at least 1");
  if (!(refine.spatial_sigma > 0.0)) throw ValidationError("refine.spatial_sigma", "must be positive");
  if (!(refine.range_sigma > 0.0)) throw ValidationError("refine.range_sigma", "must be positive");
  if (refine.iterations < 0) throw ValidationError("refine.iterations", "must be non-negative");
  depth_settings().validate();
  pose_settings().validate();
  if (!(splat_gamma >= 0.0) || !std::isfinite(splat_gamma)) throw ValidationError("splat_gamma", "must be non-negative");
  if (alpha_policy != "linear") throw ValidationError("alpha_policy", "only \"linear\" is supported");
  if (simulator) simulator->validate();
}

DepthStageSettings PipelineConfig::depth_settings() const {
  DepthStageSettings s = depth;
  s.beta = beta;
  s.lambda_sm = lambda_sm;
  return s;
}

PoseStageSettings PipelineConfig::pose_settings() const {
  PoseStageSettings s = pose;
  s.lambda_r = lambda_r;
  return s;
}

namespace {

// Reads known keys of one JSON object and rejects the rest.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ValidationError(path_.empty() ? "config" : path_, "expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.push_back(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw ValidationError(field(key), "expected a boolean");
        out = it->template get<bool>();
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer()) throw ValidationError(field(key), "expected an integer");
        const auto v = it->template get<long long>();
        if (std::is_unsigned_v<T> && v < 0) throw ValidationError(field(key), "must be non-negative");
        out = static_cast<T>(v);
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw ValidationError(field(key), "expected a number");
        out = it->template get<double>();
      } else if constexpr (std::is_same_v<T, fs::path>) {
        if (!it->is_string()) throw ValidationError(field(key), "expected a string");
        out = it->template get<std::string>();
      } else {
        if (!it->is_string()) throw ValidationError(field(key), "expected a string");
        out = it->template get<std::string>();
      }
    } catch (const json::exception& e) {
      throw ValidationError(field(key), e.what());
    }
  }

  const json* child(const char* key) {
    seen_.push_back(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (std::find(seen_.begin(), seen_.end(), key) == seen_.end())
        throw ValidationError(field(key), "unknown config key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::vector<std::string> seen_;
};

void read_optimizer(const json& j, const std::string& path, OptimizerSettings& s, double* twist_step,
                    int* renormalize, int* pyramid) {
  ObjectReader r(j, path);
  r.get("step_size", s.step_size);
  r.get("beta1", s.beta1);
  r.get("beta2", s.beta2);
  r.get("eps", s.eps);
  r.get("max_iterations", s.max_iterations);
  r.get("convergence_tol", s.convergence_tol);
  r.get("final_step_fraction", s.final_step_fraction);
  if (twist_step) r.get("twist_step_size", *twist_step);
  if (renormalize) r.get("renormalize_every", *renormalize);
  if (pyramid) r.get("pyramid_levels", *pyramid);
  r.finish();
}

json optimizer_json(const OptimizerSettings& s) {
  return json{{"step_size", s.step_size},
              {"beta1", s.beta1},
              {"beta2", s.beta2},
              {"eps", s.eps},
              {"max_iterations", s.max_iterations},
              {"convergence_tol", s.convergence_tol},
              {"final_step_fraction", s.final_step_fraction}};
}

TextureKind texture_kind(const std::string& name, const std::string& field) {
  if (name == "noise") return TextureKind::noise;
  if (name == "checkerboard") return TextureKind::checkerboard;
  if (name == "step") return TextureKind::step;
  throw ValidationError(field, "unknown texture kind '" + name + "'");
}

const char* texture_name(TextureKind kind) {
  switch (kind) {
    case TextureKind::noise: return "noise";
    case TextureKind::checkerboard: return "checkerboard";
    case TextureKind::step: return "step";
  }
  return "noise";
}

double bound_from_json(const json& j, const std::string& field) {
  if (j.is_null()) return std::numeric_limits<double>::infinity();
  if (!j.is_number()) throw ValidationError(field, "expected a number or null");
  return j.get<double>();
}

json bound_to_json(double v) { return std::isinf(v) ? json(nullptr) : json(v); }

SimulatorConfig read_simulator(const json& j) {
  SimulatorConfig s;
  ObjectReader r(j, "simulator");
  r.get("frame_count", s.frame_count);
  r.get("first_frame_time", s.first_frame_time);
  r.get("frame_interval", s.frame_interval);
  r.get("contrast_threshold", s.contrast_threshold);
  r.get("sample_rate", s.sample_rate);
  r.get("noise_rate", s.noise_rate);
  if (const json* cam = r.child("camera")) {
    ObjectReader c(*cam, "simulator.camera");
    double fx = s.camera.fx(), fy = s.camera.fy(), cx = s.camera.cx(), cy = s.camera.cy();
    int w = s.camera.width(), h = s.camera.height();
    c.get("fx", fx);
    c.get("fy", fy);
    c.get("cx", cx);
    c.get("cy", cy);
    c.get("width", w);
    c.get("height", h);
    c.finish();
    s.camera = CameraIntrinsics(fx, fy, cx, cy, w, h);
  }
  if (const json* planes = r.child("planes")) {
    if (!planes->is_array()) throw ValidationError("simulator.planes", "expected an array");
    s.planes.clear();
    for (std::size_t i = 0; i < planes->size(); ++i) {
      const std::string path = "simulator.planes[" + std::to_string(i) + "]";
      ObjectReader p((*planes)[i], path);
      PlaneSpec plane;
      p.get("depth", plane.depth);
      for (auto [key, target] : {std::pair{"x_min", &plane.x_min}, std::pair{"x_max", &plane.x_max},
                                 std::pair{"y_min", &plane.y_min}, std::pair{"y_max", &plane.y_max}}) {
        if (const json* b = p.child(key)) {
          const double v = bound_from_json(*b, p.field(key));
          *target = std::string_view(key).ends_with("min") ? (std::isinf(v) ? -v : v) : v;
        }
      }
      if (const json* t = p.child("texture")) {
        ObjectReader tr(*t, path + ".texture");
        std::string kind = texture_name(plane.texture.kind);
        tr.get("kind", kind);
        plane.texture.kind = texture_kind(kind, path + ".texture.kind");
        tr.get("feature_size", plane.texture.feature_size);
        tr.get("mean", plane.texture.mean);
        tr.get("contrast", plane.texture.contrast);
        tr.get("edge_x", plane.texture.edge_x);
        tr.get("seed", plane.texture.seed);
        tr.finish();
      }
      p.finish();
      s.planes.push_back(plane);
    }
  }
  if (const json* keys = r.child("keyframes")) {
    if (!keys->is_array()) throw ValidationError("simulator.keyframes", "expected an array");
    for (std::size_t i = 0; i < keys->size(); ++i) {
      const std::string path = "simulator.keyframes[" + std::to_string(i) + "]";
      ObjectReader k((*keys)[i], path);
      Keyframe kf;
      k.get("t", kf.t);
      if (const json* tw = k.child("twist")) {
        if (!tw->is_array() || tw->size() != 6) throw ValidationError(path + ".twist", "expected 6 numbers");
        for (int c = 0; c < 6; ++c) {
          if (!(*tw)[c].is_number()) throw ValidationError(path + ".twist", "expected 6 numbers");
          kf.twist[c] = (*tw)[c].get<double>();
        }
      }
      k.finish();
      s.keyframes.push_back(kf);
    }
  }
  r.finish();
  return s;
}

json simulator_json(const SimulatorConfig& s) {
  json planes = json::array();
  for (const auto& p : s.planes) {
    planes.push_back({{"depth", p.depth},
                      {"x_min", bound_to_json(p.x_min)},
                      {"x_max", bound_to_json(p.x_max)},
                      {"y_min", bound_to_json(p.y_min)},
                      {"y_max", bound_to_json(p.y_max)},
                      {"texture",
                       {{"kind", texture_name(p.texture.kind)},
                        {"feature_size", p.texture.feature_size},
                        {"mean", p.texture.mean},
                        {"contrast", p.texture.contrast},
                        {"edge_x", p.texture.edge_x},
                        {"seed", p.texture.seed}}}});
  }
  json keys = json::array();
  for (const auto& k : s.keyframes) {
    keys.push_back({{"t", k.t}, {"twist", std::vector<double>(k.twist.data(), k.twist.data() + 6)}});
  }
  return json{{"frame_count", s.frame_count},
              {"first_frame_time", s.first_frame_time},
              {"frame_interval", s.frame_interval},
              {"contrast_threshold", s.contrast_threshold},
              {"sample_rate", s.sample_rate},
              {"noise_rate", s.noise_rate},
              {"camera",
               {{"fx", s.camera.fx()},
                {"fy", s.camera.fy()},
                {"cx", s.camera.cx()},
                {"cy", s.camera.cy()},
                {"width", s.camera.width()},
                {"height", s.camera.height()}}},
              {"planes", planes},
              {"keyframes", keys}};
}

}  // namespace

PipelineConfig parse_config(const std::string& json_text, bool validate) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ValidationError("config", std::string("malformed JSON: ") + e.what());
  }
  PipelineConfig c;
  ObjectReader r(j, "");
  r.get("beta", c.beta);
  r.get("lambda_sm", c.lambda_sm);
  r.get("lambda_r", c.lambda_r);
  r.get("block_size", c.block_size);
  r.get("cf_cutoff", c.cf_cutoff);
  r.get("cf_contrast", c.cf_contrast);
  r.get("seed", c.seed);
  r.get("refine_depth", c.refine_depth);
  r.get("splat_gamma", c.splat_gamma);
  r.get("alpha_policy", c.alpha_policy);
  r.get("warm_start", c.warm_start);
  r.get("input", c.input);
  r.get("output", c.output);
  r.get("flow_dir", c.flow_dir);
  if (const json* p = r.child("pseudo_intensity")) {
    ObjectReader pr(*p, "pseudo_intensity");
    pr.get("contrast", c.pseudo.contrast);
    pr.get("decay", c.pseudo.decay);
    pr.get("tv_weight", c.pseudo.tv_weight);
    pr.get("tv_iterations", c.pseudo.tv_iterations);
    pr.get("warmup_blocks", c.pseudo_warmup_blocks);
    pr.finish();
  }
  if (const json* f = r.child("flow")) {
    ObjectReader fr(*f, "flow");
    fr.get("levels", c.flow.levels);
    fr.get("iterations", c.flow.iterations);
    fr.get("smoothness", c.flow.smoothness);
    fr.get("warps", c.flow.warps);
    fr.finish();
  }
  if (const json* f = r.child("refine")) {
    ObjectReader fr(*f, "refine");
    fr.get("spatial_sigma", c.refine.spatial_sigma);
    fr.get("range_sigma", c.refine.range_sigma);
    fr.get("iterations", c.refine.iterations);
    fr.finish();
  }
  if (const json* d = r.child("depth_optimizer"))
    read_optimizer(*d, "depth_optimizer", c.depth.optimizer, &c.depth.twist_step_size, &c.depth.renormalize_every,
                   nullptr);
  if (const json* p = r.child("pose_optimizer"))
    read_optimizer(*p, "pose_optimizer", c.pose.optimizer, nullptr, nullptr, &c.pose.pyramid_levels);
  if (const json* s = r.child("simulator")) {
    if (!s->is_null()) c.simulator = read_simulator(*s);
  }
  r.finish();
  if (validate) c.validate();
  return c;
}

PipelineConfig load_config(const fs::path& path, bool validate) { return parse_config(read_text_file(path), validate); }

std::string dump_config(const PipelineConfig& c) {
  json depth = optimizer_json(c.depth.optimizer);
  depth["twist_step_size"] = c.depth.twist_step_size;
  depth["renormalize_every"] = c.depth.renormalize_every;
  json pose = optimizer_json(c.pose.optimizer);
  pose["pyramid_levels"] = c.pose.pyramid_levels;
  json j{{"beta", c.beta},
         {"lambda_sm", c.lambda_sm},
         {"lambda_r", c.lambda_r},
         {"block_size", c.block_size},
         {"cf_cutoff", c.cf_cutoff},
         {"cf_contrast", c.cf_contrast},
         {"seed", c.seed},
         {"pseudo_intensity",
          {{"contrast", c.pseudo.contrast},
           {"decay", c.pseudo.decay},
           {"tv_weight", c.pseudo.tv_weight},
           {"tv_iterations", c.pseudo.tv_iterations},
           {"warmup_blocks", c.pseudo_warmup_blocks}}},
         {"flow",
          {{"levels", c.flow.levels},
           {"iterations", c.flow.iterations},
           {"smoothness", c.flow.smoothness},
           {"warps", c.flow.warps}}},
         {"refine",
          {{"spatial_sigma", c.refine.spatial_sigma},
           {"range_sigma", c.refine.range_sigma},
           {"iterations", c.refine.iterations}}},
         {"refine_depth", c.refine_depth},
         {"depth_optimizer", depth},
         {"pose_optimizer", pose},
         {"splat_gamma", c.splat_gamma},
         {"alpha_policy", c.alpha_policy},
         {"warm_start", c.warm_start},
         {"input", c.input.string()},
         {"output", c.output.string()},
         {"flow_dir", c.flow_dir.string()},
         {"simulator", c.simulator ? simulator_json(*c.simulator) : json(nullptr)}};
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Inputs and planning

SequenceInput load_input(const PipelineConfig& config) {
  if (!config.input.empty()) {
    Dataset d = load_dataset(config.input);
    SequenceInput in{d.camera, std::move(d.frames), std::move(d.events), std::nullopt, {}};
    if (d.dropped_events > 0)
      in.notes.push_back("events: dropped " + std::to_string(d.dropped_events) + " out-of-bounds events");
    return in;
  }
  if (!config.simulator) throw ValidationError("input", "either an input dataset or a simulator config is required");
  SimulatorConfig sim = *config.simulator;
  sim.seed = config.seed;
  SimulatedSequence seq = simulate(sim);
  SequenceInput in{seq.camera, seq.frames, seq.events, std::nullopt, {}};
  in.truth.emplace(std::move(seq));
  return in;
}

std::span<const Event> centred_block(const EventStream& events, double t, std::size_t block_size) {
  const auto& all = events.events();
  if (all.empty()) return {};
  const auto split = static_cast<std::size_t>(
      std::lower_bound(all.begin(), all.end(), t, [](const Event& e, double v) { return e.t < v; }) - all.begin());
  const std::size_t n = std::min(block_size, all.size());
  std::size_t begin = split >= n / 2 ? split - n / 2 : 0;
  begin = std::min(begin, all.size() - n);
  return std::span<const Event>(all).subspan(begin, n);
}

std::vector<WindowBlocks> plan_windows(const std::vector<IntensityFrame>& frames, const EventStream& events,
                                       std::size_t block_size) {
  std::vector<WindowBlocks> out;
  for (std::size_t k = 0; k + 1 < frames.size(); ++k) {
    WindowBlocks w;
    w.window = static_cast<int>(k);
    w.t_k = frames[k].timestamp();
    w.t_k1 = frames[k + 1].timestamp();
    BlockPartition p = frame_events(events, block_size, w.t_k, w.t_k1);
    w.blocks = std::move(p.blocks);
    w.short_window = p.short_window;
    w.anchor_k = centred_block(events, w.t_k, block_size);
    w.anchor_k1 = centred_block(events, w.t_k1, block_size);
    out.push_back(std::move(w));
  }
  return out;
}

PseudoIntensityFrame chained_pseudo_intensity(const EventStream& events, std::span<const Event> block, int warmup,
                                              const PseudoIntensitySettings& settings, double t_mid, int block_index) {
  const int w = events.width(), h = events.height();
  if (block.empty()) return pseudo_intensity(block, nullptr, w, h, settings, t_mid, block_index);
  const Event* base = events.events().data();
  const auto begin = static_cast<std::size_t>(block.data() - base);
  const std::size_t size = block.size();
  std::optional<PseudoIntensityFrame> state;
  for (int i = warmup; i >= 1; --i) {
    const std::size_t back = static_cast<std::size_t>(i) * size;
    if (back > begin) continue;
    const auto prior_block = std::span<const Event>(events.events()).subspan(begin - back, size);
    state = pseudo_intensity(prior_block, state ? &*state : nullptr, w, h, settings);
  }
  return pseudo_intensity(block, state ? &*state : nullptr, w, h, settings, t_mid, block_index);
}

WindowPseudoFrames window_pseudo_frames(const EventStream& events, const WindowBlocks& window,
                                        const PseudoIntensitySettings& settings, int warmup) {
  WindowPseudoFrames out;
  out.e_k0 = chained_pseudo_intensity(events, window.anchor_k, warmup, settings, window.t_k, 0);
  out.e_k1_0 = chained_pseudo_intensity(events, window.anchor_k1, warmup, settings, window.t_k1, 0);
  for (std::size_t j = 0; j < window.blocks.size(); ++j) {
    const EventBlock& b = window.blocks[j];
    out.blocks.push_back(chained_pseudo_intensity(events, b.events, warmup, settings, b.t_mid(), static_cast<int>(j + 1)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stages

DepthMap initial_depth(const ImageGrid& first, const FlowField& flow, const PipelineConfig& config) {
  DepthMap d = depth_from_flow(flow);
  if (config.refine_depth) d = edge_aware_refine(d, first, config.refine);
  return d;
}

namespace {

std::string fmt(const char* pattern, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, pattern, a);
  return buf;
}

std::string window_tag(int k) { return "window " + std::to_string(k) + ": "; }

}  // namespace

WindowResult process_window(const IntensityFrame& i_k, const IntensityFrame& i_k1, const EventStream& events,
                            const WindowBlocks& window, const CameraIntrinsics& camera, const PipelineConfig& config,
                            const FlowField* forward_flow, const FlowField* backward_flow) {
  WindowResult out;
  const std::string tag = window_tag(window.window);
  for (const auto& b : window.blocks) out.plan.block_times.push_back(b.t_mid());
  if (window.short_window)
    out.log.push_back(tag + "events: short window (" + std::to_string(window.blocks.empty() ? 0 : window.blocks[0].events.size()) +
                      " events)");

  DepthPoseEstimate est;
  try {
    const FlowField fw = forward_flow ? *forward_flow : estimate_flow(i_k.pixels(), i_k1.pixels(), config.flow);
    const FlowField bw = backward_flow ? *backward_flow : estimate_flow(i_k1.pixels(), i_k.pixels(), config.flow);
    if (fw.low_confidence || bw.low_confidence) out.log.push_back(tag + "flow: low confidence");
    const DepthMap d0 = initial_depth(i_k.pixels(), fw, config);
    const DepthMap d1 = initial_depth(i_k1.pixels(), bw, config);
    try {
      est = estimate_depth_and_pose(i_k, i_k1, d0, d1, camera, config.depth_settings());
    } catch (const DepthDivergenceError& e) {
      out.log.push_back(tag + "depth_opt: " + e.what() + "; keeping best iterate");
      est = e.best();
    }
  } catch (const std::exception& e) {
    out.log.push_back(tag + "depth_opt failed: " + e.what());
    out.plan.poses.assign(out.plan.block_times.size(), {Pose(), Pose()});
    return out;
  }
  out.log.push_back(tag + "depth_opt: loss " + fmt("%.6g", est.initial_loss) + " -> " + fmt("%.6g", est.final_loss) +
                    " in " + std::to_string(est.iterations_run) + " iterations");
  out.plan.d_k = est.d_k;
  out.plan.d_k1 = est.d_k1;
  out.xi = est.xi;
  if (window.blocks.empty()) return out;

  const WindowPseudoFrames pseudo = window_pseudo_frames(events, window, config.pseudo, config.pseudo_warmup_blocks);
  const PoseStageSettings pose_settings = config.pose_settings();
  const std::pair<Pose, Pose> cold{Pose(), se3_invert(est.xi)};
  std::pair<Pose, Pose> init = cold;
  for (std::size_t j = 0; j < pseudo.blocks.size(); ++j) {
    IntermediatePoseProblem problem{&pseudo.e_k0.pixels, &pseudo.e_k1_0.pixels, &pseudo.blocks[j].pixels,
                                    &out.plan.d_k,       &out.plan.d_k1,        &i_k.pixels(),
                                    &i_k1.pixels()};
    if (!config.warm_start) init = cold;
    try {
      IntermediatePoseEstimate r = estimate_intermediate_pose(problem, init, camera, pose_settings);
      if (!r.converged) out.log.push_back(tag + "pose_opt: block " + std::to_string(j + 1) + " did not converge");
      init = {r.xi_k_j, r.xi_k1_j};
      out.plan.poses.push_back(init);
      out.estimates.push_back(std::move(r));
    } catch (const std::exception& e) {
      out.log.push_back(tag + "pose_opt: block " + std::to_string(j + 1) + " failed: " + e.what());
      out.plan.poses.push_back(init);
      out.estimates.push_back(IntermediatePoseEstimate{init.first, init.second, {}, {}, 0.0, 0.0, false, 0});
    }
  }
  return out;
}

std::vector<MetricsRow> score_frames(const std::vector<RenderedFrame>& frames, const SimulatedSequence& truth,
                                     const std::string& method) {
  std::vector<MetricsRow> rows;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const RenderedFrame& f = frames[i];
    if (f.origin == FrameOrigin::input) continue;
    const double t = f.frame.timestamp();
    const View gt = render_view(truth.scene, truth.trajectory.at(t), truth.camera, t);
    rows.push_back({i, t, method, psnr(f.frame, gt.image), ssim(f.frame, gt.image)});
  }
  return rows;
}

namespace {

void load_flows(const PipelineConfig& config, std::size_t window, std::optional<FlowField>& fw,
                std::optional<FlowField>& bw) {
  if (config.flow_dir.empty()) return;
  char name[64];
  std::snprintf(name, sizeof name, "flow_%08zu_fw.flo", window);
  if (fs::exists(config.flow_dir / name)) fw = import_flow(config.flow_dir / name);
  std::snprintf(name, sizeof name, "flow_%08zu_bw.flo", window);
  if (fs::exists(config.flow_dir / name)) bw = import_flow(config.flow_dir / name);
}

}  // namespace

PipelineResult reconstruct(const SequenceInput& input, const PipelineConfig& config) {
  config.validate();
  PipelineResult result;
  result.log = input.notes;
  if (input.frames.empty()) throw Error("input: no intensity frames");
  const auto windows = plan_windows(input.frames, input.events, config.block_size);
  std::vector<WindowPlan> plans;
  for (std::size_t k = 0; k < windows.size(); ++k) {
    std::optional<FlowField> fw, bw;
    load_flows(config, k, fw, bw);
    WindowResult w = process_window(input.frames[k], input.frames[k + 1], input.events, windows[k], input.camera, config,
                                    fw ? &*fw : nullptr, bw ? &*bw : nullptr);
    result.log.insert(result.log.end(), w.log.begin(), w.log.end());
    plans.push_back(w.plan);
    result.windows.push_back(std::move(w));
  }
  result.frames = render_sequence(input.frames, plans, input.camera, RenderSettings{config.splat_gamma});
  for (const auto& f : result.frames)
    if (f.origin == FrameOrigin::substituted)
      result.log.push_back(window_tag(f.window) + "renderer: block " + std::to_string(f.block) +
                           " substituted: " + f.error);
  if (input.truth) result.metrics = score_frames(result.frames, *input.truth, "pipeline");
  return result;
}

PipelineResult baseline_cf(const SequenceInput& input, const PipelineConfig& config) {
  config.validate();
  PipelineResult result;
  result.log = input.notes;
  if (input.frames.empty()) throw Error("input: no intensity frames");
  const auto windows = plan_windows(input.frames, input.events, config.block_size);
  std::vector<double> times;
  for (const auto& w : windows)
    for (const auto& b : w.blocks) times.push_back(b.t_mid());
  const auto cf = complementary_filter(input.events, input.frames, times, config.cf_cutoff, config.cf_contrast);
  std::size_t next = 0;
  for (std::size_t k = 0; k < input.frames.size(); ++k) {
    result.frames.push_back({input.frames[k], FrameOrigin::input, -1, -1, {}});
    if (k + 1 == input.frames.size()) break;
    for (std::size_t j = 0; j < windows[k].blocks.size(); ++j)
      result.frames.push_back({cf[next++], FrameOrigin::intermediate, static_cast<int>(k), static_cast<int>(j + 1), {}});
  }
  if (input.truth) result.metrics = score_frames(result.frames, *input.truth, "cf");
  return result;
}

void write_outputs(const fs::path& directory, const PipelineResult& result, const PipelineConfig& config) {
  fs::create_directories(directory / "frames");
  std::vector<ManifestEntry> manifest;
  for (std::size_t i = 0; i < result.frames.size(); ++i) {
    const std::string name = frame_filename(i);
    write_png(directory / "frames" / name, result.frames[i].frame.pixels());
    manifest.push_back({name, result.frames[i].frame.timestamp()});
  }
  write_manifest(directory / "manifest.txt", manifest);
  write_metrics_csv(directory / "metrics.csv", result.metrics);

  if (!result.windows.empty()) {
    std::vector<TrajectoryEntry> trajectory;
    for (const auto& w : result.windows)
      for (std::size_t j = 0; j < w.plan.block_times.size() && j < w.plan.poses.size(); ++j)
        trajectory.push_back({w.plan.block_times[j], w.plan.poses[j].first.twist()});
    write_trajectory(directory / "trajectory.txt", trajectory);
    fs::create_directories(directory / "depth");
    char name[64];
    for (std::size_t k = 0; k < result.windows.size(); ++k) {
      const WindowPlan& p = result.windows[k].plan;
      if (p.d_k.valid_count() == 0) continue;
      std::snprintf(name, sizeof name, "depth_%08zu.pfm", k);
      write_depth_pfm(directory / "depth" / name, p.d_k);
      if (k + 1 == result.windows.size()) {
        std::snprintf(name, sizeof name, "depth_%08zu.pfm", k + 1);
        write_depth_pfm(directory / "depth" / name, p.d_k1);
      }
    }
  }

  std::string log = "seed " + std::to_string(config.seed) + "\n";
  for (const auto& line : result.log) log += line + "\n";
  log += "config\n" + dump_config(config);
  write_text_file(directory / "run.log", log);
}

void save_simulation(const fs::path& directory, const SimulatedSequence& sequence) {
  save_dataset(directory, sequence.camera, sequence.frames, sequence.events);
  fs::create_directories(directory / "groundtruth");
  std::vector<TrajectoryEntry> poses;
  char name[64];
  for (std::size_t k = 0; k < sequence.frames.size(); ++k) {
    std::snprintf(name, sizeof name, "depth_%08zu.pfm", k);
    write_depth_pfm(directory / "groundtruth" / name, sequence.depths[k]);
    const double t = sequence.frames[k].timestamp();
    poses.push_back({t, sequence.trajectory.at(t).twist()});
  }
  write_trajectory(directory / "groundtruth" / "trajectory.txt", poses);
}

std::vector<MetricsRow> score_directory(const fs::path& run_directory, const SimulatedSequence& truth,
                                        const std::string& method) {
  const auto manifest = read_manifest(run_directory / "manifest.txt");
  std::vector<MetricsRow> rows;
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    const double t = manifest[i].timestamp;
    const bool input = std::any_of(truth.frames.begin(), truth.frames.end(),
                                   [t](const IntensityFrame& f) { return f.timestamp() == t; });
    if (input) continue;
    const IntensityFrame frame(read_png(run_directory / "frames" / manifest[i].filename), t);
    if (!frame.matches(truth.camera)) throw Error("frame " + manifest[i].filename + " does not match the simulator camera");
    const View gt = render_view(truth.scene, truth.trajectory.at(t), truth.camera, t);
    rows.push_back({i, t, method, psnr(frame, gt.image), ssim(frame, gt.image)});
  }
  return rows;
}

namespace {

PipelineResult run_to_disk(const PipelineConfig& config, bool baseline) {
  config.validate();
  if (config.output.empty()) throw ValidationError("output", "an output directory is required");
  const SequenceInput input = load_input(config);
  PipelineResult result = baseline ? baseline_cf(input, config) : reconstruct(input, config);
  write_outputs(config.output, result, config);
  return result;
}

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& config) { return run_to_disk(config, false); }
PipelineResult run_baseline_cf(const PipelineConfig& config) { return run_to_disk(config, true); }

}  // namespace evrecon
