#include "evrecon/depth_opt.hpp"

#include <cmath>
#include <deque>
#include <vector>

#include "evrecon/warp.hpp"

namespace evrecon {
namespace {

constexpr double kMinInvDepth = 1e-4;
constexpr double kMinOverlap = 0.01;

struct DirectionalTerm {
  double value = 0.0;
  std::size_t valid = 0;
};

// Accumulates mean rho(warped - target) over valid interior pixels, adding
// its gradient into grad_depth and grad_params.
DirectionalTerm accumulate_term(const WarpJacobian& jac, const ImageGrid& target, ImageGrid& grad_depth,
                                Vector6d& grad_params) {
  const int w = target.width(), h = target.height();
  std::vector<std::size_t> pixels;
  pixels.reserve(target.size());
  for (int y = 1; y + 1 < h; ++y) {
    for (int x = 1; x + 1 < w; ++x) {
      if (jac.warp.valid(x, y)) pixels.push_back(target.index(x, y));
    }
  }
  DirectionalTerm term;
  term.valid = pixels.size();
  if (pixels.size() < kMinOverlap * static_cast<double>(target.size()) || pixels.empty()) {
    throw DivergenceError("photometric loss: fewer than 1% of pixels overlap; re-initialize depth/pose");
  }
  const double inv_n = 1.0 / static_cast<double>(pixels.size());
  for (std::size_t i : pixels) {
    const double r = jac.warp.image[i] - target[i];
    term.value += charbonnier(r);
    const double g = charbonnier_derivative(r) * inv_n;
    grad_depth[i] += g * jac.d_inv_depth[i];
    for (std::size_t k = 0; k < 6; ++k) grad_params[static_cast<Eigen::Index>(k)] += g * jac.d_params[k][i];
  }
  term.value *= inv_n;
  return term;
}

}  // namespace

double charbonnier(double x) {
  return std::sqrt(x * x + kCharbonnierDelta * kCharbonnierDelta) - kCharbonnierDelta;
}

double charbonnier_derivative(double x) {
  return x / std::sqrt(x * x + kCharbonnierDelta * kCharbonnierDelta);
}

bool is_border(int x, int y, int width, int height) {
  return x == 0 || y == 0 || x == width - 1 || y == height - 1;
}

PhotometricLoss photometric_loss(const ImageGrid& i_k, const ImageGrid& i_k1, const DepthMap& d_k,
                                 const DepthMap& d_k1, const Pose& xi, const CameraIntrinsics& camera) {
  const int w = camera.width(), h = camera.height();
  PhotometricLoss out;
  out.grad_d_k = ImageGrid(w, h, 0.0);
  out.grad_d_k1 = ImageGrid(w, h, 0.0);

  const PoseDerivative dxi = twist_derivative(xi.twist());
  const Pose xi_inv = se3_invert(xi);
  const PoseDerivative dxi_inv = invert_derivative(xi, dxi);

  const WarpJacobian to_k = inverse_warp_jacobian(i_k1, d_k, xi, dxi, camera);
  const WarpJacobian to_k1 = inverse_warp_jacobian(i_k, d_k1, xi_inv, dxi_inv, camera);
  const DirectionalTerm a = accumulate_term(to_k, i_k, out.grad_d_k, out.grad_xi);
  const DirectionalTerm b = accumulate_term(to_k1, i_k1, out.grad_d_k1, out.grad_xi);
  out.value = a.value + b.value;
  out.valid_k = a.valid;
  out.valid_k1 = b.valid;
  return out;
}

SmoothnessLoss smoothness_loss(const DepthMap& depth, const ImageGrid& image, double beta) {
  if (!depth.inv_depth().same_shape(image)) throw InvalidArgument("smoothness_loss: shape mismatch");
  if (!(beta >= 0.0)) throw InvalidArgument("smoothness_loss: beta must be non-negative");
  const int w = image.width(), h = image.height();
  const ImageGrid& d = depth.inv_depth();
  SmoothnessLoss out{0.0, ImageGrid(w, h, 0.0)};
  std::size_t owners = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!depth.is_valid(x, y)) continue;
      bool owns = false;
      const int nbr[2][2] = {{x + 1, y}, {x, y + 1}};
      for (const auto& n : nbr) {
        if (!image.contains(n[0], n[1]) || !depth.is_valid(n[0], n[1])) continue;
        owns = true;
        const double diff = d(n[0], n[1]) - d(x, y);
        const double weight = std::exp(-beta * std::abs(image(n[0], n[1]) - image(x, y)));
        out.value += charbonnier(diff) * weight;
        const double g = charbonnier_derivative(diff) * weight;
        out.grad(n[0], n[1]) += g;
        out.grad(x, y) -= g;
      }
      if (owns) ++owners;
    }
  }
  if (owners == 0) return out;
  const double inv = 1.0 / static_cast<double>(owners);
  out.value *= inv;
  for (double& g : out.grad.values()) g *= inv;
  return out;
}

DepthStageSettings::DepthStageSettings() { optimizer.max_iterations = 4000; }

void DepthStageSettings::validate() const {
  optimizer.validate("depth_optimizer");
  if (!(twist_step_size > 0.0)) throw ValidationError("depth_optimizer.twist_step_size", "must be positive");
  if (!(lambda_sm >= 0.0)) throw ValidationError("lambda_sm", "must be non-negative");
  if (!(beta >= 0.0)) throw ValidationError("beta", "must be non-negative");
  if (renormalize_every < 1) throw ValidationError("depth_optimizer.renormalize_every", "must be >= 1");
}

DepthObjective depth_objective(const IntensityFrame& i_k, const IntensityFrame& i_k1, const DepthMap& d_k,
                               const DepthMap& d_k1, const Pose& xi, const CameraIntrinsics& camera,
                               const DepthStageSettings& settings) {
  DepthObjective o;
  o.photometric = photometric_loss(i_k.pixels(), i_k1.pixels(), d_k, d_k1, xi, camera).value;
  o.smoothness = smoothness_loss(d_k, i_k.pixels(), settings.beta).value +
                 smoothness_loss(d_k1, i_k1.pixels(), settings.beta).value;
  o.value = o.photometric + settings.lambda_sm * o.smoothness;
  return o;
}

DepthPoseEstimate estimate_depth_and_pose(const IntensityFrame& i_k, const IntensityFrame& i_k1,
                                          const DepthMap& init_d_k, const DepthMap& init_d_k1,
                                          const CameraIntrinsics& camera, const DepthStageSettings& settings,
                                          const Pose& init_xi) {
  settings.validate();
  if (!i_k.matches(camera) || !i_k1.matches(camera)) throw InvalidArgument("estimate_depth_and_pose: frame/camera mismatch");
  const std::size_t n = init_d_k.inv_depth().size();
  const Mask mask_k = init_d_k.valid();
  const Mask mask_k1 = init_d_k1.valid();

  // Parameter vector: [inv depth k | inv depth k1]; the twist is kept separately.
  std::vector<double> depth_params(2 * n);
  std::copy(init_d_k.inv_depth().values().begin(), init_d_k.inv_depth().values().end(), depth_params.begin());
  std::copy(init_d_k1.inv_depth().values().begin(), init_d_k1.inv_depth().values().end(),
            depth_params.begin() + static_cast<std::ptrdiff_t>(n));
  Vector6d twist = init_xi.twist();

  const int w = camera.width(), h = camera.height();
  auto make_depth = [&](std::size_t offset, const Mask& mask) {
    ImageGrid g(w, h, 0.0);
    for (std::size_t i = 0; i < n; ++i) g[i] = mask[i] ? depth_params[offset + i] : 0.0;
    return DepthMap(std::move(g), mask);
  };

  Adam depth_adam(2 * n, settings.optimizer);
  Adam twist_adam(6, settings.optimizer);
  const OptimizerSettings& opt = settings.optimizer;

  DepthPoseEstimate best{init_d_k, init_d_k1, init_xi, 0.0, 0.0, 0};
  double best_loss = 0.0;
  double initial_loss = 0.0;
  std::deque<double> history;
  int above_twice_initial = 0;
  std::vector<double> grad(2 * n);

  int iteration = 0;
  for (; iteration < opt.max_iterations; ++iteration) {
    const DepthMap d_k = make_depth(0, mask_k);
    const DepthMap d_k1 = make_depth(n, mask_k1);
    const Pose xi = Pose::from_twist(twist);

    PhotometricLoss ph;
    try {
      ph = photometric_loss(i_k.pixels(), i_k1.pixels(), d_k, d_k1, xi, camera);
    } catch (const DivergenceError& e) {
      if (iteration == 0) throw;
      best.iterations_run = iteration;
      throw DepthDivergenceError(e.what(), best);
    }
    const SmoothnessLoss sm_k = smoothness_loss(d_k, i_k.pixels(), settings.beta);
    const SmoothnessLoss sm_k1 = smoothness_loss(d_k1, i_k1.pixels(), settings.beta);
    const double loss = ph.value + settings.lambda_sm * (sm_k.value + sm_k1.value);

    if (iteration == 0) {
      initial_loss = loss;
      best_loss = loss;
      best.initial_loss = loss;
    }
    if (loss <= best_loss) {
      best_loss = loss;
      best.d_k = d_k;
      best.d_k1 = d_k1;
      best.xi = xi;
    }
    above_twice_initial = loss > 2.0 * initial_loss ? above_twice_initial + 1 : 0;
    if (above_twice_initial >= 20) {
      best.final_loss = best_loss;
      best.iterations_run = iteration;
      throw DepthDivergenceError("depth/pose optimization diverged (loss above twice its initial value)", best);
    }
    history.push_back(loss);
    if (history.size() > 11) history.pop_front();
    if (history.size() == 11 && std::abs(history.back() - history.front()) < opt.convergence_tol * std::abs(history.front())) {
      ++iteration;
      break;
    }

    for (std::size_t i = 0; i < n; ++i) {
      grad[i] = mask_k[i] ? ph.grad_d_k[i] + settings.lambda_sm * sm_k.grad[i] : 0.0;
      grad[n + i] = mask_k1[i] ? ph.grad_d_k1[i] + settings.lambda_sm * sm_k1.grad[i] : 0.0;
    }
    const double schedule = opt.schedule(iteration);
    depth_adam.step(depth_params, grad, opt.step_size * schedule);
    for (double& q : depth_params) q = std::max(q, kMinInvDepth);
    const Vector6d g = ph.grad_xi;
    twist_adam.step(std::span<double>(twist.data(), 6), std::span<const double>(g.data(), 6),
                    settings.twist_step_size * schedule);

    if ((iteration + 1) % settings.renormalize_every == 0) {
      double sum = 0.0;
      std::size_t count = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (mask_k[i]) {
          sum += depth_params[i];
          ++count;
        }
      }
      const double mean = sum / static_cast<double>(count);
      for (double& q : depth_params) q /= mean;
      depth_adam.rescale(1.0 / mean);
      // Inverse depth scaled by 1/mean keeps every projection when the
      // translation (and thus the translational twist part) scales by mean.
      twist.tail<3>() *= mean;
      for (std::size_t k = 3; k < 6; ++k) twist_adam.rescale(k, mean);
    }
  }
  best.final_loss = best_loss;
  best.iterations_run = iteration;
  return best;
}

}  // namespace evrecon
