#include "evrecon/pose_opt.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <vector>

#include "evrecon/depth_opt.hpp"
#include "evrecon/error.hpp"
#include "evrecon/warp.hpp"

namespace evrecon {
namespace {

constexpr double kMinOverlap = 0.01;
constexpr int kMinPyramidSize = 8;

// mean rho(warped - target) over valid interior pixels, with the gradient for
// the parameters behind `jac`.
PoseLoss residual_term(const WarpJacobian& jac, const ImageGrid& target) {
  const int w = target.width(), h = target.height();
  PoseLoss out;
  for (int y = 1; y + 1 < h; ++y) {
    for (int x = 1; x + 1 < w; ++x) {
      if (jac.warp.valid(x, y)) ++out.valid;
    }
  }
  if (out.valid == 0 || out.valid < kMinOverlap * static_cast<double>(target.size())) {
    throw DivergenceError("pose loss: fewer than 1% of pixels overlap");
  }
  const double inv_n = 1.0 / static_cast<double>(out.valid);
  for (int y = 1; y + 1 < h; ++y) {
    for (int x = 1; x + 1 < w; ++x) {
      if (!jac.warp.valid(x, y)) continue;
      const std::size_t i = target.index(x, y);
      const double r = jac.warp.image[i] - target[i];
      out.value += charbonnier(r) * inv_n;
      const double g = charbonnier_derivative(r) * inv_n;
      for (std::size_t k = 0; k < 6; ++k) out.grad[static_cast<Eigen::Index>(k)] += g * jac.d_params[k][i];
    }
  }
  return out;
}

struct Level {
  CameraIntrinsics camera;
  ImageGrid e_k0, e_k1_0, e_kj, i_k, i_k1;
  DepthMap d_k, d_k1;

  IntermediatePoseProblem problem() const { return {&e_k0, &e_k1_0, &e_kj, &d_k, &d_k1, &i_k, &i_k1}; }
};

struct Evaluation {
  PoseLossTerms terms;
  Vector6d grad_k_j = Vector6d::Zero();
  Vector6d grad_k1_j = Vector6d::Zero();
};

Evaluation evaluate(const IntermediatePoseProblem& p, const Pose& xi_k_j, const Pose& xi_k1_j,
                    const CameraIntrinsics& camera, double lambda_r) {
  Evaluation e;
  const PoseLoss a = pose_photometric_loss(*p.e_k0, *p.e_kj, *p.d_k, xi_k_j, camera);
  const PoseLoss b = pose_photometric_loss(*p.e_k1_0, *p.e_kj, *p.d_k1, xi_k1_j, camera);
  const ConsistencyLoss c = pose_consistency_loss(*p.i_k, *p.i_k1, *p.d_k, xi_k_j, xi_k1_j, camera);
  e.terms = {a.value, b.value, c.value};
  e.grad_k_j = a.grad + lambda_r * c.grad_k_j;
  e.grad_k1_j = b.grad + lambda_r * c.grad_k1_j;
  return e;
}

}  // namespace

PoseLoss pose_photometric_loss(const ImageGrid& e_ref, const ImageGrid& e_j, const DepthMap& d_ref, const Pose& xi,
                               const CameraIntrinsics& camera) {
  return residual_term(inverse_warp_jacobian(e_j, d_ref, xi, camera), e_ref);
}

Pose chained_relative_pose(const Pose& xi_k_j, const Pose& xi_k1_j) {
  // k -> j, then j -> k+1.
  return se3_compose(se3_invert(xi_k1_j), xi_k_j);
}

ConsistencyLoss pose_consistency_loss(const ImageGrid& i_k, const ImageGrid& i_k1, const DepthMap& d_k,
                                      const Pose& xi_k_j, const Pose& xi_k1_j, const CameraIntrinsics& camera) {
  const Pose inv_k1_j = se3_invert(xi_k1_j);
  const Pose chained = se3_compose(inv_k1_j, xi_k_j);
  const PoseDerivative d_wrt_k_j = compose_derivative_right(inv_k1_j, twist_derivative(xi_k_j.twist()));
  const PoseDerivative d_wrt_k1_j =
      compose_derivative_left(invert_derivative(xi_k1_j, twist_derivative(xi_k1_j.twist())), xi_k_j);
  const PoseLoss a = residual_term(inverse_warp_jacobian(i_k1, d_k, chained, d_wrt_k_j, camera), i_k);
  const PoseLoss b = residual_term(inverse_warp_jacobian(i_k1, d_k, chained, d_wrt_k1_j, camera), i_k);
  return {a.value, a.grad, b.grad, a.valid};
}

PoseStageSettings::PoseStageSettings() {
  optimizer.step_size = 2e-3;
  optimizer.max_iterations = 300;
  optimizer.final_step_fraction = 0.05;
  optimizer.convergence_tol = 1e-6;
}

void PoseStageSettings::validate() const {
  optimizer.validate("pose_optimizer");
  if (!(lambda_r >= 0.0)) throw ValidationError("lambda_r", "must be non-negative");
  if (pyramid_levels < 1) throw ValidationError("pose_optimizer.pyramid_levels", "must be >= 1");
}

PoseLossTerms intermediate_pose_losses(const IntermediatePoseProblem& problem, const Pose& xi_k_j,
                                       const Pose& xi_k1_j, const CameraIntrinsics& camera) {
  return evaluate(problem, xi_k_j, xi_k1_j, camera, 0.0).terms;
}

DepthMap downsample_depth(const DepthMap& depth) {
  const int w = std::max(1, depth.width() / 2), h = std::max(1, depth.height() / 2);
  ImageGrid inv(w, h, 0.0);
  Mask valid(w, h, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double sum = 0.0;
      int n = 0;
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
          const int xx = std::min(2 * x + dx, depth.width() - 1), yy = std::min(2 * y + dy, depth.height() - 1);
          if (depth.is_valid(xx, yy)) {
            sum += depth.inv_depth()(xx, yy);
            ++n;
          }
        }
      }
      if (n > 0) {
        inv(x, y) = sum / n;
        valid(x, y) = 1;
      }
    }
  }
  return DepthMap(std::move(inv), std::move(valid));
}

IntermediatePoseEstimate estimate_intermediate_pose(const IntermediatePoseProblem& problem,
                                                    const std::pair<Pose, Pose>& init,
                                                    const CameraIntrinsics& camera,
                                                    const PoseStageSettings& settings) {
  settings.validate();
  const OptimizerSettings& opt = settings.optimizer;

  std::vector<Level> levels;
  levels.push_back({camera, *problem.e_k0, *problem.e_k1_0, *problem.e_kj, *problem.i_k, *problem.i_k1, *problem.d_k,
                    *problem.d_k1});
  while (static_cast<int>(levels.size()) < settings.pyramid_levels) {
    const Level& f = levels.back();
    if (f.camera.width() / 2 < kMinPyramidSize || f.camera.height() / 2 < kMinPyramidSize) break;
    levels.push_back({f.camera.half_resolution(), downsample_image(f.e_k0), downsample_image(f.e_k1_0),
                      downsample_image(f.e_kj), downsample_image(f.i_k), downsample_image(f.i_k1),
                      downsample_depth(f.d_k), downsample_depth(f.d_k1)});
  }

  IntermediatePoseEstimate out;
  out.xi_k_j = init.first;
  out.xi_k1_j = init.second;
  out.initial = evaluate(problem, init.first, init.second, camera, settings.lambda_r).terms;
  out.initial_total = out.initial.total(settings.lambda_r);
  out.final = out.initial;
  out.final_total = out.initial_total;

  Vector6d twist_a = init.first.twist();
  Vector6d twist_b = init.second.twist();
  for (int l = static_cast<int>(levels.size()) - 1; l >= 0 && out.converged; --l) {
    const Level& level = levels[static_cast<std::size_t>(l)];
    const IntermediatePoseProblem p = level.problem();
    Adam adam(12, opt);
    Eigen::Matrix<double, 12, 1> params;
    params << twist_a, twist_b;
    Eigen::Matrix<double, 12, 1> best_params = params;
    double best_loss = INFINITY;
    double start_loss = 0.0;
    int above = 0;
    std::deque<double> history;
    for (int it = 0; it < opt.max_iterations; ++it) {
      Evaluation e;
      try {
        e = evaluate(p, Pose::from_twist(params.head<6>()), Pose::from_twist(params.tail<6>()), level.camera,
                     settings.lambda_r);
      } catch (const DivergenceError&) {
        out.converged = false;
        break;
      }
      const double loss = e.terms.total(settings.lambda_r);
      if (it == 0) start_loss = loss;
      if (loss < best_loss) {
        best_loss = loss;
        best_params = params;
      }
      above = loss > 2.0 * start_loss ? above + 1 : 0;
      if (above >= 20) {
        out.converged = false;
        break;
      }
      ++out.iterations_run;
      history.push_back(loss);
      if (history.size() > 11) history.pop_front();
      if (history.size() == 11 && std::abs(history.back() - history.front()) < opt.convergence_tol * history.front()) break;

      Eigen::Matrix<double, 12, 1> grad;
      grad << e.grad_k_j, e.grad_k1_j;
      adam.step(std::span<double>(params.data(), 12), std::span<const double>(grad.data(), 12),
                opt.step_size * opt.schedule(it));
    }
    twist_a = best_params.head<6>();
    twist_b = best_params.tail<6>();
  }

  // Best-iterate guarantee at full resolution.
  try {
    const Pose a = Pose::from_twist(twist_a), b = Pose::from_twist(twist_b);
    const PoseLossTerms terms = evaluate(problem, a, b, camera, settings.lambda_r).terms;
    if (terms.total(settings.lambda_r) <= out.initial_total) {
      out.xi_k_j = a;
      out.xi_k1_j = b;
      out.final = terms;
      out.final_total = terms.total(settings.lambda_r);
    }
  } catch (const DivergenceError&) {
    out.converged = false;
  }
  return out;
}

}  // namespace evrecon
