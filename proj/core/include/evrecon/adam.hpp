#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace evrecon {

/// Adam hyperparameters plus the stopping rule shared by both optimization
/// stages.
struct OptimizerSettings {
  double step_size = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int max_iterations = 2000;
  // Stop once |L(i) - L(i-10)| < convergence_tol * L(i-10).
  double convergence_tol = 1e-5;
  // The step size decays geometrically to step_size * final_step_fraction at
  // max_iterations. 1 keeps it constant.
  double final_step_fraction = 1.0;

  // Throws ValidationError naming `prefix`.field.
  void validate(const std::string& prefix) const;
  // Step-size multiplier for iteration `i`.
  double schedule(int iteration) const;
};

class Adam {
 public:
  Adam(std::size_t size, double beta1, double beta2, double eps);
  explicit Adam(std::size_t size, const OptimizerSettings& s = {}) : Adam(size, s.beta1, s.beta2, s.eps) {}

  void step(std::span<double> params, std::span<const double> grad, double step_size);
  // Rescales the moment estimates after the parameters were rescaled by `factor`.
  void rescale(double factor);
  void rescale(std::size_t index, double factor);

 private:
  double beta1_, beta2_, eps_;
  double beta1_pow_ = 1.0, beta2_pow_ = 1.0;
  std::vector<double> m_, v_;
};

}  // namespace evrecon
