#include "evrecon/adam.hpp"

#include <cmath>

#include "evrecon/error.hpp"

namespace evrecon {

void OptimizerSettings::validate(const std::string& prefix) const {
  if (!(step_size > 0.0)) throw ValidationError(prefix + ".step_size", "must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ValidationError(prefix + ".beta1", "must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ValidationError(prefix + ".beta2", "must lie in [0, 1)");
  if (!(eps > 0.0)) throw ValidationError(prefix + ".eps", "must be positive");
  if (max_iterations < 1) throw ValidationError(prefix + ".max_iterations", "must be >= 1");
  if (!(convergence_tol >= 0.0)) throw ValidationError(prefix + ".convergence_tol", "must be non-negative");
  if (!(final_step_fraction > 0.0 && final_step_fraction <= 1.0)) {
    throw ValidationError(prefix + ".final_step_fraction", "must lie in (0, 1]");
  }
}

double OptimizerSettings::schedule(int iteration) const {
  if (final_step_fraction == 1.0) return 1.0;
  return std::pow(final_step_fraction, static_cast<double>(iteration) / max_iterations);
}

Adam::Adam(std::size_t size, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps), m_(size, 0.0), v_(size, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grad, double step_size) {
  if (params.size() != m_.size() || grad.size() != m_.size()) throw InvalidArgument("Adam: size mismatch");
  beta1_pow_ *= beta1_;
  beta2_pow_ *= beta2_;
  const double c1 = 1.0 / (1.0 - beta1_pow_);
  const double c2 = 1.0 / (1.0 - beta2_pow_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    params[i] -= step_size * (m_[i] * c1) / (std::sqrt(v_[i] * c2) + eps_);
  }
}

void Adam::rescale(double factor) {
  for (std::size_t i = 0; i < m_.size(); ++i) rescale(i, factor);
}

void Adam::rescale(std::size_t index, double factor) {
  // Gradients scale inversely to the parameter.
  m_[index] /= factor;
  v_[index] /= factor * factor;
}

}  // namespace evrecon
