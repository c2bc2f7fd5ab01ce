#pragma once

#include <cmath>
#include <span>

#include "hyssra/errors.hpp"

namespace hyssra::mhsac {

inline double discrete_entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

inline void check_distribution(std::span<const double> probs) {
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw InputError("joint_entropy: negative probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw InputError("joint_entropy: probabilities must sum to 1");
}

/// alpha_d H(pi_d) + alpha_c (-log pi_c(a_c)). The sum over arms of the
/// continuous term collapses because pi_d sums to one.
inline double joint_entropy(std::span<const double> probs, double continuous_log_prob, double alpha_d,
                            double alpha_c) {
  check_distribution(probs);
  return alpha_d * discrete_entropy(probs) - alpha_c * continuous_log_prob;
}

/// Arm-by-arm form: sum_a pi(a) [alpha_d (-log pi(a)) + alpha_c (-log pi_c)].
inline double joint_entropy_by_arm(std::span<const double> probs, double continuous_log_prob,
                                   double alpha_d, double alpha_c) {
  check_distribution(probs);
  double total = 0.0;
  for (double p : probs) {
    if (p <= 0.0) continue;
    total += p * (-alpha_d * std::log(p) - alpha_c * continuous_log_prob);
  }
  return total;
}

}  // namespace hyssra::mhsac
