#pragma once

#include "tlr/formula.hpp"

#include <map>
#include <span>
#include <string>
#include <vector>

namespace tlr {

/// Per-predicate value sequences over a trace, all the same length, in [-1, 1].
using SignalMap = std::map<std::string, std::vector<double>>;

/// Boltzmann-weighted soft extrema: exactly bounded by [min v, max v], smooth,
/// and converging to the hard operators as kappa grows.
double soft_min(std::span<const double> v, double kappa);
double soft_max(std::span<const double> v, double kappa);
/// d soft_min / d v_i (resp. soft_max), same length as v.
std::vector<double> soft_min_grad(std::span<const double> v, double kappa);
std::vector<double> soft_max_grad(std::span<const double> v, double kappa);

/// Suffix-window soft extrema: out[t] = soft_min(v[t..n-1], kappa).
/// Weight sums are kept for the backward pass.
struct SoftScan {
  std::vector<double> out;
  std::vector<double> w;  // shifted Boltzmann weights per element
  std::vector<double> B;  // suffix sums of w
  double kappa = 0.0;
  bool is_min = true;
};
SoftScan soft_suffix_scan(std::span<const double> v, double kappa, bool is_min);
/// Accumulates d(sum_t g_out[t] * out[t]) / d v into g_v.
void soft_suffix_scan_backward(const SoftScan& scan, std::span<const double> v,
                               std::span<const double> g_out, std::span<double> g_v);

/// Quantitative evaluation with exact min/max semantics.
double eval_hard(const FormulaPtr& f, const SignalMap& signals, std::size_t t);
/// Smooth evaluation: min/max replaced by the soft forms above.
double eval_soft(const FormulaPtr& f, const SignalMap& signals, std::size_t t, double kappa);

/// Full robustness signal of a formula (hard semantics), one value per step.
std::vector<double> hard_signal(const FormulaPtr& f, const SignalMap& signals);

/// Gradient of eval_soft w.r.t. every signal value; shapes mirror `signals`.
SignalMap eval_gradient(const FormulaPtr& f, const SignalMap& signals, std::size_t t, double kappa);

} // namespace tlr
