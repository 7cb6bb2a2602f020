#include "tlr/semantics.hpp"

#include "tlr/errors.hpp"
#include "tlr/kernels.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace tlr {

namespace {

void check_soft_args(std::size_t n, double kappa) {
  if (n == 0) throw std::invalid_argument("soft extremum of empty input");
  if (!(kappa > 0.0)) throw std::invalid_argument("kappa must be positive");
}

// Weighted mean with weights exp(sign*kappa*(v - shift)). The shift cancels in
// the ratio, so it is only a guard against overflow.
double soft_extremum(std::span<const double> v, double kappa, bool is_min) {
  check_soft_args(v.size(), kappa);
  double shift = is_min ? kernels::reduce_min(v) : kernels::reduce_max(v);
  double sign = is_min ? -kappa : kappa;
  std::vector<double> w(v.size());
  kernels::exp_affine(v, sign, -sign * shift, w);
  double denom = kernels::sum(w);
  return kernels::dot(v, w) / denom;
}

std::vector<double> soft_extremum_grad(std::span<const double> v, double kappa, bool is_min) {
  check_soft_args(v.size(), kappa);
  double shift = is_min ? kernels::reduce_min(v) : kernels::reduce_max(v);
  double sign = is_min ? -kappa : kappa;
  std::vector<double> w(v.size());
  kernels::exp_affine(v, sign, -sign * shift, w);
  double denom = kernels::sum(w);
  double s = kernels::dot(v, w) / denom;
  std::vector<double> g(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) g[i] = w[i] / denom * (1.0 + sign * (v[i] - s));
  return g;
}

} // namespace

double soft_min(std::span<const double> v, double kappa) { return soft_extremum(v, kappa, true); }
double soft_max(std::span<const double> v, double kappa) { return soft_extremum(v, kappa, false); }
std::vector<double> soft_min_grad(std::span<const double> v, double kappa) {
  return soft_extremum_grad(v, kappa, true);
}
std::vector<double> soft_max_grad(std::span<const double> v, double kappa) {
  return soft_extremum_grad(v, kappa, false);
}

SoftScan soft_suffix_scan(std::span<const double> v, double kappa, bool is_min) {
  check_soft_args(v.size(), kappa);
  const std::size_t n = v.size();
  SoftScan sc;
  sc.kappa = kappa;
  sc.is_min = is_min;
  sc.out.resize(n);
  sc.w.resize(n);
  sc.B.resize(n);

  double shift = is_min ? kernels::reduce_min(v) : kernels::reduce_max(v);
  double sign = is_min ? -kappa : kappa;
  kernels::exp_affine(v, sign, -sign * shift, sc.w);

  double b = 0.0, a = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    b += sc.w[i];
    a += sc.w[i] * v[i];
    sc.B[i] = b;
    // b >= w[argext of suffix]; with the global shift it can underflow only for
    // suffixes far from the extremum at very large kappa. Fall back to hard.
    if (b > 0.0) {
      sc.out[i] = a / b;
    } else {
      double m = is_min ? std::numeric_limits<double>::infinity()
                        : -std::numeric_limits<double>::infinity();
      for (std::size_t j = i; j < n; ++j) m = is_min ? std::min(m, v[j]) : std::max(m, v[j]);
      sc.out[i] = m;
    }
  }
  return sc;
}

void soft_suffix_scan_backward(const SoftScan& sc, std::span<const double> v,
                               std::span<const double> g_out, std::span<double> g_v) {
  const std::size_t n = v.size();
  const double sign = sc.is_min ? -sc.kappa : sc.kappa;
  // d out[t] / d v[u] (u >= t) = w[u] * ((1 + sign*v[u]) - sign*out[t]) / B[t];
  // accumulate prefix sums over t so the whole pass is linear.
  double p1 = 0.0, p2 = 0.0;
  for (std::size_t u = 0; u < n; ++u) {
    if (sc.B[u] > 0.0) {
      p1 += g_out[u] / sc.B[u];
      p2 += g_out[u] * sc.out[u] / sc.B[u];
    }
    g_v[u] += sc.w[u] * ((1.0 + sign * v[u]) * p1 - sign * p2);
  }
}

namespace {

const std::vector<double>& lookup(const SignalMap& signals, const std::string& id) {
  auto it = signals.find(id);
  if (it == signals.end()) throw std::out_of_range("unknown atom '" + id + "' in signal map");
  return it->second;
}

std::vector<double> hard_eval_signal(const FormulaPtr& f, const SignalMap& signals) {
  using K = Formula::Kind;
  switch (f->kind) {
    case K::Atom:
      return lookup(signals, f->atom);
    case K::Not: {
      auto s = hard_eval_signal(f->left, signals);
      for (auto& x : s) x = -x;
      return s;
    }
    case K::G: {
      auto s = hard_eval_signal(f->left, signals);
      std::vector<double> out(s.size());
      kernels::suffix_min(s, out);
      return out;
    }
    case K::F: {
      auto s = hard_eval_signal(f->left, signals);
      std::vector<double> out(s.size());
      kernels::suffix_max(s, out);
      return out;
    }
    case K::And:
    case K::Or: {
      auto a = hard_eval_signal(f->left, signals);
      auto b = hard_eval_signal(f->right, signals);
      if (a.size() != b.size()) throw std::invalid_argument("signal length mismatch");
      for (std::size_t i = 0; i < a.size(); ++i)
        a[i] = f->kind == K::And ? std::min(a[i], b[i]) : std::max(a[i], b[i]);
      return a;
    }
  }
  throw std::logic_error("unreachable");
}

// Forward evaluation tree with cached intermediates for the backward pass.
struct SoftNode {
  const Formula* f = nullptr;
  std::vector<double> sig;
  SoftScan scan; // G/F only
  std::unique_ptr<SoftNode> a, b;
};

std::unique_ptr<SoftNode> soft_eval_node(const FormulaPtr& f, const SignalMap& signals, double kappa) {
  using K = Formula::Kind;
  auto n = std::make_unique<SoftNode>();
  n->f = f.get();
  switch (f->kind) {
    case K::Atom:
      n->sig = lookup(signals, f->atom);
      break;
    case K::Not:
      n->a = soft_eval_node(f->left, signals, kappa);
      n->sig = n->a->sig;
      for (auto& x : n->sig) x = -x;
      break;
    case K::G:
    case K::F:
      n->a = soft_eval_node(f->left, signals, kappa);
      n->scan = soft_suffix_scan(n->a->sig, kappa, f->kind == K::G);
      n->sig = n->scan.out;
      break;
    case K::And:
    case K::Or: {
      n->a = soft_eval_node(f->left, signals, kappa);
      n->b = soft_eval_node(f->right, signals, kappa);
      if (n->a->sig.size() != n->b->sig.size())
        throw std::invalid_argument("signal length mismatch");
      n->sig.resize(n->a->sig.size());
      bool is_min = f->kind == K::And;
      for (std::size_t t = 0; t < n->sig.size(); ++t) {
        double pair[2] = {n->a->sig[t], n->b->sig[t]};
        n->sig[t] = soft_extremum(pair, kappa, is_min);
      }
      break;
    }
  }
  return n;
}

void soft_backward(const SoftNode& n, const std::vector<double>& g_sig, double kappa,
                   SignalMap& grads) {
  using K = Formula::Kind;
  switch (n.f->kind) {
    case K::Atom: {
      auto& g = grads[n.f->atom];
      if (g.empty()) g.assign(g_sig.size(), 0.0);
      for (std::size_t t = 0; t < g_sig.size(); ++t) g[t] += g_sig[t];
      break;
    }
    case K::Not: {
      std::vector<double> g(g_sig.size());
      for (std::size_t t = 0; t < g_sig.size(); ++t) g[t] = -g_sig[t];
      soft_backward(*n.a, g, kappa, grads);
      break;
    }
    case K::G:
    case K::F: {
      std::vector<double> g(n.a->sig.size(), 0.0);
      soft_suffix_scan_backward(n.scan, n.a->sig, g_sig, g);
      soft_backward(*n.a, g, kappa, grads);
      break;
    }
    case K::And:
    case K::Or: {
      bool is_min = n.f->kind == K::And;
      std::vector<double> ga(g_sig.size()), gb(g_sig.size());
      for (std::size_t t = 0; t < g_sig.size(); ++t) {
        double pair[2] = {n.a->sig[t], n.b->sig[t]};
        auto g2 = soft_extremum_grad(pair, kappa, is_min);
        ga[t] = g_sig[t] * g2[0];
        gb[t] = g_sig[t] * g2[1];
      }
      soft_backward(*n.a, ga, kappa, grads);
      soft_backward(*n.b, gb, kappa, grads);
      break;
    }
  }
}

void check_index(std::size_t t, std::size_t n) {
  if (t >= n) throw std::out_of_range("time index " + std::to_string(t) + " out of range (length " +
                                      std::to_string(n) + ")");
}

} // namespace

std::vector<double> hard_signal(const FormulaPtr& f, const SignalMap& signals) {
  if (!f) throw std::invalid_argument("null formula");
  return hard_eval_signal(f, signals);
}

double eval_hard(const FormulaPtr& f, const SignalMap& signals, std::size_t t) {
  auto sig = hard_signal(f, signals);
  check_index(t, sig.size());
  return sig[t];
}

double eval_soft(const FormulaPtr& f, const SignalMap& signals, std::size_t t, double kappa) {
  if (!f) throw std::invalid_argument("null formula");
  if (!(kappa > 0.0)) throw std::invalid_argument("kappa must be positive");
  auto node = soft_eval_node(f, signals, kappa);
  check_index(t, node->sig.size());
  return node->sig[t];
}

SignalMap eval_gradient(const FormulaPtr& f, const SignalMap& signals, std::size_t t, double kappa) {
  if (!f) throw std::invalid_argument("null formula");
  if (!(kappa > 0.0)) throw std::invalid_argument("kappa must be positive");
  auto node = soft_eval_node(f, signals, kappa);
  check_index(t, node->sig.size());
  std::vector<double> seed(node->sig.size(), 0.0);
  seed[t] = 1.0;
  SignalMap grads;
  for (const auto& [id, sig] : signals) grads[id].assign(sig.size(), 0.0);
  soft_backward(*node, seed, kappa, grads);
  return grads;
}

} // namespace tlr
