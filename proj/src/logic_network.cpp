#include "tlr/logic_network.hpp"

#include "tlr/errors.hpp"
#include "tlr/kernels.hpp"
#include "tlr/threading.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

namespace tlr {

using nlohmann::json;

std::vector<ClusterPair> cluster_pairs(std::size_t n) {
  std::vector<ClusterPair> out;
  out.reserve(n * (n - 1) / 2);
  for (int i = 0; i < static_cast<int>(n); ++i)
    for (int j = i + 1; j < static_cast<int>(n); ++j) out.push_back({i, j});
  return out;
}

LogicStructure build_structure(std::vector<std::string> predicate_ids, int depth, std::uint64_t seed) {
  if (predicate_ids.size() < 2) throw std::invalid_argument("structure needs at least 2 predicates");
  if (depth < 1) throw std::invalid_argument("structure needs at least 1 temporal layer");
  LogicStructure s;
  s.predicate_ids = std::move(predicate_ids);
  s.depth = depth;
  const std::size_t n = s.n();
  const std::size_t c = s.cluster_count();

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> sel(-0.1, 0.1);
  std::uniform_real_distribution<double> neg(-0.5, 0.5);

  s.temporal.resize(static_cast<std::size_t>(depth) * n * 3);
  for (auto& w : s.temporal) w = sel(rng);
  s.cluster_neg.resize(c * 2);
  for (auto& w : s.cluster_neg) {
    do {
      w = neg(rng);
    } while (std::abs(w) < 0.05); // keep clear of the tanh saddle
  }
  s.cluster_op.resize(c * 2);
  for (auto& w : s.cluster_op) w = sel(rng);
  s.agg_op.resize(c > 0 ? (c - 1) * 2 : 0);
  for (auto& w : s.agg_op) w = sel(rng);
  return s;
}

EnsembleStructure make_ensemble(std::vector<LogicStructure> members, std::uint64_t seed) {
  if (members.empty()) throw std::invalid_argument("ensemble needs at least one member");
  for (const auto& m : members)
    if (m.predicate_ids != members.front().predicate_ids)
      throw std::invalid_argument("ensemble members must share one predicate list");
  EnsembleStructure ens;
  ens.members = std::move(members);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  std::uniform_real_distribution<double> sel(-0.1, 0.1);
  ens.outer_op.resize((ens.members.size() - 1) * 2);
  for (auto& w : ens.outer_op) w = sel(rng);
  return ens;
}

EnsembleStructure build_ensemble(const std::vector<std::string>& predicate_ids, int depth,
                                 std::size_t k, std::uint64_t seed) {
  std::vector<LogicStructure> members;
  members.reserve(k);
  for (std::size_t m = 0; m < k; ++m)
    members.push_back(build_structure(predicate_ids, depth, seed + 0x51ed270b * (m + 1)));
  return make_ensemble(std::move(members), seed);
}

// --- weight traversal ------------------------------------------------------

namespace {

template <typename Ens, typename Fn>
void visit_weights(Ens&& ens, Fn&& fn) {
  for (int m = 0; m < static_cast<int>(ens.members.size()); ++m) {
    auto& s = ens.members[m];
    const int n = static_cast<int>(s.n());
    const int c = static_cast<int>(s.cluster_count());
    for (int l = 0; l < s.depth; ++l)
      for (int i = 0; i < n; ++i)
        for (int slot = 0; slot < 3; ++slot)
          fn(s.temporal[(static_cast<std::size_t>(l) * n + i) * 3 + slot],
             WeightTag{WeightTag::Kind::Temporal, m, l, i, -1, -1, slot});
    for (int cl = 0; cl < c; ++cl)
      for (int side = 0; side < 2; ++side)
        fn(s.cluster_neg[cl * 2 + side],
           WeightTag{WeightTag::Kind::ClusterNeg, m, -1, -1, cl, -1, side});
    for (int cl = 0; cl < c; ++cl)
      for (int slot = 0; slot < 2; ++slot)
        fn(s.cluster_op[cl * 2 + slot],
           WeightTag{WeightTag::Kind::ClusterOp, m, -1, -1, cl, -1, slot});
    for (int g = 0; g + 1 < c; ++g)
      for (int slot = 0; slot < 2; ++slot)
        fn(s.agg_op[g * 2 + slot], WeightTag{WeightTag::Kind::AggOp, m, -1, -1, -1, g, slot});
  }
  for (int g = 0; g + 1 < static_cast<int>(ens.members.size()); ++g)
    for (int slot = 0; slot < 2; ++slot)
      fn(ens.outer_op[g * 2 + slot], WeightTag{WeightTag::Kind::OuterOp, -1, -1, -1, -1, g, slot});
}

} // namespace

void for_each_weight(EnsembleStructure& ens, const std::function<void(double&, const WeightTag&)>& fn) {
  visit_weights(ens, fn);
}

void for_each_weight(const EnsembleStructure& ens,
                     const std::function<void(double, const WeightTag&)>& fn) {
  visit_weights(ens, fn);
}

std::size_t weight_count(const EnsembleStructure& ens) {
  std::size_t count = 0;
  for (const auto& s : ens.members)
    count += s.temporal.size() + s.cluster_neg.size() + s.cluster_op.size() + s.agg_op.size();
  return count + ens.outer_op.size();
}

std::vector<double> weights_flat(const EnsembleStructure& ens) {
  std::vector<double> out;
  out.reserve(weight_count(ens));
  for_each_weight(ens, [&](double w, const WeightTag&) { out.push_back(w); });
  return out;
}

void set_weights_flat(EnsembleStructure& ens, std::span<const double> w) {
  if (w.size() != weight_count(ens)) throw std::invalid_argument("weight vector size mismatch");
  std::size_t i = 0;
  for_each_weight(ens, [&](double& dst, const WeightTag&) { dst = w[i++]; });
}

// --- signals ---------------------------------------------------------------

SignalMatrix compute_signal_matrix(const PredicateRegistry& reg,
                                   const std::vector<std::string>& ids, const FeatureTable& feats,
                                   const ThetaMap& theta, bool with_dtheta) {
  if (theta.ids() != ids) throw ConfigError("theta map does not match the predicate list");
  SignalMatrix sig;
  sig.n = ids.size();
  sig.steps = feats.size();
  sig.values.resize(sig.n * sig.steps);
  sig.param_offsets.resize(sig.n);
  sig.param_counts.resize(sig.n);

  std::size_t off = 0;
  for (std::size_t i = 0; i < sig.n; ++i) {
    sig.param_offsets[i] = off;
    sig.param_counts[i] = reg.at(ids[i]).params.size();
    off += sig.param_counts[i] * sig.steps;
  }
  if (with_dtheta) sig.dtheta.assign(off, 0.0);

  double dm[8];
  for (std::size_t i = 0; i < sig.n; ++i) {
    const Predicate& p = reg.at(ids[i]);
    auto th = theta.values_for(i);
    for (std::size_t t = 0; t < sig.steps; ++t) {
      double m = p.margin(feats[t], th, with_dtheta ? dm : nullptr, nullptr);
      double u = std::tanh(m / p.scale);
      sig.values[i * sig.steps + t] = u;
      if (with_dtheta) {
        double sech2 = (1.0 - u * u) / p.scale;
        for (std::size_t k = 0; k < sig.param_counts[i]; ++k)
          sig.dtheta[sig.param_offsets[i] + k * sig.steps + t] = sech2 * dm[k];
      }
    }
  }
  return sig;
}

// --- forward / backward ----------------------------------------------------

namespace {

void softmax_probs(const double* w, int k, double* p) {
  double m = w[0];
  for (int i = 1; i < k; ++i) m = std::max(m, w[i]);
  double z = 0.0;
  for (int i = 0; i < k; ++i) {
    p[i] = std::exp(w[i] - m);
    z += p[i];
  }
  for (int i = 0; i < k; ++i) p[i] /= z;
}

// two-input Boltzmann extremum with optional input gradients
double soft2(double a, double b, double kappa, bool is_min, double* da = nullptr,
             double* db = nullptr) {
  double sign = is_min ? -kappa : kappa;
  double m = is_min ? std::min(a, b) : std::max(a, b);
  double wa = std::exp(sign * (a - m));
  double wb = std::exp(sign * (b - m));
  double z = wa + wb;
  double s = (a * wa + b * wb) / z;
  if (da) *da = wa / z * (1.0 + sign * (a - s));
  if (db) *db = wb / z * (1.0 + sign * (b - s));
  return s;
}

double hard2(double a, double b, bool is_min) { return is_min ? std::min(a, b) : std::max(a, b); }

struct TemporalWs {
  std::vector<double> in;
  std::vector<double> out;
  SoftScan scan_g, scan_f;
  double p[3] = {0, 0, 0};
};

struct ClusterWs {
  double u_i = 0, u_j = 0, ta = 0, tb = 0, a = 0, b = 0;
  double vand = 0, vor = 0, q[2] = {0, 0}, val = 0;
};

struct FoldWs {
  double acc_in = 0, item = 0, vand = 0, vor = 0, q[2] = {0, 0}, acc_out = 0;
};

struct MemberWs {
  std::vector<std::vector<TemporalWs>> layers; // [depth][n]
  std::vector<double> u;
  std::vector<ClusterWs> clusters;
  std::vector<FoldWs> agg;
  double score = 0;
};

struct EnsembleWs {
  std::vector<MemberWs> members;
  std::vector<FoldWs> outer;
  double score = 0;
};

// weight offsets into the canonical flat order
struct Layout {
  std::vector<std::size_t> member_base;
  std::size_t outer_base = 0;
  std::size_t total = 0;
  std::size_t n = 0, c = 0;
  int depth = 0;

  std::size_t temporal(std::size_t m, int l, std::size_t i, int slot) const {
    return member_base[m] + (static_cast<std::size_t>(l) * n + i) * 3 + static_cast<std::size_t>(slot);
  }
  std::size_t neg(std::size_t m, std::size_t cl, int side) const {
    return member_base[m] + static_cast<std::size_t>(depth) * n * 3 + cl * 2 + static_cast<std::size_t>(side);
  }
  std::size_t op(std::size_t m, std::size_t cl, int slot) const {
    return member_base[m] + static_cast<std::size_t>(depth) * n * 3 + c * 2 + cl * 2 + static_cast<std::size_t>(slot);
  }
  std::size_t agg(std::size_t m, std::size_t g, int slot) const {
    return member_base[m] + static_cast<std::size_t>(depth) * n * 3 + c * 4 + g * 2 + static_cast<std::size_t>(slot);
  }
  std::size_t outer(std::size_t g, int slot) const { return outer_base + g * 2 + static_cast<std::size_t>(slot); }
};

Layout layout_of(const EnsembleStructure& ens) {
  Layout lay;
  const auto& first = ens.members.front();
  lay.n = first.n();
  lay.c = first.cluster_count();
  lay.depth = first.depth;
  std::size_t per_member = first.temporal.size() + first.cluster_neg.size() +
                           first.cluster_op.size() + first.agg_op.size();
  lay.member_base.resize(ens.members.size());
  for (std::size_t m = 0; m < ens.members.size(); ++m) lay.member_base[m] = m * per_member;
  lay.outer_base = ens.members.size() * per_member;
  lay.total = lay.outer_base + ens.outer_op.size();
  return lay;
}

// hard suffix scans used by both forward modes
std::vector<double> hard_suffix(std::span<const double> v, bool is_min) {
  std::vector<double> out(v.size());
  if (is_min)
    kernels::suffix_min(v, out);
  else
    kernels::suffix_max(v, out);
  return out;
}

double member_forward(const LogicStructure& s, const SignalMatrix& sig, double kappa, bool hard,
                      MemberWs* ws, const std::vector<ClusterPair>& pairs) {
  const std::size_t n = s.n();
  const std::size_t steps = sig.steps;
  if (steps == 0) throw std::invalid_argument("empty signal matrix");

  std::vector<std::vector<double>> cur(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = sig.value_row(i);
    cur[i].assign(row.begin(), row.end());
  }
  if (ws) ws->layers.assign(static_cast<std::size_t>(s.depth), std::vector<TemporalWs>(n));

  for (int l = 0; l < s.depth; ++l) {
    for (std::size_t i = 0; i < n; ++i) {
      double p[3];
      softmax_probs(&s.temporal[(static_cast<std::size_t>(l) * n + i) * 3], 3, p);
      std::vector<double> out(steps);
      if (hard) {
        auto g = hard_suffix(cur[i], true);
        auto f = hard_suffix(cur[i], false);
        for (std::size_t t = 0; t < steps; ++t)
          out[t] = p[0] * g[t] + p[1] * f[t] + p[2] * cur[i][t];
      } else {
        SoftScan g = soft_suffix_scan(cur[i], kappa, true);
        SoftScan f = soft_suffix_scan(cur[i], kappa, false);
        for (std::size_t t = 0; t < steps; ++t)
          out[t] = p[0] * g.out[t] + p[1] * f.out[t] + p[2] * cur[i][t];
        if (ws) {
          auto& tw = ws->layers[static_cast<std::size_t>(l)][i];
          tw.scan_g = std::move(g);
          tw.scan_f = std::move(f);
        }
      }
      if (ws) {
        auto& tw = ws->layers[static_cast<std::size_t>(l)][i];
        tw.in = cur[i];
        tw.out = out;
        tw.p[0] = p[0];
        tw.p[1] = p[1];
        tw.p[2] = p[2];
      }
      cur[i] = std::move(out);
    }
  }

  std::vector<double> u(n);
  for (std::size_t i = 0; i < n; ++i) u[i] = cur[i][0];
  if (ws) ws->u = u;

  const std::size_t c = pairs.size();
  std::vector<double> vals(c);
  if (ws) ws->clusters.assign(c, {});
  for (std::size_t cl = 0; cl < c; ++cl) {
    double ta = std::tanh(s.neg_w(cl, 0));
    double tb = std::tanh(s.neg_w(cl, 1));
    double a = ta * u[static_cast<std::size_t>(pairs[cl].i)];
    double b = tb * u[static_cast<std::size_t>(pairs[cl].j)];
    double vand = hard ? hard2(a, b, true) : soft2(a, b, kappa, true);
    double vor = hard ? hard2(a, b, false) : soft2(a, b, kappa, false);
    double q[2];
    softmax_probs(&s.cluster_op[cl * 2], 2, q);
    vals[cl] = q[0] * vand + q[1] * vor;
    if (ws) {
      auto& cw = ws->clusters[cl];
      cw.u_i = u[static_cast<std::size_t>(pairs[cl].i)];
      cw.u_j = u[static_cast<std::size_t>(pairs[cl].j)];
      cw.ta = ta;
      cw.tb = tb;
      cw.a = a;
      cw.b = b;
      cw.vand = vand;
      cw.vor = vor;
      cw.q[0] = q[0];
      cw.q[1] = q[1];
      cw.val = vals[cl];
    }
  }

  double acc = vals[0];
  if (ws) ws->agg.assign(c > 0 ? c - 1 : 0, {});
  for (std::size_t g = 0; g + 1 < c; ++g) {
    double vand = hard ? hard2(acc, vals[g + 1], true) : soft2(acc, vals[g + 1], kappa, true);
    double vor = hard ? hard2(acc, vals[g + 1], false) : soft2(acc, vals[g + 1], kappa, false);
    double q[2];
    softmax_probs(&s.agg_op[g * 2], 2, q);
    double out = q[0] * vand + q[1] * vor;
    if (ws) {
      auto& fw = ws->agg[g];
      fw.acc_in = acc;
      fw.item = vals[g + 1];
      fw.vand = vand;
      fw.vor = vor;
      fw.q[0] = q[0];
      fw.q[1] = q[1];
      fw.acc_out = out;
    }
    acc = out;
  }
  if (ws) ws->score = acc;
  return acc;
}

double ensemble_forward(const EnsembleStructure& ens, const SignalMatrix& sig, double kappa,
                        bool hard, EnsembleWs* ws) {
  if (sig.n != ens.predicate_ids().size())
    throw std::invalid_argument("signal matrix does not match structure width");
  auto pairs = cluster_pairs(ens.predicate_ids().size());
  if (ws) ws->members.assign(ens.k(), {});
  std::vector<double> scores(ens.k());
  for (std::size_t m = 0; m < ens.k(); ++m)
    scores[m] = member_forward(ens.members[m], sig, kappa, hard, ws ? &ws->members[m] : nullptr, pairs);

  double acc = scores[0];
  if (ws) ws->outer.assign(ens.k() > 0 ? ens.k() - 1 : 0, {});
  for (std::size_t g = 0; g + 1 < ens.k(); ++g) {
    double vand = hard ? hard2(acc, scores[g + 1], true) : soft2(acc, scores[g + 1], kappa, true);
    double vor = hard ? hard2(acc, scores[g + 1], false) : soft2(acc, scores[g + 1], kappa, false);
    double q[2];
    softmax_probs(&ens.outer_op[g * 2], 2, q);
    double out = q[0] * vand + q[1] * vor;
    if (ws) {
      auto& fw = ws->outer[g];
      fw.acc_in = acc;
      fw.item = scores[g + 1];
      fw.vand = vand;
      fw.vor = vor;
      fw.q[0] = q[0];
      fw.q[1] = q[1];
      fw.acc_out = out;
    }
    acc = out;
  }
  if (ws) ws->score = acc;
  return acc;
}

// backward over a fold chain; returns per-item gradients (index 0 = fold start)
std::vector<double> fold_backward(const std::vector<FoldWs>& steps, double kappa, double g_final,
                                  const std::function<void(std::size_t, int, double)>& add_gate_grad) {
  std::vector<double> g_items(steps.size() + 1, 0.0);
  double g = g_final;
  for (std::size_t idx = steps.size(); idx-- > 0;) {
    const FoldWs& fw = steps[idx];
    add_gate_grad(idx, 0, g * fw.q[0] * (fw.vand - fw.acc_out));
    add_gate_grad(idx, 1, g * fw.q[1] * (fw.vor - fw.acc_out));
    double da_and, db_and, da_or, db_or;
    soft2(fw.acc_in, fw.item, kappa, true, &da_and, &db_and);
    soft2(fw.acc_in, fw.item, kappa, false, &da_or, &db_or);
    double g_vand = g * fw.q[0];
    double g_vor = g * fw.q[1];
    g_items[idx + 1] = g_vand * db_and + g_vor * db_or;
    g = g_vand * da_and + g_vor * da_or;
  }
  g_items[0] = g;
  return g_items;
}

} // namespace

double forward(const EnsembleStructure& ens, const SignalMatrix& sig, double kappa) {
  if (!(kappa > 0.0)) throw std::invalid_argument("kappa must be positive");
  return ensemble_forward(ens, sig, kappa, false, nullptr);
}

double forward_hard(const EnsembleStructure& ens, const SignalMatrix& sig) {
  return ensemble_forward(ens, sig, 0.0, true, nullptr);
}

double forward(const EnsembleStructure& ens, const PredicateRegistry& reg, const Trace& trace,
               const ThetaMap& theta, double kappa) {
  auto feats = compute_features(trace);
  auto sig = compute_signal_matrix(reg, ens.predicate_ids(), feats, theta);
  return forward(ens, sig, kappa);
}

std::vector<double> forward_batch(const EnsembleStructure& ens,
                                  const std::vector<SignalMatrix>& batch, double kappa,
                                  unsigned threads) {
  std::vector<double> out(batch.size());
  parallel_for(batch.size(), threads, [&](std::size_t i) { out[i] = forward(ens, batch[i], kappa); });
  return out;
}

NetworkGrad network_gradient(const EnsembleStructure& ens, const SignalMatrix& sig, double kappa) {
  if (!(kappa > 0.0)) throw std::invalid_argument("kappa must be positive");
  EnsembleWs ws;
  double score = ensemble_forward(ens, sig, kappa, false, &ws);

  Layout lay = layout_of(ens);
  NetworkGrad grad;
  grad.score = score;
  grad.gate.assign(lay.total, 0.0);
  grad.signal.assign(sig.n * sig.steps, 0.0);

  auto pairs = cluster_pairs(ens.predicate_ids().size());
  const std::size_t steps = sig.steps;

  // outer fold
  std::vector<double> g_members = fold_backward(
      ws.outer, kappa, 1.0,
      [&](std::size_t g, int slot, double v) { grad.gate[lay.outer(g, slot)] += v; });

  for (std::size_t m = 0; m < ens.k(); ++m) {
    const LogicStructure& s = ens.members[m];
    MemberWs& mw = ws.members[m];
    const std::size_t n = s.n();
    const std::size_t c = s.cluster_count();

    std::vector<double> g_vals = fold_backward(
        mw.agg, kappa, g_members[m],
        [&](std::size_t g, int slot, double v) { grad.gate[lay.agg(m, g, slot)] += v; });

    std::vector<double> g_u(n, 0.0);
    for (std::size_t cl = 0; cl < c; ++cl) {
      const ClusterWs& cw = mw.clusters[cl];
      double g_val = g_vals[cl];
      grad.gate[lay.op(m, cl, 0)] += g_val * cw.q[0] * (cw.vand - cw.val);
      grad.gate[lay.op(m, cl, 1)] += g_val * cw.q[1] * (cw.vor - cw.val);
      double da_and, db_and, da_or, db_or;
      soft2(cw.a, cw.b, kappa, true, &da_and, &db_and);
      soft2(cw.a, cw.b, kappa, false, &da_or, &db_or);
      double g_a = g_val * (cw.q[0] * da_and + cw.q[1] * da_or);
      double g_b = g_val * (cw.q[0] * db_and + cw.q[1] * db_or);
      // a = tanh(w) * u
      grad.gate[lay.neg(m, cl, 0)] += g_a * (1.0 - cw.ta * cw.ta) * cw.u_i;
      grad.gate[lay.neg(m, cl, 1)] += g_b * (1.0 - cw.tb * cw.tb) * cw.u_j;
      g_u[static_cast<std::size_t>(pairs[cl].i)] += g_a * cw.ta;
      g_u[static_cast<std::size_t>(pairs[cl].j)] += g_b * cw.tb;
    }

    // u[i] is the top temporal output at t = 0
    std::vector<std::vector<double>> g_cur(n, std::vector<double>(steps, 0.0));
    for (std::size_t i = 0; i < n; ++i) g_cur[i][0] = g_u[i];

    for (int l = s.depth - 1; l >= 0; --l) {
      for (std::size_t i = 0; i < n; ++i) {
        TemporalWs& tw = mw.layers[static_cast<std::size_t>(l)][i];
        const std::vector<double>& g_out = g_cur[i];
        double gw0 = 0.0, gw1 = 0.0, gw2 = 0.0;
        for (std::size_t t = 0; t < steps; ++t) {
          gw0 += g_out[t] * tw.p[0] * (tw.scan_g.out[t] - tw.out[t]);
          gw1 += g_out[t] * tw.p[1] * (tw.scan_f.out[t] - tw.out[t]);
          gw2 += g_out[t] * tw.p[2] * (tw.in[t] - tw.out[t]);
        }
        grad.gate[lay.temporal(m, l, i, 0)] += gw0;
        grad.gate[lay.temporal(m, l, i, 1)] += gw1;
        grad.gate[lay.temporal(m, l, i, 2)] += gw2;

        std::vector<double> g_in(steps, 0.0);
        std::vector<double> g_scan(steps);
        for (std::size_t t = 0; t < steps; ++t) g_scan[t] = g_out[t] * tw.p[0];
        soft_suffix_scan_backward(tw.scan_g, tw.in, g_scan, g_in);
        for (std::size_t t = 0; t < steps; ++t) g_scan[t] = g_out[t] * tw.p[1];
        soft_suffix_scan_backward(tw.scan_f, tw.in, g_scan, g_in);
        for (std::size_t t = 0; t < steps; ++t) g_in[t] += g_out[t] * tw.p[2];
        g_cur[i] = std::move(g_in);
      }
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t t = 0; t < steps; ++t) grad.signal[i * steps + t] += g_cur[i][t];
  }
  return grad;
}

std::vector<double> theta_gradient(const SignalMatrix& sig, std::span<const double> signal_grad) {
  std::size_t total = 0;
  for (std::size_t i = 0; i < sig.n; ++i) total += sig.param_counts[i];
  std::vector<double> out(total, 0.0);
  if (sig.dtheta.empty()) throw std::invalid_argument("signal matrix lacks theta sensitivities");
  std::size_t param_base = 0;
  for (std::size_t i = 0; i < sig.n; ++i) {
    for (std::size_t k = 0; k < sig.param_counts[i]; ++k) {
      const double* drow = sig.dtheta.data() + sig.param_offsets[i] + k * sig.steps;
      const double* grow = signal_grad.data() + i * sig.steps;
      out[param_base + k] = kernels::dot({drow, sig.steps}, {grow, sig.steps});
    }
    param_base += sig.param_counts[i];
  }
  return out;
}

// --- checkpoints -------------------------------------------------------------

std::string checkpoint_to_json(const Checkpoint& ck) {
  json j;
  j["format"] = "tlr-ckpt";
  j["version"] = 1;
  j["registry_hash"] = ck.registry_hash;
  j["kappa"] = ck.kappa;
  j["predicate_ids"] = ck.structure.predicate_ids();
  j["depth"] = ck.structure.members.front().depth;
  json members = json::array();
  for (const auto& s : ck.structure.members) {
    members.push_back({{"temporal", s.temporal},
                       {"cluster_neg", s.cluster_neg},
                       {"cluster_op", s.cluster_op},
                       {"agg_op", s.agg_op}});
  }
  j["members"] = members;
  j["outer_op"] = ck.structure.outer_op;
  j["theta"] = ck.theta.to_map();
  return j.dump();
}

Checkpoint checkpoint_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
  if (j.value("format", "") != "tlr-ckpt") throw ParseError("checkpoint: unknown format header");
  Checkpoint ck;
  ck.registry_hash = j.value("registry_hash", "");
  ck.kappa = j.value("kappa", 10.0);
  auto ids = j.at("predicate_ids").get<std::vector<std::string>>();
  int depth = j.at("depth").get<int>();
  for (const auto& mj : j.at("members")) {
    LogicStructure s;
    s.predicate_ids = ids;
    s.depth = depth;
    s.temporal = mj.at("temporal").get<std::vector<double>>();
    s.cluster_neg = mj.at("cluster_neg").get<std::vector<double>>();
    s.cluster_op = mj.at("cluster_op").get<std::vector<double>>();
    s.agg_op = mj.at("agg_op").get<std::vector<double>>();
    ck.structure.members.push_back(std::move(s));
  }
  ck.structure.outer_op = j.at("outer_op").get<std::vector<double>>();

  PredicateRegistry reg = builtin_registry();
  ck.theta = ThetaMap(reg, ids);
  ck.theta.load_map(j.at("theta").get<std::map<std::string, std::vector<double>>>());
  return ck;
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open '" + path + "' for writing");
  out << checkpoint_to_json(ck) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return checkpoint_from_json(text);
}

} // namespace tlr
