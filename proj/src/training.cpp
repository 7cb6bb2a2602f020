#include "tlr/training.hpp"

#include "tlr/threading.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace tlr {

double objective(const EnsembleStructure& ens, const std::vector<SignalMatrix>& batch,
                 double kappa, unsigned threads) {
  if (batch.empty()) throw std::invalid_argument("objective over empty batch");
  auto scores = forward_batch(ens, batch, kappa, threads);
  return std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
}

namespace {

void adam_ascent(std::span<double> params, std::span<const double> grads, AdamState& opt,
                 double lr) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  opt.step += 1;
  double c1 = 1.0 - std::pow(b1, static_cast<double>(opt.step));
  double c2 = 1.0 - std::pow(b2, static_cast<double>(opt.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    double g = grads[i];
    opt.m1[i] = b1 * opt.m1[i] + (1.0 - b1) * g;
    opt.m2[i] = b2 * opt.m2[i] + (1.0 - b2) * g * g;
    double mhat = opt.m1[i] / c1;
    double vhat = opt.m2[i] / c2;
    params[i] += lr * mhat / (std::sqrt(vhat) + eps);
  }
}

} // namespace

void update_step(EnsembleStructure& ens, ThetaMap& theta, std::span<const double> gate_grad,
                 std::span<const double> theta_grad, AdamState& opt, double lr,
                 double theta_lr) {
  std::vector<double> params = weights_flat(ens);
  auto th = theta.flat();
  if (gate_grad.size() != params.size() || theta_grad.size() != th.size())
    throw std::logic_error("update_step: gradient shape mismatch");
  if (opt.m1.size() != params.size()) opt.init(params.size());

  adam_ascent(params, gate_grad, opt, lr);
  set_weights_flat(ens, params);

  // Theta ascends by the raw scaled gradient. Adam's per-parameter
  // normalization would turn the vanishing gradients of saturated predicate
  // margins into full-size steps and overpower the sign-step tightening, so
  // thresholds could never travel from their permissive defaults.
  for (std::size_t i = 0; i < th.size(); ++i) th[i] += theta_lr * theta_grad[i];
}

void regularize_step(EnsembleStructure& ens, ThetaMap& theta, std::span<const double> theta_grad,
                     const PredicateRegistry& reg, double alpha, double beta, double w_max) {
  auto th = theta.flat();
  if (theta_grad.size() != th.size()) throw std::logic_error("regularize_step: theta shape mismatch");
  for (std::size_t i = 0; i < th.size(); ++i) {
    double s = theta_grad[i] > 0.0 ? 1.0 : theta_grad[i] < 0.0 ? -1.0 : 0.0;
    th[i] -= alpha * s;
  }
  theta.clip_to_bounds(reg);

  if (beta != 0.0) {
    for_each_weight(ens, [&](double& w, const WeightTag& tag) {
      bool agg = tag.kind == WeightTag::Kind::AggOp || tag.kind == WeightTag::Kind::OuterOp;
      if (agg && tag.slot == 0) w = std::min(w + beta, w_max);
    });
  }
}

namespace {

struct Snapshot {
  std::vector<double> weights;
  std::vector<double> theta;
};

} // namespace

TrainResult train(const Dataset& data, const PredicateRegistry& reg, EnsembleStructure initial,
                  const TrainConfig& cfg) {
  auto train_idx = data.train_indices();
  auto val_idx = data.val_indices();
  if (train_idx.empty() || val_idx.empty())
    throw std::invalid_argument("train: dataset needs non-empty train and validation splits");
  if (cfg.batch_size < 1) throw std::invalid_argument("train: batch size must be >= 1");

  const auto& ids = initial.predicate_ids();
  ThetaMap theta(reg, ids);
  unsigned threads = resolve_threads(cfg.threads);

  // Geometry is theta-independent; compute it once per trace.
  std::vector<FeatureTable> features(data.traces.size());
  parallel_for(data.traces.size(), threads,
               [&](std::size_t i) { features[i] = compute_features(data.traces[i]); });

  auto signals_for = [&](const std::vector<std::size_t>& idx, bool with_dtheta) {
    std::vector<SignalMatrix> out(idx.size());
    parallel_for(idx.size(), threads, [&](std::size_t i) {
      out[i] = compute_signal_matrix(reg, ids, features[idx[i]], theta, with_dtheta);
    });
    return out;
  };

  EnsembleStructure ens = std::move(initial);
  AdamState opt;
  TrainReport report;
  Snapshot best;
  double best_val = -std::numeric_limits<double>::infinity();
  int best_epoch = 0;

  const std::size_t n_gates = weight_count(ens);
  std::vector<std::size_t> order(train_idx);

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::mt19937_64 shuffle_rng(cfg.seed * 0x2545f4914f6cdd1dull + static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double epoch_obj = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<std::size_t> batch_idx(order.begin() + static_cast<long>(start),
                                         order.begin() + static_cast<long>(end));
      auto batch = signals_for(batch_idx, true);

      std::vector<NetworkGrad> grads(batch.size());
      parallel_for(batch.size(), threads,
                   [&](std::size_t i) { grads[i] = network_gradient(ens, batch[i], cfg.kappa); });

      std::vector<double> gate_grad(n_gates, 0.0);
      std::vector<double> theta_grad(theta.size(), 0.0);
      double obj = 0.0;
      for (std::size_t bi = 0; bi < grads.size(); ++bi) {
        const auto& g = grads[bi];
        obj += g.score;
        for (std::size_t i = 0; i < n_gates; ++i) gate_grad[i] += g.gate[i];
        auto tg = theta_gradient(batch[bi], g.signal);
        for (std::size_t i = 0; i < tg.size(); ++i) theta_grad[i] += tg[i];
      }
      const double inv_b = 1.0 / static_cast<double>(batch.size());
      obj *= inv_b;
      for (auto& g : gate_grad) g *= inv_b;
      for (auto& g : theta_grad) g *= inv_b;

      update_step(ens, theta, gate_grad, theta_grad, opt, cfg.lr, cfg.theta_lr);
      theta.clip_to_bounds(reg);
      regularize_step(ens, theta, theta_grad, reg, cfg.alpha, cfg.beta, cfg.w_max);

      epoch_obj += obj;
      ++batches;
    }

    auto val_signals = signals_for(val_idx, false);
    double val = objective(ens, val_signals, cfg.kappa, threads);
    report.train_obj.push_back(epoch_obj / static_cast<double>(batches));
    report.val_obj.push_back(val);
    report.epochs_run = epoch;

    if (val > best_val) {
      best_val = val;
      best_epoch = epoch;
      best.weights = weights_flat(ens);
      auto th = theta.flat();
      best.theta.assign(th.begin(), th.end());
    }
    if (epoch - best_epoch >= cfg.patience) break;
  }

  report.best_epoch = best_epoch;

  TrainResult result;
  result.final_structure = ens;
  result.final_theta = theta;
  set_weights_flat(ens, best.weights);
  std::copy(best.theta.begin(), best.theta.end(), theta.flat().begin());
  result.structure = std::move(ens);
  result.theta = std::move(theta);
  result.report = std::move(report);
  return result;
}

} // namespace tlr
