#pragma once

#include "tlr/logic_network.hpp"
#include "tlr/predicates.hpp"
#include "tlr/trace.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace tlr {

struct TrainConfig {
  double lr = 1e-4;       // Adam step size for the gate weights
  double theta_lr = 1e-4; // plain-gradient ascent rate for predicate parameters
  double alpha = 1e-5;    // per-batch parameter tightening rate
  double beta = 1e-3;     // per-batch aggregation AND bias
  double w_max = 40.0;    // cap for the biased AND weights
  int batch_size = 32;
  int patience = 10;      // epochs without validation improvement
  int max_epochs = 400;
  double kappa = 10.0;    // soft-semantics temperature
  std::uint64_t seed = 0;
  unsigned threads = 0;   // 0 = hardware concurrency
};

struct AdamState {
  std::vector<double> m1;
  std::vector<double> m2;
  long step = 0;

  void init(std::size_t n) {
    m1.assign(n, 0.0);
    m2.assign(n, 0.0);
    step = 0;
  }
};

struct TrainReport {
  std::vector<double> train_obj; // mean batch objective per epoch, from 1
  std::vector<double> val_obj;
  int epochs_run = 0;
  int best_epoch = 0; // 1-based epoch of the returned snapshot
};

struct TrainResult {
  // best-validation snapshot (the deployed model)
  EnsembleStructure structure;
  ThetaMap theta;
  // state at the last epoch; regularization-driven parameter movement
  // continues past the validation peak, so convergence studies read this
  EnsembleStructure final_structure;
  ThetaMap final_theta;
  TrainReport report;
};

/// Mean soft score over the batch (the maximized objective).
double objective(const EnsembleStructure& ens, const std::vector<SignalMatrix>& batch,
                 double kappa, unsigned threads = 1);

/// One ascent step: bias-corrected Adam on the gate weights, plain scaled
/// gradient on theta (whose rate theta_lr keeps saturated-margin noise from
/// being amplified into full-size steps against the tightening regularizer).
void update_step(EnsembleStructure& ens, ThetaMap& theta, std::span<const double> gate_grad,
                 std::span<const double> theta_grad, AdamState& opt, double lr,
                 double theta_lr);

/// Sign-step tightening of theta (clipped to bounds) and AND-bias on every
/// aggregation gate, including the ensemble's outer layer.
void regularize_step(EnsembleStructure& ens, ThetaMap& theta, std::span<const double> theta_grad,
                     const PredicateRegistry& reg, double alpha, double beta, double w_max);

/// Full training loop: batched score maximization with both regularizers and
/// validation-based early stopping; returns the best-validation snapshot.
TrainResult train(const Dataset& data, const PredicateRegistry& reg, EnsembleStructure initial,
                  const TrainConfig& cfg);

} // namespace tlr
