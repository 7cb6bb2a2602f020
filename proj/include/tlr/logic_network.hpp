#pragma once

#include "tlr/predicates.hpp"
#include "tlr/semantics.hpp"
#include "tlr/trace.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace tlr {

/// Canonical cluster order: (i, j) pairs with i < j, lexicographic.
struct ClusterPair {
  int i = 0;
  int j = 0;
};
std::vector<ClusterPair> cluster_pairs(std::size_t n);

/// Learnable scoring structure over N predicates: `depth` temporal layers
/// (selection gates over {G, F, id} per predicate), one propositional layer
/// (all pairs, each with two negation gates and a {and, or} selection gate),
/// and a left-to-right aggregation chain.
struct LogicStructure {
  std::vector<std::string> predicate_ids;
  int depth = 1;
  std::vector<double> temporal;    // depth * N * 3, slots [G, F, id]
  std::vector<double> cluster_neg; // C * 2
  std::vector<double> cluster_op;  // C * 2, slots [and, or]
  std::vector<double> agg_op;      // (C-1) * 2, slots [and, or]

  std::size_t n() const { return predicate_ids.size(); }
  std::size_t cluster_count() const { return n() * (n() - 1) / 2; }

  double& temporal_w(int layer, std::size_t pred, int slot) {
    return temporal[(static_cast<std::size_t>(layer) * n() + pred) * 3 + static_cast<std::size_t>(slot)];
  }
  double temporal_w(int layer, std::size_t pred, int slot) const {
    return temporal[(static_cast<std::size_t>(layer) * n() + pred) * 3 + static_cast<std::size_t>(slot)];
  }
  double& neg_w(std::size_t cluster, int side) { return cluster_neg[cluster * 2 + static_cast<std::size_t>(side)]; }
  double neg_w(std::size_t cluster, int side) const { return cluster_neg[cluster * 2 + static_cast<std::size_t>(side)]; }
  double& op_w(std::size_t cluster, int slot) { return cluster_op[cluster * 2 + static_cast<std::size_t>(slot)]; }
  double op_w(std::size_t cluster, int slot) const { return cluster_op[cluster * 2 + static_cast<std::size_t>(slot)]; }
  double& agg_w(std::size_t gate, int slot) { return agg_op[gate * 2 + static_cast<std::size_t>(slot)]; }
  double agg_w(std::size_t gate, int slot) const { return agg_op[gate * 2 + static_cast<std::size_t>(slot)]; }
};

struct EnsembleStructure {
  std::vector<LogicStructure> members;
  std::vector<double> outer_op; // (k-1) * 2, slots [and, or]

  std::size_t k() const { return members.size(); }
  const std::vector<std::string>& predicate_ids() const { return members.front().predicate_ids; }
};

/// Near-uniform selection weights; negation weights away from the zero saddle.
/// Deterministic per seed. Throws std::invalid_argument for N < 2 or depth < 1.
LogicStructure build_structure(std::vector<std::string> predicate_ids, int depth, std::uint64_t seed);

/// k = 1 reduces to the single member. Members must share one predicate list.
EnsembleStructure make_ensemble(std::vector<LogicStructure> members, std::uint64_t seed);
EnsembleStructure build_ensemble(const std::vector<std::string>& predicate_ids, int depth,
                                 std::size_t k, std::uint64_t seed);

// --- weight traversal ------------------------------------------------------

struct WeightTag {
  enum class Kind { Temporal, ClusterNeg, ClusterOp, AggOp, OuterOp };
  Kind kind;
  int member;
  int layer;   // Temporal
  int pred;    // Temporal
  int cluster; // ClusterNeg/ClusterOp
  int gate;    // AggOp/OuterOp
  int slot;
};

/// Visits every weight in the canonical (checkpoint/gradient) order.
void for_each_weight(EnsembleStructure& ens, const std::function<void(double&, const WeightTag&)>& fn);
void for_each_weight(const EnsembleStructure& ens,
                     const std::function<void(double, const WeightTag&)>& fn);
std::size_t weight_count(const EnsembleStructure& ens);
std::vector<double> weights_flat(const EnsembleStructure& ens);
void set_weights_flat(EnsembleStructure& ens, std::span<const double> w);

// --- signals ---------------------------------------------------------------

/// Predicate values over a trace plus their theta sensitivities.
struct SignalMatrix {
  std::size_t n = 0;
  std::size_t steps = 0;
  std::vector<double> values;             // n * steps
  std::vector<double> dtheta;             // per pred: params * steps
  std::vector<std::size_t> param_offsets; // per pred, start row into dtheta
  std::vector<std::size_t> param_counts;

  std::span<const double> value_row(std::size_t i) const {
    return std::span<const double>(values).subspan(i * steps, steps);
  }
};

SignalMatrix compute_signal_matrix(const PredicateRegistry& reg,
                                   const std::vector<std::string>& ids, const FeatureTable& feats,
                                   const ThetaMap& theta, bool with_dtheta = false);

// --- evaluation ------------------------------------------------------------

/// Soft score in [-1, 1]; differentiable in every gate weight and theta.
double forward(const EnsembleStructure& ens, const SignalMatrix& sig, double kappa);
/// Same pipeline under exact min/max semantics (gates still blend by softmax).
double forward_hard(const EnsembleStructure& ens, const SignalMatrix& sig);

double forward(const EnsembleStructure& ens, const PredicateRegistry& reg, const Trace& trace,
               const ThetaMap& theta, double kappa);

std::vector<double> forward_batch(const EnsembleStructure& ens,
                                  const std::vector<SignalMatrix>& batch, double kappa,
                                  unsigned threads = 1);

struct NetworkGrad {
  double score = 0.0;
  std::vector<double> gate;   // d score / d weight, canonical order
  std::vector<double> signal; // d score / d signal value, n * steps
};

/// Reverse-mode gradient of the soft score for one trace.
NetworkGrad network_gradient(const EnsembleStructure& ens, const SignalMatrix& sig, double kappa);

/// Chains signal gradients through the predicate shapes: d score / d theta.
std::vector<double> theta_gradient(const SignalMatrix& sig, std::span<const double> signal_grad);

// --- checkpoints -----------------------------------------------------------

struct Checkpoint {
  EnsembleStructure structure;
  ThetaMap theta;
  std::string registry_hash;
  double kappa = 10.0;
};

std::string checkpoint_to_json(const Checkpoint& ck);
Checkpoint checkpoint_from_json(const std::string& text);
void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

} // namespace tlr
