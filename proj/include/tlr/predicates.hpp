#pragma once

#include "tlr/trace.hpp"

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tlr {

enum class PredicateKind { Condition, Action };

struct ParamSpec {
  std::string name;
  std::string unit;
  double def = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

/// Theta-independent measurements of one frame: window aggregates of the ego
/// plan, agent geometry, and map queries. Every builtin predicate is a
/// tanh-squashed margin over these.
struct FrameFeatures {
  // directional peak accelerations over the plan window, m/s^2, >= 0
  double max_acc_f = 0.0, max_acc_b = 0.0, max_acc_l = 0.0, max_acc_r = 0.0;
  double min_ttc = 0.0;            // s, capped
  double min_drivable_sdist = 0.0; // m, min over plan points, capped
  double min_limit_margin = 0.0;   // m/s, min over plan of (lane limit - v)
  double max_speed = 0.0;          // m/s
  double max_lane_dist = 0.0;      // m, max over plan of centerline distance
  double arc_len = 0.0;            // m
  double d_lead = 0.0;             // m, capped when absent
  double v_lead = 0.0;             // m/s, capped when absent
  double d_stop = 0.0;             // m, capped
  double d_red = 0.0;              // m, capped
  double max_curv = 0.0;           // 1/m, max |curvature| along the plan
  double d_agent = 0.0;            // m, capped
  double d_ix = 0.0;               // m, distance to intersection marker, capped
  double d_vru = 0.0;              // m, capped
};

/// Computes the features of one frame. dt is the trace sample interval.
FrameFeatures extract_features(const Frame& frame, double dt);

struct Predicate {
  std::string id;
  PredicateKind kind = PredicateKind::Condition;
  std::vector<ParamSpec> params;
  double scale = 1.0; // margin normalization before tanh
  std::string doc;
  /// Signed physical margin; positive means the predicate holds. When dtheta
  /// is non-null it receives d margin / d theta (params.size() entries).
  /// tie_gap (when non-null) receives the gap to the second-best branch of an
  /// internal min, +inf for smooth margins.
  std::function<double(const FrameFeatures&, std::span<const double>, double*, double*)> margin;
};

class PredicateRegistry {
public:
  /// Throws ConfigError when the id is already registered.
  void add(Predicate p);
  const Predicate& at(const std::string& id) const;
  const Predicate& at(std::size_t index) const { return preds_.at(index); }
  std::size_t index_of(const std::string& id) const;
  bool contains(const std::string& id) const;
  std::size_t size() const { return preds_.size(); }
  std::vector<std::string> ids() const;
  /// FNV-1a hash over ids, parameter specs and scales; identifies the catalog.
  std::string hash() const;

private:
  std::vector<Predicate> preds_;
  std::map<std::string, std::size_t> by_id_;
};

/// The builtin catalog: 10 condition + 6 action predicates.
PredicateRegistry builtin_registry();

/// Parameter values for (a subset of) a registry, flattened in registry order.
class ThetaMap {
public:
  ThetaMap() = default;
  /// Defaults from the registry for the given predicate ids.
  ThetaMap(const PredicateRegistry& reg, const std::vector<std::string>& ids);

  std::span<double> values_for(std::size_t pred_index);
  std::span<const double> values_for(std::size_t pred_index) const;
  std::span<double> flat() { return theta_; }
  std::span<const double> flat() const { return theta_; }
  std::size_t size() const { return theta_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }

  void clip_to_bounds(const PredicateRegistry& reg);
  std::map<std::string, std::vector<double>> to_map() const;
  void load_map(const std::map<std::string, std::vector<double>>& m);

private:
  std::vector<std::string> ids_;
  std::vector<std::size_t> offsets_;
  std::vector<double> theta_;
};

/// value = tanh(margin / scale) in [-1, 1]
double evaluate(const Predicate& p, const FrameFeatures& ff, std::span<const double> theta);
double evaluate(const Predicate& p, const Trace& trace, std::size_t t, std::span<const double> theta);

/// values[t] = evaluate(p, trace, t)
std::vector<double> evaluate_signal(const Predicate& p, const Trace& trace,
                                    std::span<const double> theta);

/// Analytic d value / d theta. tie_gap (optional) reports the internal min's
/// margin to its runner-up, +inf for smooth predicates.
std::vector<double> param_gradient(const Predicate& p, const FrameFeatures& ff,
                                   std::span<const double> theta, double* tie_gap = nullptr);
std::vector<double> param_gradient(const Predicate& p, const Trace& trace, std::size_t t,
                                   std::span<const double> theta, double* tie_gap = nullptr);

/// Comfort margin per the canonical threshold form; thresholds must be positive.
double comfortable(const Trace& trace, std::size_t t, std::span<const double> theta);

/// Feature cache: features per frame for each trace, computed once.
using FeatureTable = std::vector<FrameFeatures>;
FeatureTable compute_features(const Trace& trace);

/// Features of the rolling suffix windows of one plan against one environment
/// frame: entry t equals extract_features of the window plan[t..end] with the
/// agents' matching suffixes. Computes per-point geometry once and aggregates
/// by suffix scans; bit-equal to the frame-by-frame path.
FeatureTable suffix_window_features(const Frame& env, const std::vector<EgoPlanPoint>& plan,
                                    double dt);

} // namespace tlr
