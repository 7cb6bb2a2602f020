#include "tlr/predicates.hpp"

#include "tlr/errors.hpp"
#include "tlr/kernels.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>

namespace tlr {

namespace {

constexpr double kTtcCap = 10.0;     // s
constexpr double kDistCap = 100.0;   // m
constexpr double kMapDistCap = 200.0; // m
constexpr double kSpeedCap = 40.0;   // m/s
constexpr double kSdistCap = 25.0;   // m
constexpr double kEgoRadius = 1.0;   // m
constexpr double kLeadLateral = 2.5; // m half-width of the lead corridor
constexpr double kVruLength = 1.5;   // m, agents shorter than this count as VRUs
const double kInf = std::numeric_limits<double>::infinity();

Vec2 velocity_vec(const EgoPlanPoint& p) {
  return {p.v * std::cos(p.heading), p.v * std::sin(p.heading)};
}

} // namespace

FrameFeatures extract_features(const Frame& frame, double dt) {
  const auto& plan = frame.ego_plan;
  if (plan.size() < 3) throw std::invalid_argument("extract_features: plan needs >= 3 points");
  FrameFeatures ff;

  Kinematics kin = derive_kinematics(plan, dt);
  for (std::size_t i = 0; i < plan.size(); ++i) {
    ff.max_acc_f = std::max(ff.max_acc_f, kin.a_long[i]);
    ff.max_acc_b = std::max(ff.max_acc_b, -kin.a_long[i]);
    ff.max_acc_l = std::max(ff.max_acc_l, kin.a_lat[i]);
    ff.max_acc_r = std::max(ff.max_acc_r, -kin.a_lat[i]);
  }

  const MapContext* map = frame.map.get();
  double min_sdist = kSdistCap, min_limit = kSpeedCap, max_lane_dist = 0.0, max_curv = 0.0;
  double max_speed = 0.0, arc = 0.0;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    Vec2 p = plan[i].pos();
    max_speed = std::max(max_speed, plan[i].v);
    if (i > 0) arc += (p - plan[i - 1].pos()).norm();
    if (map) {
      if (!map->drivable_polygons.empty())
        min_sdist = std::min(min_sdist, map->drivable_signed_distance(p));
      if (auto li = map->nearest_lane(p)) {
        const Lane& lane = map->lanes[*li];
        min_limit = std::min(min_limit, lane.speed_limit - plan[i].v);
        max_lane_dist = std::max(max_lane_dist, lane.centerline.distance(p));
        max_curv = std::max(max_curv, std::abs(map->curvature_at(*li, p)));
      }
    }
  }
  ff.min_drivable_sdist = std::clamp(min_sdist, -kSdistCap, kSdistCap);
  ff.min_limit_margin = min_limit;
  ff.max_lane_dist = max_lane_dist;
  ff.max_curv = max_curv;
  ff.max_speed = max_speed;
  ff.arc_len = arc;

  // agent-derived features
  double min_ttc = kTtcCap, d_lead = kDistCap, v_lead = kSpeedCap;
  double d_agent = kDistCap, d_vru = kDistCap;
  Vec2 ego0 = plan[0].pos();
  double ch = std::cos(plan[0].heading), sh = std::sin(plan[0].heading);
  for (const auto& agent : frame.agents) {
    if (agent.points.empty()) continue;
    double radius = kEgoRadius + agent.radius();
    std::size_t steps = std::min(plan.size(), agent.points.size());
    for (std::size_t k = 0; k < steps; ++k) {
      Vec2 rel = agent.points[k].pos() - plan[k].pos();
      Vec2 rv = velocity_vec(agent.points[k]) - velocity_vec(plan[k]);
      min_ttc = std::min(min_ttc, time_to_radius(rel, rv, radius));
    }
    Vec2 rel0 = agent.points[0].pos() - ego0;
    double lon = rel0.x * ch + rel0.y * sh;
    double lat = -rel0.x * sh + rel0.y * ch;
    double dist = rel0.norm();
    d_agent = std::min(d_agent, dist);
    if (agent.length < kVruLength) d_vru = std::min(d_vru, dist);
    if (lon > 0.0 && lon < d_lead && std::abs(lat) <= kLeadLateral) {
      d_lead = lon;
      v_lead = agent.points[0].v;
    }
  }
  ff.min_ttc = std::min(min_ttc, kTtcCap);
  ff.d_lead = d_lead;
  ff.v_lead = v_lead;
  ff.d_agent = d_agent;
  ff.d_vru = d_vru;

  double d_stop = kMapDistCap, d_red = kMapDistCap, d_ix = kMapDistCap;
  if (map) {
    for (const auto& s : map->stop_points) {
      double d = (s - ego0).norm();
      d_stop = std::min(d_stop, d);
      d_ix = std::min(d_ix, d);
    }
    for (const auto& tl : map->traffic_lights) {
      double d = (tl.position - ego0).norm();
      if (tl.state == LightState::Red) d_red = std::min(d_red, d);
      d_ix = std::min(d_ix, d);
    }
  }
  ff.d_stop = d_stop;
  ff.d_red = d_red;
  ff.d_ix = d_ix;
  return ff;
}

// ---------------------------------------------------------------------------

void PredicateRegistry::add(Predicate p) {
  if (by_id_.count(p.id)) throw ConfigError("predicate '" + p.id + "' already registered");
  by_id_[p.id] = preds_.size();
  preds_.push_back(std::move(p));
}

const Predicate& PredicateRegistry::at(const std::string& id) const {
  return preds_[index_of(id)];
}

std::size_t PredicateRegistry::index_of(const std::string& id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) throw ConfigError("unknown predicate '" + id + "'");
  return it->second;
}

bool PredicateRegistry::contains(const std::string& id) const { return by_id_.count(id) > 0; }

std::vector<std::string> PredicateRegistry::ids() const {
  std::vector<std::string> out;
  out.reserve(preds_.size());
  for (const auto& p : preds_) out.push_back(p.id);
  return out;
}

std::string PredicateRegistry::hash() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ull;
    }
    h ^= 0xff;
    h *= 1099511628211ull;
  };
  for (const auto& p : preds_) {
    mix(p.id);
    mix(p.kind == PredicateKind::Condition ? "c" : "a");
    mix(std::to_string(p.scale));
    for (const auto& ps : p.params) {
      mix(ps.name);
      mix(std::to_string(ps.def));
      mix(std::to_string(ps.lo));
      mix(std::to_string(ps.hi));
    }
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

namespace {

// margin = sign * (feature - theta[0]); featureof picks the measurement.
Predicate threshold_pred(std::string id, PredicateKind kind, ParamSpec param, double scale,
                         std::string doc, double sign, double FrameFeatures::* member) {
  Predicate p;
  p.id = std::move(id);
  p.kind = kind;
  p.params = {std::move(param)};
  p.scale = scale;
  p.doc = std::move(doc);
  p.margin = [sign, member](const FrameFeatures& ff, std::span<const double> theta, double* dtheta,
                            double* tie) {
    if (dtheta) dtheta[0] = -sign;
    if (tie) *tie = kInf;
    return sign * (ff.*member - theta[0]);
  };
  return p;
}

} // namespace

PredicateRegistry builtin_registry() {
  PredicateRegistry reg;

  // conditions --------------------------------------------------------------
  reg.add(threshold_pred("SafeTTC", PredicateKind::Condition,
                         {"ttc_min", "s", 1.0, 0.2, 8.0}, 1.0,
                         "minimum time-to-collision over the window exceeds the threshold",
                         +1.0, &FrameFeatures::min_ttc));
  reg.add(threshold_pred("LeadVehicleAhead", PredicateKind::Condition,
                         {"range", "m", 30.0, 5.0, 80.0}, 5.0,
                         "a vehicle occupies the ego corridor within range",
                         -1.0, &FrameFeatures::d_lead));
  reg.add(threshold_pred("ApproachingStop", PredicateKind::Condition,
                         {"range", "m", 15.0, 2.0, 60.0}, 5.0,
                         "a stop point lies within range of the ego position",
                         -1.0, &FrameFeatures::d_stop));
  reg.add(threshold_pred("TrafficLightRed", PredicateKind::Condition,
                         {"range", "m", 40.0, 5.0, 100.0}, 5.0,
                         "a red signal lies within range",
                         -1.0, &FrameFeatures::d_red));
  reg.add(threshold_pred("HighLaneCurvature", PredicateKind::Condition,
                         {"curv_max", "1/m", 0.03, 0.003, 0.5}, 0.02,
                         "peak lane curvature along the plan exceeds the threshold",
                         +1.0, &FrameFeatures::max_curv));
  reg.add(threshold_pred("AgentNearby", PredicateKind::Condition,
                         {"range", "m", 10.0, 1.0, 40.0}, 2.0,
                         "any agent within range at the window start",
                         -1.0, &FrameFeatures::d_agent));
  reg.add(threshold_pred("InIntersection", PredicateKind::Condition,
                         {"range", "m", 20.0, 2.0, 60.0}, 5.0,
                         "an intersection marker (stop point or signal) within range",
                         -1.0, &FrameFeatures::d_ix));
  {
    Predicate p;
    p.id = "OvertakingContext";
    p.kind = PredicateKind::Condition;
    p.params = {{"dv_min", "m/s", 2.0, 0.2, 10.0}};
    p.scale = 1.0;
    p.doc = "ego plans to pass a corridor vehicle faster than it by dv_min";
    p.margin = [](const FrameFeatures& ff, std::span<const double> theta, double* dtheta,
                  double* tie) {
      if (dtheta) dtheta[0] = -1.0;
      if (tie) *tie = kInf;
      return (ff.max_speed - ff.v_lead) - theta[0];
    };
    reg.add(std::move(p));
  }
  reg.add(threshold_pred("SlowLeadVehicle", PredicateKind::Condition,
                         {"v_max", "m/s", 5.0, 0.5, 20.0}, 1.0,
                         "the corridor lead vehicle moves slower than v_max",
                         -1.0, &FrameFeatures::v_lead));
  reg.add(threshold_pred("NearVRU", PredicateKind::Condition,
                         {"range", "m", 15.0, 2.0, 50.0}, 2.0,
                         "a vulnerable road user within range",
                         -1.0, &FrameFeatures::d_vru));

  // actions -----------------------------------------------------------------
  {
    Predicate p;
    p.id = "Comfortable";
    p.kind = PredicateKind::Action;
    p.params = {{"acc_fwd", "m/s^2", 3.0, 0.1, 8.0},
                {"acc_back", "m/s^2", 3.0, 0.1, 8.0},
                {"acc_left", "m/s^2", 3.0, 0.1, 8.0},
                {"acc_right", "m/s^2", 3.0, 0.1, 8.0}};
    p.scale = 1.0;
    p.doc = "peak window acceleration stays below its threshold in all four directions";
    p.margin = [](const FrameFeatures& ff, std::span<const double> theta, double* dtheta,
                  double* tie) {
      const double acc[4] = {ff.max_acc_f, ff.max_acc_b, ff.max_acc_l, ff.max_acc_r};
      double best = kInf, second = kInf;
      int arg = 0;
      for (int i = 0; i < 4; ++i) {
        double m = theta[i] - acc[i];
        if (m < best) {
          second = best;
          best = m;
          arg = i;
        } else if (m < second) {
          second = m;
        }
      }
      if (dtheta) {
        for (int i = 0; i < 4; ++i) dtheta[i] = i == arg ? 1.0 : 0.0;
      }
      if (tie) *tie = second - best;
      return best;
    };
    reg.add(std::move(p));
  }
  reg.add(threshold_pred("InDrivable", PredicateKind::Action,
                         {"clearance", "m", 0.0, -1.0, 3.0}, 1.0,
                         "the plan keeps at least `clearance` inside the drivable area",
                         +1.0, &FrameFeatures::min_drivable_sdist));
  reg.add(threshold_pred("SpeedLimitCompliant", PredicateKind::Action,
                         {"tolerance", "m/s", 0.0, -5.0, 5.0}, 1.0,
                         "plan speed stays below the lane limit minus tolerance",
                         +1.0, &FrameFeatures::min_limit_margin));
  reg.add(threshold_pred("Stopped", PredicateKind::Action,
                         {"v_max", "m/s", 1.0, 0.05, 3.0}, 0.5,
                         "the plan stays below v_max throughout the window",
                         -1.0, &FrameFeatures::max_speed));
  reg.add(threshold_pred("InLane", PredicateKind::Action,
                         {"offset_max", "m", 1.5, 0.2, 3.0}, 0.5,
                         "the plan stays within offset_max of a lane centerline",
                         -1.0, &FrameFeatures::max_lane_dist));
  reg.add(threshold_pred("ProgressMade", PredicateKind::Action,
                         {"dist_min", "m", 1.0, 0.1, 30.0}, 2.0,
                         "the plan advances at least dist_min along its path",
                         +1.0, &FrameFeatures::arc_len));
  return reg;
}

// ---------------------------------------------------------------------------

ThetaMap::ThetaMap(const PredicateRegistry& reg, const std::vector<std::string>& ids) : ids_(ids) {
  offsets_.reserve(ids.size());
  for (const auto& id : ids) {
    const Predicate& p = reg.at(id);
    offsets_.push_back(theta_.size());
    for (const auto& ps : p.params) theta_.push_back(ps.def);
  }
}

std::span<double> ThetaMap::values_for(std::size_t i) {
  std::size_t end = i + 1 < offsets_.size() ? offsets_[i + 1] : theta_.size();
  return std::span<double>(theta_).subspan(offsets_[i], end - offsets_[i]);
}

std::span<const double> ThetaMap::values_for(std::size_t i) const {
  std::size_t end = i + 1 < offsets_.size() ? offsets_[i + 1] : theta_.size();
  return std::span<const double>(theta_).subspan(offsets_[i], end - offsets_[i]);
}

void ThetaMap::clip_to_bounds(const PredicateRegistry& reg) {
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    const Predicate& p = reg.at(ids_[i]);
    auto vals = values_for(i);
    for (std::size_t k = 0; k < vals.size(); ++k)
      vals[k] = std::clamp(vals[k], p.params[k].lo, p.params[k].hi);
  }
}

std::map<std::string, std::vector<double>> ThetaMap::to_map() const {
  std::map<std::string, std::vector<double>> out;
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    auto v = values_for(i);
    out[ids_[i]] = std::vector<double>(v.begin(), v.end());
  }
  return out;
}

void ThetaMap::load_map(const std::map<std::string, std::vector<double>>& m) {
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    auto it = m.find(ids_[i]);
    if (it == m.end()) continue;
    auto v = values_for(i);
    if (it->second.size() != v.size())
      throw ConfigError("theta size mismatch for '" + ids_[i] + "'");
    std::copy(it->second.begin(), it->second.end(), v.begin());
  }
}

// ---------------------------------------------------------------------------

double evaluate(const Predicate& p, const FrameFeatures& ff, std::span<const double> theta) {
  return std::tanh(p.margin(ff, theta, nullptr, nullptr) / p.scale);
}

double evaluate(const Predicate& p, const Trace& trace, std::size_t t, std::span<const double> theta) {
  if (t >= trace.frames.size()) throw std::out_of_range("frame index out of range");
  return evaluate(p, extract_features(trace.frames[t], trace.dt()), theta);
}

std::vector<double> evaluate_signal(const Predicate& p, const Trace& trace,
                                    std::span<const double> theta) {
  std::vector<double> out;
  out.reserve(trace.frames.size());
  for (std::size_t t = 0; t < trace.frames.size(); ++t) out.push_back(evaluate(p, trace, t, theta));
  return out;
}

std::vector<double> param_gradient(const Predicate& p, const FrameFeatures& ff,
                                   std::span<const double> theta, double* tie_gap) {
  std::vector<double> dm(p.params.size(), 0.0);
  double m = p.margin(ff, theta, dm.data(), tie_gap);
  double u = m / p.scale;
  double sech2 = 1.0 - std::tanh(u) * std::tanh(u);
  for (auto& g : dm) g *= sech2 / p.scale;
  return dm;
}

std::vector<double> param_gradient(const Predicate& p, const Trace& trace, std::size_t t,
                                   std::span<const double> theta, double* tie_gap) {
  if (t >= trace.frames.size()) throw std::out_of_range("frame index out of range");
  return param_gradient(p, extract_features(trace.frames[t], trace.dt()), theta, tie_gap);
}

double comfortable(const Trace& trace, std::size_t t, std::span<const double> theta) {
  for (double v : theta)
    if (!(v > 0.0)) throw std::invalid_argument("comfortable: thresholds must be positive");
  static const Predicate& pred = []() -> const Predicate& {
    static PredicateRegistry reg = builtin_registry();
    return reg.at("Comfortable");
  }();
  return evaluate(pred, trace, t, theta);
}

FeatureTable compute_features(const Trace& trace) {
  FeatureTable out;
  out.reserve(trace.frames.size());
  for (const auto& fr : trace.frames) out.push_back(extract_features(fr, trace.dt()));
  return out;
}

FeatureTable suffix_window_features(const Frame& env, const std::vector<EgoPlanPoint>& plan,
                                    double dt) {
  const std::size_t n = plan.size();
  if (n < 3) throw std::invalid_argument("suffix_window_features: plan needs >= 3 points");
  for (const auto& a : env.agents) {
    if (a.points.size() != n) {
      // unaligned tracks: fall back to the direct per-window path
      FeatureTable out;
      for (std::size_t t = 0; t + 2 < n; ++t) {
        Frame fr;
        fr.map = env.map;
        fr.ego_plan.assign(plan.begin() + static_cast<long>(t), plan.end());
        for (const auto& agent : env.agents) {
          AgentTrack cut = agent;
          if (t < agent.points.size())
            cut.points.assign(agent.points.begin() + static_cast<long>(t), agent.points.end());
          else
            cut.points.assign(1, agent.points.empty() ? EgoPlanPoint{} : agent.points.back());
          fr.agents.push_back(std::move(cut));
        }
        out.push_back(extract_features(fr, dt));
      }
      return out;
    }
  }

  const MapContext* map = env.map.get();
  const double inv_dt2 = 1.0 / (dt * dt);

  // central-stencil directional accelerations at interior points; a window
  // [t..n-1] aggregates exactly indices [t+1 .. n-2] (the one-sided endpoint
  // stencils duplicate their interior neighbors)
  std::vector<double> af(n, 0.0), ab(n, 0.0), al(n, 0.0), ar(n, 0.0);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    Vec2 acc = (plan[i + 1].pos() - plan[i].pos() - (plan[i].pos() - plan[i - 1].pos())) * inv_dt2;
    double ch = std::cos(plan[i].heading), sh = std::sin(plan[i].heading);
    double lon = acc.x * ch + acc.y * sh;
    double lat = -acc.x * sh + acc.y * ch;
    af[i] = std::max(lon, 0.0);
    ab[i] = std::max(-lon, 0.0);
    al[i] = std::max(lat, 0.0);
    ar[i] = std::max(-lat, 0.0);
  }

  // per-point map metrics and agent metrics
  const bool has_drivable = map && !map->drivable_polygons.empty();
  const bool has_lanes = map && !map->lanes.empty();
  std::vector<double> sdist(n, kSdistCap), limit(n, kSpeedCap), lane_d(n, 0.0), curv(n, 0.0);
  std::vector<double> speed(n), seg(n, 0.0), ttc(n, kTtcCap);
  std::vector<double> d_lead(n, kDistCap), v_lead(n, kSpeedCap), d_agent(n, kDistCap),
      d_vru(n, kDistCap), d_stop(n, kMapDistCap), d_red(n, kMapDistCap), d_ix(n, kMapDistCap);

  for (std::size_t i = 0; i < n; ++i) {
    Vec2 p = plan[i].pos();
    speed[i] = plan[i].v;
    if (i + 1 < n) seg[i] = (plan[i + 1].pos() - p).norm();
    if (has_drivable) sdist[i] = map->drivable_signed_distance(p);
    if (has_lanes) {
      auto li = map->nearest_lane(p);
      const Lane& lane = map->lanes[*li];
      limit[i] = lane.speed_limit - plan[i].v;
      lane_d[i] = lane.centerline.distance(p);
      curv[i] = std::abs(map->curvature_at(*li, p));
    }
    if (map) {
      for (const auto& s : map->stop_points) {
        double d = (s - p).norm();
        d_stop[i] = std::min(d_stop[i], d);
        d_ix[i] = std::min(d_ix[i], d);
      }
      for (const auto& tl : map->traffic_lights) {
        double d = (tl.position - p).norm();
        if (tl.state == LightState::Red) d_red[i] = std::min(d_red[i], d);
        d_ix[i] = std::min(d_ix[i], d);
      }
    }
    double ch = std::cos(plan[i].heading), sh = std::sin(plan[i].heading);
    for (const auto& agent : env.agents) {
      double radius = kEgoRadius + agent.radius();
      Vec2 rel = agent.points[i].pos() - p;
      Vec2 rv = velocity_vec(agent.points[i]) - velocity_vec(plan[i]);
      ttc[i] = std::min(ttc[i], time_to_radius(rel, rv, radius));
      double lon = rel.x * ch + rel.y * sh;
      double lat = -rel.x * sh + rel.y * ch;
      double dist = rel.norm();
      d_agent[i] = std::min(d_agent[i], dist);
      if (agent.length < kVruLength) d_vru[i] = std::min(d_vru[i], dist);
      if (lon > 0.0 && lon < d_lead[i] && std::abs(lat) <= kLeadLateral) {
        d_lead[i] = lon;
        v_lead[i] = agent.points[i].v;
      }
    }
  }

  // suffix aggregates; acceleration suffixes run over the interior only
  auto sfx_max = [](std::vector<double>& v) {
    for (std::size_t i = v.size() - 1; i-- > 0;) v[i] = std::max(v[i], v[i + 1]);
  };
  auto sfx_min = [](std::vector<double>& v) {
    for (std::size_t i = v.size() - 1; i-- > 0;) v[i] = std::min(v[i], v[i + 1]);
  };
  std::vector<double> s_af(af.begin() + 1, af.end() - 1), s_ab(ab.begin() + 1, ab.end() - 1),
      s_al(al.begin() + 1, al.end() - 1), s_ar(ar.begin() + 1, ar.end() - 1);
  sfx_max(s_af);
  sfx_max(s_ab);
  sfx_max(s_al);
  sfx_max(s_ar);
  std::vector<double> s_sdist = sdist, s_limit = limit, s_laned = lane_d, s_curv = curv,
                      s_speed = speed, s_ttc = ttc;
  sfx_min(s_sdist);
  sfx_min(s_limit);
  sfx_max(s_laned);
  sfx_max(s_curv);
  sfx_max(s_speed);
  sfx_min(s_ttc);
  // arc length accumulates forward per window so the result is bit-equal to
  // the frame-by-frame path (FP addition is order-sensitive)
  std::vector<double> arc_fwd(n - 2, 0.0);
  for (std::size_t t = 0; t + 2 < n; ++t) {
    double arc = 0.0;
    for (std::size_t i = t; i + 1 < n; ++i) arc += seg[i];
    arc_fwd[t] = arc;
  }

  FeatureTable out;
  out.reserve(n - 2);
  for (std::size_t t = 0; t + 2 < n; ++t) {
    FrameFeatures ff;
    ff.max_acc_f = s_af[t];
    ff.max_acc_b = s_ab[t];
    ff.max_acc_l = s_al[t];
    ff.max_acc_r = s_ar[t];
    ff.min_drivable_sdist = std::clamp(s_sdist[t], -kSdistCap, kSdistCap);
    ff.min_limit_margin = s_limit[t];
    ff.max_lane_dist = s_laned[t];
    ff.max_curv = s_curv[t];
    ff.max_speed = s_speed[t];
    ff.arc_len = arc_fwd[t];
    ff.min_ttc = std::min(s_ttc[t], kTtcCap);
    ff.d_lead = d_lead[t];
    ff.v_lead = v_lead[t];
    ff.d_agent = d_agent[t];
    ff.d_vru = d_vru[t];
    ff.d_stop = d_stop[t];
    ff.d_red = d_red[t];
    ff.d_ix = d_ix[t];
    out.push_back(ff);
  }
  return out;
}

} // namespace tlr
