#include "tlr/scenario.hpp"

#include "tlr/errors.hpp"
#include "tlr/semantics.hpp"
#include "tlr/threading.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

namespace tlr {

namespace {
constexpr double kLaneWidth = 3.5;
constexpr double kSpeedLimit = 13.9;
const double kStandardComfort[4] = {1.23, 1.13, 0.98, 0.98};
} // namespace

const std::vector<ScenarioKind>& all_scenario_kinds() {
  static const std::vector<ScenarioKind> kinds = {
      ScenarioKind::Following,  ScenarioKind::Stopping, ScenarioKind::Turn,
      ScenarioKind::ChangeLane, ScenarioKind::NearStatic, ScenarioKind::Stationary,
      ScenarioKind::Starting,   ScenarioKind::Traversing, ScenarioKind::NearVru};
  return kinds;
}

std::string to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::Following: return "following";
    case ScenarioKind::Stopping: return "stopping";
    case ScenarioKind::Turn: return "turn";
    case ScenarioKind::ChangeLane: return "change_lane";
    case ScenarioKind::NearStatic: return "near_static";
    case ScenarioKind::Stationary: return "stationary";
    case ScenarioKind::Starting: return "starting";
    case ScenarioKind::Traversing: return "traversing";
    case ScenarioKind::NearVru: return "near_vru";
  }
  return "?";
}

ScenarioKind scenario_kind_from_string(const std::string& s) {
  for (auto k : all_scenario_kinds())
    if (to_string(k) == s) return k;
  throw ConfigError("unknown scenario kind '" + s + "'");
}

// --- route addressing --------------------------------------------------------

namespace {

std::vector<double> cumulative_lengths(const Polyline& line) {
  std::vector<double> cum(line.points.size(), 0.0);
  for (std::size_t i = 1; i < line.points.size(); ++i)
    cum[i] = cum[i - 1] + (line.points[i] - line.points[i - 1]).norm();
  return cum;
}

struct RouteSample {
  Vec2 pos;
  double heading;
};

RouteSample sample_route(const Polyline& line, const std::vector<double>& cum, double s) {
  const auto& pts = line.points;
  if (s <= 0.0) {
    Vec2 d = pts[1] - pts[0];
    return {pts[0] + d * (s / d.norm()), std::atan2(d.y, d.x)};
  }
  if (s >= cum.back()) {
    Vec2 d = pts[pts.size() - 1] - pts[pts.size() - 2];
    double extra = s - cum.back();
    return {pts.back() + d * (extra / d.norm()), std::atan2(d.y, d.x)};
  }
  auto it = std::upper_bound(cum.begin(), cum.end(), s);
  std::size_t i = static_cast<std::size_t>(it - cum.begin());
  double seg = cum[i] - cum[i - 1];
  double t = seg > 0 ? (s - cum[i - 1]) / seg : 0.0;
  Vec2 d = pts[i] - pts[i - 1];
  return {pts[i - 1] + d * t, std::atan2(d.y, d.x)};
}

} // namespace

EgoPlanPoint route_point(const Scenario& sc, double s, double d, double v) {
  RouteSample rs = sample_route(sc.route, sc.route_cumlen, s);
  Vec2 normal{-std::sin(rs.heading), std::cos(rs.heading)};
  Vec2 p = rs.pos + normal * d;
  return {p.x, p.y, v, wrap_angle(rs.heading)};
}

std::vector<EgoPlanPoint> rollout_profile(const Scenario& sc, double s0, double v0,
                                          std::span<const double> acc, std::span<const double> lat,
                                          double dt) {
  const std::size_t steps = acc.size();
  if (lat.size() != steps + 1) throw std::invalid_argument("rollout: lat needs steps+1 samples");
  std::vector<double> s(steps + 1), v(steps + 1);
  s[0] = s0;
  v[0] = v0;
  for (std::size_t k = 0; k < steps; ++k) {
    double a = acc[k];
    double vn = v[k] + a * dt;
    if (vn < 0.0) {
      // stops inside the step
      double t_stop = a != 0.0 ? -v[k] / a : 0.0;
      s[k + 1] = s[k] + v[k] * t_stop + 0.5 * a * t_stop * t_stop;
      v[k + 1] = 0.0;
    } else {
      s[k + 1] = s[k] + v[k] * dt + 0.5 * a * dt * dt;
      v[k + 1] = vn;
    }
  }
  std::vector<EgoPlanPoint> plan(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) plan[k] = route_point(sc, s[k], lat[k], v[k]);
  // headings and speeds from the realized positions so the stored state and
  // geometry stay consistent under differentiation
  for (std::size_t k = 0; k <= steps; ++k) {
    std::size_t a = k == steps ? k - 1 : k;
    Vec2 d = plan[a + 1].pos() - plan[a].pos();
    double len = d.norm();
    if (len > 1e-9) plan[k].heading = wrap_angle(std::atan2(d.y, d.x));
    else plan[k].heading = plan[k > 0 ? k - 1 : 0].heading;
    plan[k].v = len / dt;
  }
  return plan;
}

// --- scenario generation -------------------------------------------------------

namespace {

Polygon band_polygon(const Polyline& center, double left, double right) {
  Polygon poly;
  std::vector<Vec2> lhs, rhs;
  const auto& pts = center.points;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    Vec2 d = i + 1 < pts.size() ? pts[i + 1] - pts[i] : pts[i] - pts[i - 1];
    double h = std::atan2(d.y, d.x);
    Vec2 n{-std::sin(h), std::cos(h)};
    lhs.push_back(pts[i] + n * left);
    rhs.push_back(pts[i] + n * (-right));
  }
  poly.vertices = lhs;
  poly.vertices.insert(poly.vertices.end(), rhs.rbegin(), rhs.rend());
  return poly;
}

Polyline straight_line(double x0, double x1, double y, double spacing = 10.0) {
  Polyline line;
  for (double x = x0; x < x1 + spacing * 0.5; x += spacing) line.points.push_back({x, y});
  return line;
}

std::shared_ptr<MapContext> straight_map(int lanes) {
  auto map = std::make_shared<MapContext>();
  for (int l = 0; l < lanes; ++l) {
    Lane lane;
    lane.centerline = straight_line(-40.0, 600.0, l * kLaneWidth);
    lane.speed_limit = kSpeedLimit;
    lane.curvature.assign(lane.centerline.points.size(), 0.0);
    map->lanes.push_back(std::move(lane));
  }
  double top = (lanes - 1) * kLaneWidth + kLaneWidth / 2.0 + 1.0;
  map->drivable_polygons.push_back(Polygon{{{-40.0, -kLaneWidth / 2.0 - 1.0},
                                            {600.0, -kLaneWidth / 2.0 - 1.0},
                                            {600.0, top},
                                            {-40.0, top}}});
  return map;
}

std::shared_ptr<MapContext> turn_map(double radius) {
  auto map = std::make_shared<MapContext>();
  Lane lane;
  Polyline line = straight_line(-40.0, 60.0, 0.0, 5.0);
  std::vector<double> curv(line.points.size(), 0.0);
  Vec2 c{60.0, radius};
  for (double a = -M_PI / 2 + 0.04; a <= 0.0; a += 0.04) {
    line.points.push_back({c.x + radius * std::cos(a), c.y + radius * std::sin(a)});
    curv.push_back(1.0 / radius);
  }
  Vec2 end = line.points.back();
  for (double y = end.y + 5.0; y < end.y + 120.0; y += 5.0) {
    line.points.push_back({end.x, y});
    curv.push_back(0.0);
  }
  lane.centerline = line;
  lane.speed_limit = kSpeedLimit;
  lane.curvature = curv;
  map->lanes.push_back(std::move(lane));
  map->drivable_polygons.push_back(band_polygon(line, kLaneWidth / 2.0 + 1.0, kLaneWidth / 2.0 + 1.0));
  return map;
}

// constant-speed script along a lane
std::vector<EgoPlanPoint> lane_script(const Scenario& sc, double s0, double d, double v,
                                      std::size_t samples, double dt, double brake_at_s = -1.0,
                                      double brake_acc = 0.0, double v_floor = 0.0) {
  std::vector<EgoPlanPoint> path(samples);
  double s = s0, speed = v;
  for (std::size_t k = 0; k < samples; ++k) {
    path[k] = route_point(sc, s, d, speed);
    if (brake_at_s > 0.0 && s >= brake_at_s && speed > v_floor)
      speed = std::max(v_floor, speed + brake_acc * dt);
    s += speed * dt;
  }
  return path;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

} // namespace

Scenario generate_scenario(const ScenarioSpec& spec) {
  std::mt19937_64 rng(spec.seed * 0x9e3779b97f4a7c15ull + static_cast<std::uint64_t>(spec.kind));
  Scenario sc;
  sc.kind = spec.kind;
  const double dt = 1.0 / spec.rate_hz;
  const int horizon = static_cast<int>(spec.rate_hz * spec.horizon_s + 0.5);
  const std::size_t samples = static_cast<std::size_t>(spec.episode_steps + horizon + 1);

  const bool is_turn = spec.kind == ScenarioKind::Turn;
  auto map = is_turn ? turn_map(uniform(rng, 35.0, 55.0)) : straight_map(2);
  sc.map = map;
  sc.route = map->lanes[0].centerline;
  sc.route_cumlen = cumulative_lengths(sc.route);
  sc.ego_s0 = 40.0 + uniform(rng, 0.0, 10.0);
  sc.ego_d0 = 0.0;

  auto add_agent = [&](std::string id, double l, double w, double s0, double d, double v,
                       double brake_at = -1.0, double bacc = 0.0, double vf = 0.0) {
    ScriptedAgent a;
    a.id = std::move(id);
    a.length = l;
    a.width = w;
    a.path = lane_script(sc, s0, d, v, samples, dt, brake_at, bacc, vf);
    sc.agents.push_back(std::move(a));
  };

  switch (spec.kind) {
    case ScenarioKind::Following: {
      sc.ego_v0 = uniform(rng, 8.0, 11.0);
      bool slow = uniform(rng, 0.0, 1.0) < 0.35;
      double lead_v = slow ? uniform(rng, 3.0, 5.0) : uniform(rng, 6.5, 9.5);
      double gap = uniform(rng, 18.0, 32.0);
      bool brakes = !slow && uniform(rng, 0.0, 1.0) < 0.3;
      add_agent("lead", 4.5, 2.0, sc.ego_s0 + gap, 0.0, lead_v,
                brakes ? sc.ego_s0 + gap + lead_v * uniform(rng, 0.5, 2.0) : -1.0,
                -uniform(rng, 2.0, 3.0), uniform(rng, 0.0, 2.0));
      break;
    }
    case ScenarioKind::Stopping: {
      sc.ego_v0 = uniform(rng, 6.0, 9.0);
      double stop_s = sc.ego_s0 + uniform(rng, 45.0, 60.0);
      EgoPlanPoint p = route_point(sc, stop_s, 0.0, 0.0);
      map->stop_points.push_back(p.pos());
      map->traffic_lights.push_back({p.pos(), LightState::Red});
      break;
    }
    case ScenarioKind::Turn:
      sc.ego_v0 = uniform(rng, 5.5, 7.5);
      break;
    case ScenarioKind::ChangeLane: {
      sc.ego_v0 = uniform(rng, 9.0, 11.0);
      add_agent("lead", 4.5, 2.0, sc.ego_s0 + uniform(rng, 20.0, 30.0), 0.0, uniform(rng, 3.0, 6.0));
      break;
    }
    case ScenarioKind::NearStatic: {
      sc.ego_v0 = uniform(rng, 7.0, 9.0);
      add_agent("parked", 4.5, 2.0, sc.ego_s0 + uniform(rng, 25.0, 40.0), -1.3, 0.0);
      break;
    }
    case ScenarioKind::Stationary:
      sc.ego_v0 = 0.0;
      add_agent("parked", 4.5, 2.0, sc.ego_s0 + uniform(rng, 12.0, 20.0), kLaneWidth, 0.0);
      break;
    case ScenarioKind::Starting: {
      sc.ego_v0 = 0.0;
      add_agent("lead", 4.5, 2.0, sc.ego_s0 + uniform(rng, 25.0, 40.0), 0.0, uniform(rng, 5.0, 8.0));
      break;
    }
    case ScenarioKind::Traversing: {
      sc.ego_v0 = uniform(rng, 7.0, 9.0);
      double ix_s = sc.ego_s0 + uniform(rng, 40.0, 55.0);
      EgoPlanPoint p = route_point(sc, ix_s, 0.0, 0.0);
      map->stop_points.push_back(p.pos());
      map->traffic_lights.push_back({p.pos(), LightState::Green});
      break;
    }
    case ScenarioKind::NearVru: {
      sc.ego_v0 = uniform(rng, 6.0, 8.0);
      ScriptedAgent vru;
      vru.id = "ped";
      vru.length = 0.6;
      vru.width = 0.6;
      double s0 = sc.ego_s0 + uniform(rng, 15.0, 30.0);
      vru.path = lane_script(sc, s0, kLaneWidth + 1.2, uniform(rng, 0.6, 1.3), samples, dt);
      sc.agents.push_back(std::move(vru));
      break;
    }
  }
  return sc;
}

// --- AT sampler ----------------------------------------------------------------

namespace {

std::vector<double> lateral_ramp(double d0, double d1, std::size_t steps) {
  // triangular lateral-velocity profile: reach d1 by the end of the horizon
  std::vector<double> lat(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) {
    double u = static_cast<double>(k) / static_cast<double>(steps);
    double blend = u < 0.5 ? 2.0 * u * u : 1.0 - 2.0 * (1.0 - u) * (1.0 - u);
    lat[k] = d0 + (d1 - d0) * blend;
  }
  return lat;
}

// minimal scenario shim so rollouts can reuse route addressing
Scenario route_context(const Frame& state) {
  Scenario sc;
  sc.map = state.map;
  if (state.map && !state.map->lanes.empty()) {
    auto li = state.map->nearest_lane(state.ego_plan[0].pos());
    sc.route = state.map->lanes[*li].centerline;
  } else {
    // no lanes: roll straight out along the current heading
    const auto& e = state.ego_plan[0];
    Polyline line;
    for (int i = 0; i <= 60; ++i)
      line.points.push_back({e.x + std::cos(e.heading) * 20.0 * i - std::cos(e.heading) * 40.0,
                             e.y + std::sin(e.heading) * 20.0 * i - std::sin(e.heading) * 40.0});
    sc.route = line;
  }
  sc.route_cumlen = cumulative_lengths(sc.route);
  return sc;
}

} // namespace

std::vector<ATCandidate> at_sampler_detailed(const Frame& state, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("at_sampler: n must be >= 1");
  if (state.ego_plan.empty()) throw std::invalid_argument("at_sampler: frame lacks an ego state");
  const std::size_t steps = state.ego_plan.size() - 1;
  const double dt = steps > 0 ? 4.0 / static_cast<double>(steps) : 0.05; // horizon fixed by the frame grid

  Scenario sc = route_context(state);
  const auto& ego = state.ego_plan[0];
  double s0 = sc.route.project_arclength(ego.pos());
  RouteSample at = sample_route(sc.route, sc.route_cumlen, s0);
  Vec2 normal{-std::sin(at.heading), std::cos(at.heading)};
  double d0 = (ego.pos() - at.pos).dot(normal);

  static const double kAccLevels[] = {0.0, -1.0, 1.0, -2.0, 2.0, -3.0, 1.5, -1.5,
                                      0.5, -0.5, 2.5, -2.5, 3.0, -3.2, 0.25};
  static const double kLatDelta[] = {0.0, kLaneWidth, -kLaneWidth, kLaneWidth / 2.0,
                                     -kLaneWidth / 2.0};

  std::mt19937_64 rng(seed);
  std::vector<ATCandidate> out;
  out.reserve(n);
  std::size_t ai = 0, li = 0;
  while (out.size() < n) {
    double acc = kAccLevels[ai % std::size(kAccLevels)];
    double dtarget = d0 + kLatDelta[li % std::size(kLatDelta)];
    if (!out.empty()) acc += uniform(rng, -0.12, 0.12); // jitter all but the zero-action rollout
    ATCandidate cand;
    cand.acc = out.empty() ? 0.0 : acc;
    cand.lat_target = out.empty() ? d0 : dtarget;
    std::vector<double> accs(steps, cand.acc);
    auto lat = lateral_ramp(d0, cand.lat_target, steps);
    cand.plan = rollout_profile(sc, s0, ego.v, accs, lat, dt);
    out.push_back(std::move(cand));
    ++ai;
    if (ai % std::size(kAccLevels) == 0) ++li;
  }
  return out;
}

std::vector<std::vector<EgoPlanPoint>> at_sampler(const Frame& state, std::size_t n,
                                                  std::uint64_t seed) {
  auto detailed = at_sampler_detailed(state, n, seed);
  std::vector<std::vector<EgoPlanPoint>> out;
  out.reserve(detailed.size());
  for (auto& c : detailed) out.push_back(std::move(c.plan));
  return out;
}

// --- demonstrations --------------------------------------------------------------

namespace {

struct ProfileDraw {
  std::vector<double> acc;
  std::vector<double> lat;
};

// behavior envelope per scenario family; rejection against the teacher prunes
// anything non-compliant
ProfileDraw draw_profile(const Scenario& sc, std::size_t total_steps, std::size_t horizon,
                         std::mt19937_64& rng) {
  double a1 = 0.0, a2 = 0.0, dtarget = 0.0;
  // lateral excursion magnitudes sampled so peak lateral accelerations cover
  // the comfort range densely on both sides of typical thresholds
  auto lat_draw = [&](double lo, double hi) {
    double mag = uniform(rng, lo, hi);
    return uniform(rng, 0.0, 1.0) < 0.35 ? -std::min(mag, 1.6) : mag;
  };
  switch (sc.kind) {
    case ScenarioKind::Following: {
      a1 = uniform(rng, -2.6, 2.2);
      a2 = uniform(rng, -3.3, 1.8);
      bool slow_lead = !sc.agents.empty() && sc.agents[0].path[0].v < 6.0;
      if (slow_lead && uniform(rng, 0.0, 1.0) < 0.5) {
        a1 = uniform(rng, 0.6, 2.4); // passing surge
        a2 = uniform(rng, -1.0, 0.8);
        dtarget = kLaneWidth;
      } else if (uniform(rng, 0.0, 1.0) < 0.45) {
        dtarget = lat_draw(0.4, 3.5); // drift within / across the lanes
      }
      break;
    }
    case ScenarioKind::Stopping:
      a1 = uniform(rng, -2.6, -0.4);
      a2 = uniform(rng, -2.6, 0.0);
      break;
    case ScenarioKind::Turn:
      a1 = uniform(rng, -1.2, 1.0);
      a2 = uniform(rng, -1.2, 1.0);
      break;
    case ScenarioKind::ChangeLane:
      a1 = uniform(rng, -1.6, 1.8);
      a2 = uniform(rng, -1.6, 1.2);
      dtarget = lat_draw(0.6, kLaneWidth);
      break;
    case ScenarioKind::NearStatic:
      a1 = uniform(rng, -2.0, 1.2);
      a2 = uniform(rng, -2.0, 1.2);
      if (uniform(rng, 0.0, 1.0) < 0.6) dtarget = lat_draw(0.8, 1.8);
      break;
    case ScenarioKind::Stationary:
      a1 = a2 = 0.0;
      break;
    case ScenarioKind::Starting:
      a1 = uniform(rng, 0.4, 2.6);
      a2 = uniform(rng, -0.6, 1.6);
      break;
    case ScenarioKind::Traversing:
      a1 = uniform(rng, -1.2, 1.6);
      a2 = uniform(rng, -1.2, 1.6);
      break;
    case ScenarioKind::NearVru:
      a1 = uniform(rng, -2.2, 1.0);
      a2 = uniform(rng, -2.2, 1.0);
      break;
  }

  ProfileDraw draw;
  draw.acc.resize(total_steps);
  std::size_t half = total_steps / 2;
  for (std::size_t k = 0; k < total_steps; ++k) draw.acc[k] = k < half ? a1 : a2;

  if (dtarget != 0.0) {
    // move out over a sampled span and (for passing) back in at the end
    std::size_t out_end =
        std::min(total_steps, horizon + static_cast<std::size_t>(uniform(rng, 0.0, 1.0) *
                                                                 static_cast<double>(horizon)));
    auto ramp_out = lateral_ramp(0.0, dtarget, out_end);
    draw.lat = ramp_out;
    draw.lat.resize(total_steps + 1, dtarget);
    if (sc.kind == ScenarioKind::Following && total_steps > 2 * horizon &&
        dtarget > kLaneWidth / 2.0) {
      auto ramp_in = lateral_ramp(dtarget, 0.0, horizon);
      for (std::size_t k = 0; k <= horizon; ++k) draw.lat[total_steps - horizon + k] = ramp_in[k];
    }
  } else {
    draw.lat.assign(total_steps + 1, 0.0);
  }
  return draw;
}

Trace windows_to_trace(const Scenario& sc, const std::vector<EgoPlanPoint>& ego_path,
                       std::size_t frames, std::size_t horizon, double rate_hz, double horizon_s) {
  Trace trace;
  trace.rate_hz = rate_hz;
  trace.horizon_s = horizon_s;
  trace.frames.reserve(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    Frame fr;
    fr.t_index = static_cast<int>(t);
    fr.map = sc.map;
    fr.ego_plan.assign(ego_path.begin() + static_cast<long>(t),
                       ego_path.begin() + static_cast<long>(t + horizon + 1));
    for (const auto& agent : sc.agents) {
      AgentTrack track;
      track.id = agent.id;
      track.length = agent.length;
      track.width = agent.width;
      track.points.assign(agent.path.begin() + static_cast<long>(t),
                          agent.path.begin() + static_cast<long>(t + horizon + 1));
      fr.agents.push_back(std::move(track));
    }
    trace.frames.push_back(std::move(fr));
  }
  return trace;
}

double min_pair_robustness(const RuleSet& rules, const PredicateRegistry& reg, const Trace& trace) {
  std::set<std::string> idset;
  for (const auto& pair : rules.pairs) {
    for (const auto& c : pair.conditions)
      for (const auto& a : collect_atoms(c)) idset.insert(a);
    if (pair.action)
      for (const auto& a : collect_atoms(pair.action)) idset.insert(a);
  }
  FeatureTable feats = compute_features(trace);
  SignalMap signals;
  for (const auto& id : idset) {
    const Predicate& p = reg.at(id);
    std::vector<double> theta(p.params.size());
    for (std::size_t k = 0; k < theta.size(); ++k) theta[k] = p.params[k].def;
    if (auto it = rules.theta.find(id); it != rules.theta.end()) theta = it->second;
    std::vector<double> sig(feats.size());
    for (std::size_t t = 0; t < feats.size(); ++t) sig[t] = evaluate(p, feats[t], theta);
    signals[id] = std::move(sig);
  }
  double worst = 1.0;
  for (const auto& pair : rules.pairs) {
    FormulaPtr clause = pair_clause(pair);
    double rob = clause ? eval_hard(clause, signals, 0) : -1.0;
    worst = std::min(worst, rob);
  }
  return worst;
}

} // namespace

Dataset generate_demonstrations(const RuleSet& teacher, const PredicateRegistry& reg,
                                const std::vector<ScenarioSpec>& specs, std::size_t count,
                                std::uint64_t seed, const DemoConfig& cfg, DemoStats* stats) {
  if (specs.empty()) throw std::invalid_argument("generate_demonstrations: no scenario specs");
  Dataset ds;
  ds.traces.reserve(count);
  DemoStats local;

  unsigned threads = resolve_threads(cfg.threads);
  std::vector<std::optional<Trace>> slots(count);
  std::vector<std::size_t> attempts(count, 0);

  parallel_for(count, threads, [&](std::size_t i) {
    ScenarioSpec spec = specs[i % specs.size()];
    const int horizon = static_cast<int>(spec.rate_hz * spec.horizon_s + 0.5);
    const std::size_t frames = static_cast<std::size_t>(spec.episode_steps);
    const std::size_t total_steps = frames + static_cast<std::size_t>(horizon);
    const double dt = 1.0 / spec.rate_hz;

    std::mt19937_64 rng(seed + 0x100000001b3ull * (i + 1));
    for (std::size_t attempt = 0; attempt < cfg.attempts_per_demo; ++attempt) {
      ++attempts[i];
      spec.seed = seed ^ (i * 1315423911ull) ^ (attempt * 2654435761ull);
      spec.episode_steps = static_cast<int>(frames);
      Scenario sc = generate_scenario(spec);
      ProfileDraw draw = draw_profile(sc, total_steps, static_cast<std::size_t>(horizon), rng);
      auto path = rollout_profile(sc, sc.ego_s0, sc.ego_v0, draw.acc, draw.lat, dt);
      Trace trace = windows_to_trace(sc, path, frames, static_cast<std::size_t>(horizon),
                                     spec.rate_hz, spec.horizon_s);
      if (min_pair_robustness(teacher, reg, trace) > cfg.margin_delta) {
        slots[i] = std::move(trace);
        break;
      }
    }
  });

  for (std::size_t i = 0; i < count; ++i) {
    local.attempts += attempts[i];
    if (slots[i]) {
      ++local.generated;
      ds.traces.push_back(std::move(*slots[i]));
    }
  }
  if (stats) *stats = local;
  if (ds.traces.size() < count) {
    double rate = local.acceptance_rate();
    if (rate < 0.01) {
      throw InfeasibleError("demonstration sampling infeasible (acceptance " +
                            std::to_string(rate) + ") for spec kind '" +
                            to_string(specs[0].kind) + "'");
    }
  }
  return ds;
}

// --- closed loop -----------------------------------------------------------------

RunMetrics run_closed_loop(const ScenarioSpec& spec_in, const Monitor::Proposer& proposer,
                           const RuleSet& rules, const PredicateRegistry& reg, int steps,
                           std::uint64_t seed, const RuleSet* grader, unsigned threads) {
  if (steps < 1) throw std::invalid_argument("run_closed_loop: steps must be >= 1");
  ScenarioSpec spec = spec_in;
  spec.seed = seed;
  spec.episode_steps = steps;
  Scenario sc = generate_scenario(spec);

  const int horizon = static_cast<int>(spec.rate_hz * spec.horizon_s + 0.5);
  const double dt = 1.0 / spec.rate_hz;

  Monitor monitor(rules, reg, 50.0, spec.rate_hz, threads);
  RunMetrics metrics;

  EgoPlanPoint ego = route_point(sc, sc.ego_s0, sc.ego_d0, sc.ego_v0);
  std::vector<EgoPlanPoint> executed{ego};
  std::vector<EgoPlanPoint> last_plan;

  for (int t = 0; t < steps; ++t) {
    Frame env;
    env.t_index = t;
    env.map = sc.map;
    // reference plan: hold the current state along the route
    {
      std::vector<double> acc(static_cast<std::size_t>(horizon), 0.0);
      std::vector<double> lat(static_cast<std::size_t>(horizon) + 1, 0.0);
      double s = sc.route.project_arclength(ego.pos());
      RouteSample at = sample_route(sc.route, sc.route_cumlen, s);
      Vec2 normal{-std::sin(at.heading), std::cos(at.heading)};
      double d = (ego.pos() - at.pos).dot(normal);
      std::fill(lat.begin(), lat.end(), d);
      env.ego_plan = rollout_profile(sc, s, ego.v, acc, lat, dt);
    }
    for (const auto& agent : sc.agents) {
      AgentTrack track;
      track.id = agent.id;
      track.length = agent.length;
      track.width = agent.width;
      track.points.assign(agent.path.begin() + t, agent.path.begin() + t + horizon + 1);
      env.agents.push_back(std::move(track));
    }

    CycleResult cycle = monitor.step(env, proposer);
    metrics.cycle_ms.push_back(cycle.elapsed_ms);
    ++metrics.cycles;
    if (cycle.proposer_failed) ++metrics.proposer_errors;
    const auto& plan = cycle.plan.empty() ? env.ego_plan : cycle.plan;
    last_plan = plan;

    ego = plan.size() > 1 ? plan[1] : plan[0];
    executed.push_back(ego);

    // world checks at the executed state
    for (const auto& agent : sc.agents) {
      const auto& ap = agent.path[static_cast<std::size_t>(t + 1)];
      double r = 1.0 + 0.5 * std::max(agent.length, agent.width);
      if ((ap.pos() - ego.pos()).norm() < r) metrics.collision = true;
    }
    if (sc.map->drivable_signed_distance(ego.pos()) < 0.0) metrics.drivable_exit = true;
  }

  for (std::size_t i = 1; i < executed.size(); ++i)
    metrics.progress_m += (executed[i].pos() - executed[i - 1].pos()).norm();

  if (executed.size() >= 3) {
    Kinematics kin = derive_kinematics(executed, dt);
    for (std::size_t i = 0; i < kin.a_long.size(); ++i) {
      bool violated = kin.a_long[i] > kStandardComfort[0] || -kin.a_long[i] > kStandardComfort[1] ||
                      kin.a_lat[i] > kStandardComfort[2] || -kin.a_lat[i] > kStandardComfort[3];
      if (violated) ++metrics.comfort_violations;
    }
  }

  // grade the executed trajectory (extended by the final plan's tail)
  {
    std::vector<EgoPlanPoint> graded = executed;
    if (!last_plan.empty())
      graded.insert(graded.end(), last_plan.begin() + std::min<std::size_t>(2, last_plan.size()),
                    last_plan.end());
    std::size_t need = static_cast<std::size_t>(steps + horizon + 1);
    while (graded.size() < need) graded.push_back(graded.back());
    graded.resize(need);
    Trace trace = windows_to_trace(sc, graded, static_cast<std::size_t>(steps),
                                   static_cast<std::size_t>(horizon), spec.rate_hz, spec.horizon_s);
    metrics.executed_score = min_pair_robustness(grader ? *grader : rules, reg, trace);
  }
  return metrics;
}

// --- teachers --------------------------------------------------------------------

RuleSet teacher_comfort(const PredicateRegistry& reg) {
  RuleSet rs;
  rs.connective = '&';
  rs.registry_hash = reg.hash();
  rs.provenance = "teacher:comfort";
  RulePair pair;
  pair.action = make_g(make_atom("Comfortable"));
  rs.pairs.push_back(std::move(pair));
  rs.theta["Comfortable"] = {1.23, 1.13, 0.98, 0.98};
  return rs;
}

RuleSet teacher_city3(const PredicateRegistry& reg) {
  RuleSet rs;
  rs.connective = '&';
  rs.registry_hash = reg.hash();
  rs.provenance = "teacher:city3";
  {
    RulePair p;
    p.action = make_g(make_atom("InDrivable"));
    rs.pairs.push_back(std::move(p));
  }
  {
    RulePair p;
    p.conditions.push_back(make_g(make_atom("SafeTTC")));
    p.action = make_g(make_atom("Comfortable"));
    rs.pairs.push_back(std::move(p));
  }
  {
    RulePair p;
    p.conditions.push_back(make_not(make_atom("SpeedLimitCompliant")));
    p.action = make_f(make_atom("OvertakingContext"));
    rs.pairs.push_back(std::move(p));
  }
  rs.theta["InDrivable"] = {0.0};
  rs.theta["SafeTTC"] = {3.0};
  rs.theta["Comfortable"] = {1.23, 1.13, 0.98, 0.98};
  rs.theta["SpeedLimitCompliant"] = {0.0};
  rs.theta["OvertakingContext"] = {2.0};
  return rs;
}

} // namespace tlr
