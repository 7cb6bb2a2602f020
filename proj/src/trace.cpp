#include "tlr/trace.hpp"

#include "tlr/errors.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace tlr {

using nlohmann::json;

double MapContext::drivable_signed_distance(Vec2 p) const {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& poly : drivable_polygons) best = std::max(best, poly.signed_distance(p));
  return best;
}

std::optional<std::size_t> MapContext::nearest_lane(Vec2 p) const {
  if (lanes.empty()) return std::nullopt;
  std::size_t best_i = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < lanes.size(); ++i) {
    double d = lanes[i].centerline.distance(p);
    if (d < best) {
      best = d;
      best_i = i;
    }
  }
  return best_i;
}

double MapContext::curvature_at(std::size_t lane, Vec2 p) const {
  const Lane& l = lanes.at(lane);
  if (l.curvature.empty()) return 0.0;
  std::size_t i = l.centerline.nearest_vertex(p);
  return l.curvature[std::min(i, l.curvature.size() - 1)];
}

std::size_t Dataset::train_count() const {
  if (traces.empty()) return 0;
  auto n = static_cast<std::size_t>(train_fraction * static_cast<double>(traces.size()) + 1e-9);
  return std::min(std::max<std::size_t>(n, traces.size() > 1 ? 1 : 0), traces.size());
}

std::vector<std::size_t> Dataset::train_indices() const {
  std::vector<std::size_t> idx(train_count());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return idx;
}

std::vector<std::size_t> Dataset::val_indices() const {
  std::vector<std::size_t> idx;
  for (std::size_t i = train_count(); i < traces.size(); ++i) idx.push_back(i);
  return idx;
}

std::string to_string(const Violation& v) {
  std::ostringstream os;
  if (v.frame >= 0) os << "frame " << v.frame << ": ";
  os << v.field << ": " << v.message;
  return os.str();
}

std::vector<Violation> validate_trace(const Trace& trace) {
  std::vector<Violation> out;
  auto add = [&](int frame, std::string field, std::string msg) {
    out.push_back({frame, std::move(field), std::move(msg)});
  };

  bool rate_ok = trace.rate_hz == 20.0 || trace.rate_hz == 10.0 || trace.rate_hz == 5.0;
  if (!rate_ok) add(-1, "rate_hz", "must be one of {20, 10, 5}");
  if (trace.horizon_s <= 0.0) add(-1, "horizon_s", "must be positive");
  if (trace.frames.empty()) add(-1, "frames", "trace has no frames");
  if (!rate_ok || trace.horizon_s <= 0.0) return out;

  const std::size_t plan_len = static_cast<std::size_t>(trace.horizon_steps()) + 1;
  const MapContext* shared_map = trace.frames.empty() ? nullptr : trace.frames[0].map.get();

  for (std::size_t f = 0; f < trace.frames.size(); ++f) {
    const Frame& fr = trace.frames[f];
    int fi = static_cast<int>(f);
    if (fr.t_index < 0) add(fi, "t_index", "must be >= 0");
    if (fr.ego_plan.size() != plan_len) {
      add(fi, "ego_plan", "length " + std::to_string(fr.ego_plan.size()) + " != horizon steps + 1 (" +
                              std::to_string(plan_len) + ")");
    }
    for (std::size_t i = 0; i < fr.ego_plan.size(); ++i) {
      const auto& p = fr.ego_plan[i];
      if (p.v < 0.0) add(fi, "ego_plan[" + std::to_string(i) + "].v", "speed must be >= 0");
      if (!(p.heading > -M_PI - 1e-12 && p.heading <= M_PI + 1e-12) || p.heading <= -M_PI)
        add(fi, "ego_plan[" + std::to_string(i) + "].heading", "must lie in (-pi, pi]");
    }
    for (const auto& a : fr.agents) {
      if (a.length <= 0.0 || a.width <= 0.0) add(fi, "agents." + a.id + ".extent", "must be positive");
      if (a.points.size() != plan_len)
        add(fi, "agents." + a.id + ".points", "length must equal the trace horizon grid (" +
                                                  std::to_string(plan_len) + ")");
      for (const auto& p : a.points)
        if (p.v < 0.0) {
          add(fi, "agents." + a.id + ".points.v", "speed must be >= 0");
          break;
        }
    }
    if (!fr.map) {
      add(fi, "map", "missing map context");
    } else if (fr.map.get() != shared_map) {
      add(fi, "map", "all frames must share one map context");
    }
  }

  if (shared_map) {
    for (std::size_t i = 0; i < shared_map->drivable_polygons.size(); ++i) {
      if (!shared_map->drivable_polygons[i].is_simple())
        add(-1, "map.drivable[" + std::to_string(i) + "]", "polygon must be simple");
    }
    for (std::size_t i = 0; i < shared_map->lanes.size(); ++i) {
      if (shared_map->lanes[i].speed_limit <= 0.0)
        add(-1, "map.lanes[" + std::to_string(i) + "].speed_limit", "must be positive");
    }
  }
  return out;
}

namespace {

EgoPlanPoint parse_point(const json& j, const char* what, long line) {
  if (!j.is_array() || j.size() != 4)
    throw ParseError(std::string(what) + ": expected [x, y, v, heading]", line);
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

std::vector<EgoPlanPoint> parse_points(const json& j, const char* what, long line) {
  std::vector<EgoPlanPoint> pts;
  pts.reserve(j.size());
  for (const auto& e : j) pts.push_back(parse_point(e, what, line));
  return pts;
}

const json& require(const json& j, const char* key, const std::string& ctx, long line) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(ctx + ": missing field '" + key + "'", line);
  return *it;
}

std::shared_ptr<const MapContext> parse_map(const json& j, long line) {
  auto map = std::make_shared<MapContext>();
  if (auto it = j.find("drivable"); it != j.end()) {
    for (const auto& poly : *it) {
      Polygon pg;
      for (const auto& v : poly) pg.vertices.push_back({v[0].get<double>(), v[1].get<double>()});
      map->drivable_polygons.push_back(std::move(pg));
    }
  }
  if (auto it = j.find("lanes"); it != j.end()) {
    for (const auto& lj : *it) {
      Lane lane;
      for (const auto& v : require(lj, "centerline", "map.lanes", line))
        lane.centerline.points.push_back({v[0].get<double>(), v[1].get<double>()});
      lane.speed_limit = require(lj, "speed_limit", "map.lanes", line).get<double>();
      if (auto c = lj.find("curvature"); c != lj.end())
        lane.curvature = c->get<std::vector<double>>();
      map->lanes.push_back(std::move(lane));
    }
  }
  if (auto it = j.find("stops"); it != j.end()) {
    for (const auto& v : *it) map->stop_points.push_back({v[0].get<double>(), v[1].get<double>()});
  }
  if (auto it = j.find("lights"); it != j.end()) {
    for (const auto& lj : *it) {
      TrafficLight tl;
      const auto& pos = require(lj, "pos", "map.lights", line);
      tl.position = {pos[0].get<double>(), pos[1].get<double>()};
      std::string s = require(lj, "state", "map.lights", line).get<std::string>();
      if (s == "red")
        tl.state = LightState::Red;
      else if (s == "yellow")
        tl.state = LightState::Yellow;
      else if (s == "green")
        tl.state = LightState::Green;
      else
        throw ParseError("map.lights.state: unknown state '" + s + "'", line);
      map->traffic_lights.push_back(tl);
    }
  }
  return map;
}

Trace parse_trace_record(const json& j, long line) {
  Trace trace;
  trace.rate_hz = require(j, "rate_hz", "record", line).get<double>();
  trace.horizon_s = require(j, "horizon_s", "record", line).get<double>();
  auto map = parse_map(require(j, "map", "record", line), line);

  const json& frames = require(j, "frames", "record", line);
  std::size_t plan_len = 0;
  for (std::size_t fi = 0; fi < frames.size(); ++fi) {
    const json& fj = frames[fi];
    std::string ctx = "frame " + std::to_string(fi);
    Frame fr;
    fr.t_index = require(fj, "t", ctx, line).get<int>();
    fr.ego_plan = parse_points(require(fj, "ego_plan", ctx, line), "ego_plan", line);
    if (fi == 0)
      plan_len = fr.ego_plan.size();
    else if (fr.ego_plan.size() != plan_len)
      throw ParseError(ctx + ": ego_plan length " + std::to_string(fr.ego_plan.size()) +
                           " inconsistent with first frame (" + std::to_string(plan_len) + ")",
                       line);
    if (auto it = fj.find("agents"); it != fj.end()) {
      for (const auto& aj : *it) {
        AgentTrack a;
        a.id = require(aj, "id", ctx + ".agents", line).get<std::string>();
        const auto& ext = require(aj, "extent", ctx + ".agents", line);
        a.length = ext[0].get<double>();
        a.width = ext[1].get<double>();
        a.points = parse_points(require(aj, "points", ctx + ".agents", line), "agents.points", line);
        fr.agents.push_back(std::move(a));
      }
    }
    fr.map = map;
    trace.frames.push_back(std::move(fr));
  }
  return trace;
}

json point_to_json(const EgoPlanPoint& p) { return json::array({p.x, p.y, p.v, p.heading}); }

json map_to_json(const MapContext& m) {
  json j;
  json drivable = json::array();
  for (const auto& poly : m.drivable_polygons) {
    json pj = json::array();
    for (const auto& v : poly.vertices) pj.push_back(json::array({v.x, v.y}));
    drivable.push_back(pj);
  }
  j["drivable"] = drivable;
  json lanes = json::array();
  for (const auto& lane : m.lanes) {
    json lj;
    json cl = json::array();
    for (const auto& v : lane.centerline.points) cl.push_back(json::array({v.x, v.y}));
    lj["centerline"] = cl;
    lj["speed_limit"] = lane.speed_limit;
    lj["curvature"] = lane.curvature;
    lanes.push_back(lj);
  }
  j["lanes"] = lanes;
  json stops = json::array();
  for (const auto& s : m.stop_points) stops.push_back(json::array({s.x, s.y}));
  j["stops"] = stops;
  json lights = json::array();
  for (const auto& tl : m.traffic_lights) {
    const char* s = tl.state == LightState::Red ? "red" : tl.state == LightState::Yellow ? "yellow" : "green";
    lights.push_back({{"pos", json::array({tl.position.x, tl.position.y})}, {"state", s}});
  }
  j["lights"] = lights;
  return j;
}

} // namespace

Dataset parse_trace_file(std::istream& in) {
  Dataset ds;
  std::string linebuf;
  long line = 0;
  while (std::getline(in, linebuf)) {
    ++line;
    if (linebuf.empty()) continue;
    json j;
    try {
      j = json::parse(linebuf);
    } catch (const json::exception& e) {
      throw ParseError(std::string("malformed record: ") + e.what(), line);
    }
    Trace t = parse_trace_record(j, line);
    auto violations = validate_trace(t);
    if (!violations.empty())
      throw ParseError("invalid trace: " + to_string(violations.front()), line);
    ds.traces.push_back(std::move(t));
  }
  return ds;
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return parse_trace_file(in);
}

std::string serialize_trace(const Trace& trace) {
  json j;
  j["rate_hz"] = trace.rate_hz;
  j["horizon_s"] = trace.horizon_s;
  j["map"] = trace.frames.empty() ? json::object() : map_to_json(*trace.frames[0].map);
  json frames = json::array();
  for (const auto& fr : trace.frames) {
    json fj;
    fj["t"] = fr.t_index;
    json plan = json::array();
    for (const auto& p : fr.ego_plan) plan.push_back(point_to_json(p));
    fj["ego_plan"] = plan;
    json agents = json::array();
    for (const auto& a : fr.agents) {
      json aj;
      aj["id"] = a.id;
      aj["extent"] = json::array({a.length, a.width});
      json pts = json::array();
      for (const auto& p : a.points) pts.push_back(point_to_json(p));
      aj["points"] = pts;
      agents.push_back(aj);
    }
    fj["agents"] = agents;
    frames.push_back(fj);
  }
  j["frames"] = frames;
  return j.dump();
}

void serialize_dataset(const Dataset& ds, std::ostream& out) {
  for (const auto& t : ds.traces) out << serialize_trace(t) << "\n";
}

void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open '" + path + "' for writing");
  serialize_dataset(ds, out);
}

Trace resample(const Trace& trace, double target_hz) {
  if (target_hz <= 0.0) throw std::invalid_argument("resample: target rate must be positive");
  double ratio = trace.rate_hz / target_hz;
  auto k = static_cast<std::size_t>(ratio + 0.5);
  if (k < 1 || std::abs(ratio - static_cast<double>(k)) > 1e-9)
    throw std::invalid_argument("resample: target rate must divide the trace rate");
  if (k == 1) return trace;

  auto decimate = [&](const std::vector<EgoPlanPoint>& pts) {
    std::vector<EgoPlanPoint> out;
    for (std::size_t i = 0; i < pts.size(); i += k) out.push_back(pts[i]);
    return out;
  };

  Trace out;
  out.rate_hz = target_hz;
  out.horizon_s = trace.horizon_s;
  int t = 0;
  for (std::size_t f = 0; f < trace.frames.size(); f += k) {
    Frame fr = trace.frames[f];
    fr.t_index = t++;
    fr.ego_plan = decimate(fr.ego_plan);
    for (auto& a : fr.agents) a.points = decimate(a.points);
    out.frames.push_back(std::move(fr));
  }
  return out;
}

Kinematics derive_kinematics(const std::vector<EgoPlanPoint>& plan, double dt) {
  if (plan.size() < 3) throw std::invalid_argument("derive_kinematics: plan needs >= 3 points");
  if (dt <= 0.0) throw std::invalid_argument("derive_kinematics: dt must be positive");
  const std::size_t n = plan.size();
  const double inv_dt2 = 1.0 / (dt * dt);

  Kinematics k;
  k.a_long.resize(n);
  k.a_lat.resize(n);
  k.jerk.resize(n);

  auto accel_at = [&](std::size_t i) {
    // second difference of position; one-sided stencils at the ends
    std::size_t c = std::min(std::max<std::size_t>(i, 1), n - 2);
    Vec2 a = (plan[c + 1].pos() - plan[c].pos() - (plan[c].pos() - plan[c - 1].pos())) * inv_dt2;
    return a;
  };

  for (std::size_t i = 0; i < n; ++i) {
    Vec2 a = accel_at(i);
    double ch = std::cos(plan[i].heading), sh = std::sin(plan[i].heading);
    k.a_long[i] = a.x * ch + a.y * sh;
    k.a_lat[i] = -a.x * sh + a.y * ch;
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t lo = i == 0 ? 0 : i - 1;
    std::size_t hi = i == n - 1 ? n - 1 : i + 1;
    k.jerk[i] = (k.a_long[hi] - k.a_long[lo]) / (static_cast<double>(hi - lo) * dt);
  }
  return k;
}

} // namespace tlr
