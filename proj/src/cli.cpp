#include "netflow/cli.hpp"

#include "netflow/expansion.hpp"
#include "netflow/fixtures.hpp"
#include "netflow/flow.hpp"
#include "netflow/heat_model.hpp"
#include "netflow/network_io.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#ifndef NETFLOW_VERSION
#define NETFLOW_VERSION "unknown"
#endif

namespace netflow {

using nlohmann::json;
namespace fs = std::filesystem;

std::string version_string() { return NETFLOW_VERSION; }

namespace {

struct UsageError : Error {
  using Error::Error;
};

// Field table shared by both directions of the file form.
template <typename F>
void visit(RunConfig& c, F&& f) {
  f("command", c.command);
  f("input", c.input);
  f("fixture", c.fixture);
  f("fixture_nodes", c.fixture_nodes);
  f("fixture_bend", c.fixture_bend);
  f("topology", c.topology);
  f("restart_topology", c.restart_topology);
  f("t0", c.t0);
  f("radius", c.radius);
  f("dt", c.dt);
  f("t_end", c.t_end);
  f("mesh", c.mesh);
  f("order", c.order);
  f("snapshots", c.snapshots);
  f("seed", c.seed);
  f("detect", c.detect);
  f("emit_svg", c.emit_svg);
  f("threads", c.threads);
  f("heat_order", c.heat_order);
  f("fan", c.fan);
  f("random_fan", c.random_fan);
  f("soliton_radius", c.soliton_radius);
  f("soliton_nodes", c.soliton_nodes);
  f("regular_tol", c.regular_tol);
  f("herring_tol", c.herring_tol);
  f("length_tol", c.length_tol);
  f("output", c.output);
}

json to_json(const RunConfig& c) {
  json j;
  RunConfig copy = c;
  visit(copy, [&](const char* key, auto& v) { j[key] = v; });
  return j;
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void ensure_dir(const std::string& d) {
  std::error_code ec;
  fs::create_directories(d, ec);
  if (ec) throw std::ios_base::failure("cannot create output directory " + d);
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p);
  if (!f) throw std::ios_base::failure("cannot write " + p.string());
  return f;
}

Network fixture(const RunConfig& c) {
  const std::string& f = c.fixture;
  const int n = c.fixture_nodes;
  if (f == "cross") return cross_network(n, c.fixture_bend);
  if (f == "triod") return triod_network(0.0, 2.0 * kPi / 3.0, 4.0 * kPi / 3.0, n);
  if (f == "bowtie") return bowtie_network(0.4, 0.3, n);
  if (f == "circle") return circle_network(1.0, n);
  if (f == "segment") return segment_network({0.0, 0.0}, {1.0, 0.0}, n);
  if (f == "star5") {
    std::vector<double> a;
    for (int k = 0; k < 5; ++k) a.push_back(2.0 * kPi * k / 5.0 + 0.1 * k * k);
    std::vector<RayArm> arms;
    for (double x : a) arms.push_back({x, 1.0, 0.0});
    return star_network(Vec2::Zero(), arms, n);
  }
  throw PreconditionError("unknown fixture '" + f + "'");
}

Network load_input(const RunConfig& c) {
  if (c.input.empty()) return fixture(c);
  return load_network(c.input);
}

void write_json(const fs::path& p, const json& j) {
  auto f = open_out(p);
  f << j.dump(2) << '\n';
}

// Fixed view box: initial bounding box inflated by 10%.
struct ViewBox {
  double x, y, w, h;
};

ViewBox view_box(const Network& net) {
  double lo_x = 1e300, lo_y = 1e300, hi_x = -1e300, hi_y = -1e300;
  for (const auto& c : net.curves)
    for (const auto& p : c.points()) {
      lo_x = std::min(lo_x, p.x()), hi_x = std::max(hi_x, p.x());
      lo_y = std::min(lo_y, p.y()), hi_y = std::max(hi_y, p.y());
    }
  const double w = std::max(hi_x - lo_x, 1e-9), h = std::max(hi_y - lo_y, 1e-9);
  return {lo_x - 0.05 * w, lo_y - 0.05 * h, 1.1 * w, 1.1 * h};
}

void write_svg(const fs::path& p, const Network& net, const ViewBox& vb, double t) {
  auto f = open_out(p);
  const double stroke = 0.004 * std::max(vb.w, vb.h);
  f << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"" << fmt(vb.x) << ' ' << fmt(-(vb.y + vb.h)) << ' '
    << fmt(vb.w) << ' ' << fmt(vb.h) << "\">\n";
  f << "<title>t = " << fmt(t) << "</title>\n";
  for (const auto& c : net.curves) {
    f << "<polyline fill=\"none\" stroke=\"black\" stroke-width=\"" << fmt(stroke) << "\" points=\"";
    for (const auto& q : c.points()) f << fmt(q.x()) << ',' << fmt(-q.y()) << ' ';
    f << "\"/>\n";
  }
  for (const auto& v : net.vertices)
    f << "<circle cx=\"" << fmt(v.position.x()) << "\" cy=\"" << fmt(-v.position.y()) << "\" r=\"" << fmt(2 * stroke)
      << "\" fill=\"" << (v.kind == VertexKind::Interior ? "red" : "blue") << "\"/>\n";
  f << "</svg>\n";
}

json audit_json(const Audit& a, double diameter, const RunConfig& c) {
  const bool pass = a.exterior_pinned && a.max_length_increase <= c.length_tol && a.max_herring <= c.herring_tol &&
                    a.max_coincidence <= 1e-9 * std::max(diameter, 1.0);
  return {{"max_coincidence", a.max_coincidence},
          {"max_herring", a.max_herring},
          {"max_length_increase", a.max_length_increase},
          {"min_boundary_eigenvalue", std::isfinite(a.min_boundary_eigenvalue) ? json(a.min_boundary_eigenvalue) : json()},
          {"exterior_pinned", a.exterior_pinned},
          {"steps", a.steps},
          {"rejected", a.rejected},
          {"resamples", a.resamples},
          {"pass", pass}};
}

std::string file_tag(std::string s) {
  for (auto& ch : s)
    if (ch == '|') ch = '-';
    else if (ch == ';') ch = '_';
    else if (ch == '{' || ch == '}' || ch == ':') ch = 'x';
  return s;
}

StartupOptions startup_options(const RunConfig& c) {
  StartupOptions o;
  o.t0 = c.t0;
  o.r = c.radius;
  o.order = c.order;
  o.mesh = c.mesh;
  return o;
}

// ---------------------------------------------------------------------------

int cmd_check(const RunConfig& c, std::ostream& log, json& m) {
  const Network net = load_input(c);
  validate(net);
  const RegularityReport rep = check_regular(net, c.regular_tol);
  json verts = json::array();
  for (const auto& v : rep.vertices)
    verts.push_back({{"vertex", v.vertex + 1},
                     {"valence", v.valence},
                     {"regular", v.regular},
                     {"tangent_sum", v.tangent_sum_norm},
                     {"angle_defects", v.angle_defects}});
  m["vertices"] = verts;
  m["curves"] = net.curves.size();
  save_network((fs::path(c.output) / "network.json").string(), net);
  if (rep.all_regular()) {
    log << "regular\n";
  } else {
    log << "irregular vertices:";
    for (int v : rep.irregular_vertices()) log << " v" << v + 1;
    log << '\n';
  }
  m["regular"] = rep.all_regular();
  return exit_code::ok;
}

int cmd_solitons(const RunConfig& c, std::ostream& log, json& m) {
  Fan fan;
  if (c.random_fan > 0) {
    std::mt19937 rng(c.seed);
    std::uniform_real_distribution<double> u(0.0, 2.0 * kPi);
    std::vector<double> a;
    for (int k = 0; k < c.random_fan; ++k) a.push_back(u(rng));
    fan = Fan::from_angles(a);
  } else if (!c.fan.empty()) {
    std::vector<double> a;
    std::stringstream ss(c.fan);
    for (std::string tok; std::getline(ss, tok, ',');) a.push_back(std::stod(tok) * kPi / 180.0);
    fan = Fan::from_angles(a);
  } else {
    const Network net = load_input(c);
    const auto irr = check_regular(net, c.regular_tol).irregular_vertices();
    if (irr.empty()) throw PreconditionError("input has no irregular vertex");
    for (const auto& f : extract_fans(net))
      if (f.vertex == irr.front()) fan = f;
    fan.center = Vec2::Zero();
  }
  m["fan_degrees"] = json::array();
  for (double a : fan.angles()) m["fan_degrees"].push_back(a * 180.0 / kPi);
  SolitonOptions so;
  so.radius = c.soliton_radius;
  so.nodes = c.soliton_nodes;
  json list = json::array();
  int failures = 0;
  for (const auto& topo : enumerate_resolutions(fan, false)) {
    const std::string name = topo.to_string();
    json entry{{"topology", name}};
    try {
      const SolitonNetwork sol = solve_soliton(fan, topo, so);
      double resid = 0.0;
      for (std::size_t a = 0; a < sol.arcs.size(); ++a) {
        resid = std::max(resid, soliton_residual(sol.arcs[a]));
        auto f = open_out(fs::path(c.output) / ("soliton_" + file_tag(name) + "_arc" + std::to_string(a) + ".csv"));
        write_arc_csv(f, sol.arcs[a]);
      }
      double balance = 0.0;
      for (double b : junction_balance(sol)) balance = std::max(balance, b);
      entry["residual"] = resid;
      entry["junction_balance"] = balance;
      entry["g_length"] = g_length(sol, sol.radius);
      entry["manifest"] = json::parse(soliton_manifest(sol));
      log << name << ": residual " << resid << ", balance " << balance << '\n';
    } catch (const TopologyDegenerate& e) {
      entry["degenerate"] = e.what();
      log << name << ": degenerate (" << e.what() << ")\n";
    } catch (const SolverFailure& e) {
      entry["failure"] = e.what();
      ++failures;
      log << name << ": solver failure (" << e.what() << ")\n";
    }
    list.push_back(entry);
  }
  m["solitons"] = list;
  return failures ? exit_code::solver : exit_code::ok;
}

int cmd_resolve(const RunConfig& c, std::ostream& log, json& m) {
  const Network net0 = load_input(c);
  const TopologyChoices ch = parse_choices(c.topology, net0);
  StartupReport rep;
  const FlowState s = start_from_irregular(net0, ch, startup_options(c), &rep);
  save_network((fs::path(c.output) / "resolved.json").string(), s.net);
  const int predicted = predicted_counts(net0, ch).curves;
  m["curves"] = s.net.curves.size();
  m["predicted_curves"] = predicted;
  m["blend_error"] = rep.blend_error;
  m["herring"] = herring_residual(s);
  log << "resolved network: " << s.net.curves.size() << " curves (predicted " << predicted << "), blend error "
      << rep.blend_error << '\n';
  return static_cast<int>(s.net.curves.size()) == predicted ? exit_code::ok : exit_code::audit_failed;
}

int cmd_evolve(const RunConfig& c, std::ostream& log, json& m) {
  const Network net0 = load_input(c);
  const TopologyChoices ch = parse_choices(c.topology, net0);
  FlowState s = ch.empty() ? make_state(net0, 0.0) : start_from_irregular(net0, ch, startup_options(c));
  const ViewBox vb = view_box(net0);
  const double diameter = net0.diameter();

  EvolveOptions eo;
  eo.dt = c.dt;
  eo.detect = c.detect;
  auto schedule = [&](double from) {
    eo.snapshots.clear();
    for (int k = 0; k <= c.snapshots; ++k) eo.snapshots.push_back(from + (c.t_end - from) * k / std::max(c.snapshots, 1));
  };
  schedule(s.t);
  if (s.t >= c.t_end) throw PreconditionError("t_end must exceed the start time");

  std::vector<FlowState> frames;
  json segments = json::array();
  bool pass = true;
  Trajectory tr = evolve(s, c.t_end, eo);
  for (;;) {
    frames.insert(frames.end(), tr.snapshots.begin(), tr.snapshots.end());
    json seg{{"start", tr.times.front()}, {"end", tr.final.t}, {"audit", audit_json(tr.audit, diameter, c)}};
    pass = pass && seg["audit"]["pass"].get<bool>();
    if (!tr.halted.empty()) {
      seg["halted"] = tr.halted;
      segments.push_back(seg);
      log << "halted: " << tr.halted << '\n';
      m["segments"] = segments;
      return exit_code::singularity;
    }
    if (!tr.event) {
      segments.push_back(seg);
      break;
    }
    const TransitionEvent& ev = *tr.event;
    seg["event"] = {{"time", ev.time}, {"edges", ev.edges}, {"curvature", ev.curvature}, {"edge_length", ev.edge_length}};
    segments.push_back(seg);
    frames.push_back(tr.final);
    log << "standard transition at t = " << ev.time << '\n';
    if (c.restart_topology.empty()) break;
    TopologyChoices rc;
    for (int v : ev.vertices) rc[v] = TopologyDescriptor::parse(c.restart_topology, static_cast<int>(ev.limit.vertices[static_cast<std::size_t>(v)].incident.size()));
    StartupOptions so = startup_options(c);
    so.mesh = mesh_size(ev.limit);
    so.r = std::min(c.radius, 0.2);
    s = restart(ev, rc, so);
    if (s.t >= c.t_end) break;
    schedule(s.t);
    eo.detect = false;
    tr = evolve(s, c.t_end, eo);
  }

  auto csv = open_out(fs::path(c.output) / "trajectory.csv");
  csv << "t,curve,node,x,y\n";
  for (std::size_t k = 0; k < frames.size(); ++k) {
    const auto& f = frames[k];
    for (std::size_t cid = 0; cid < f.net.curves.size(); ++cid) {
      const auto& pts = f.net.curves[cid].points();
      for (std::size_t i = 0; i < pts.size(); ++i)
        csv << fmt(f.t) << ',' << cid << ',' << i << ',' << fmt(pts[i].x()) << ',' << fmt(pts[i].y()) << '\n';
    }
    if (c.emit_svg) {
      char name[32];
      std::snprintf(name, sizeof name, "frame_%04zu.svg", k);
      write_svg(fs::path(c.output) / name, f.net, vb, f.t);
    }
  }
  m["segments"] = segments;
  m["frames"] = frames.size();
  m["curves"] = frames.empty() ? 0 : frames.back().net.curves.size();
  m["final_length"] = frames.empty() ? 0.0 : frames.back().net.total_length();
  log << "evolved to t = " << (frames.empty() ? s.t : frames.back().t) << ", " << frames.size() << " snapshots, audit "
      << (pass ? "PASS" : "FAIL") << '\n';
  return pass ? exit_code::ok : exit_code::audit_failed;
}

int cmd_heatmodel(const RunConfig& c, std::ostream& log, json& m) {
  std::vector<Rational> seeds;
  for (int j = 0; j <= c.heat_order; ++j) seeds.push_back(Rational(j % 3 + 1, j + 1));
  const SeriesTable table = build_series_table(c.heat_order, seeds);
  auto f = open_out(fs::path(c.output) / "heat_coefficients.csv");
  write_series_csv(f, table);
  const ConsistencyReport rep = cross_consistency(table);
  const bool ids = table_identities_hold(table);
  m["order"] = c.heat_order;
  m["recursions"] = ids;
  m["consistency"] = rep.ok;
  log << "recursions: " << (ids ? "PASS" : "FAIL") << '\n';
  log << "c/A consistency: " << (rep.ok ? "PASS" : "FAIL") << '\n';
  return ids && rep.ok ? exit_code::ok : exit_code::audit_failed;
}

int cmd_expand(const RunConfig& c, std::ostream& log, json& m) {
  const Network net0 = load_input(c);
  const TopologyChoices ch = parse_choices(c.topology, net0);
  if (ch.size() != 1) throw PreconditionError("expand needs exactly one topology choice");
  const auto& [v, topo] = *ch.begin();
  Fan fan;
  for (const auto& f : extract_fans(net0))
    if (f.vertex == v) fan = f;
  const int J = std::max(c.order, 1);
  std::vector<std::vector<Vec2>> taylor;
  for (std::size_t l = 0; l < fan.ends.size(); ++l) {
    auto jet = curve_taylor(net0.curves[static_cast<std::size_t>(fan.ends[l].curve)], fan.ends[l].end, J + 1);
    jet[1] = jet[1].norm() * fan.directions[l];
    taylor.push_back(std::move(jet));
  }
  Fan centered = fan;
  centered.center = Vec2::Zero();
  SolitonOptions so;
  so.radius = c.soliton_radius;
  const SolitonNetwork sol = solve_soliton(centered, topo, so);
  ExpansionOptions eo;
  eo.order = J;
  eo.max_order = std::max(eo.max_order, J);
  const Expansion ex = build_expansion(sol, taylor, {}, eo);
  {
    auto f = open_out(fs::path(c.output) / "jets.json");
    f << jet_dump(ex) << '\n';
  }
  json orders = json::array();
  for (int j = 0; j <= J; ++j) {
    const DefectOrder d = defect_order(ex, {0.04, 0.02, 0.01, 0.005}, 3.0, j);
    auto f = open_out(fs::path(c.output) / ("defect_J" + std::to_string(j) + ".csv"));
    write_defect_csv(f, d);
    orders.push_back(d.order);
    log << "J = " << j << ": defect order " << d.order << '\n';
  }
  bool parity = true;
  for (const auto& jet : ex.jets)
    for (int j = 1; j < static_cast<int>(jet.poly.size()); ++j) parity = parity && parity_ok(j, jet.poly[static_cast<std::size_t>(j)]);
  m["defect_orders"] = orders;
  m["parity"] = parity;
  log << "parity: " << (parity ? "PASS" : "FAIL") << '\n';
  return parity ? exit_code::ok : exit_code::audit_failed;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string config_to_json(const RunConfig& c) { return to_json(c).dump(2); }

RunConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("config must be a JSON object");
  RunConfig c;
  std::set<std::string> known;
  visit(c, [&](const char* key, auto& v) {
    known.insert(key);
    if (!j.contains(key)) return;
    try {
      j.at(key).get_to(v);
    } catch (const json::exception& e) {
      throw ParseError(std::string("config field ") + key + ": " + e.what());
    }
  });
  for (const auto& [k, val] : j.items())
    if (!known.count(k)) throw ParseError("unknown config field " + k);
  return c;
}

void check_config(const RunConfig& c) {
  auto positive = [](double x, const char* name) {
    if (!(x > 0.0)) throw PreconditionError(std::string(name) + " must be positive");
  };
  positive(c.t0, "t0");
  positive(c.radius, "radius");
  positive(c.dt, "dt");
  positive(c.mesh, "mesh");
  positive(c.regular_tol, "regular_tol");
  positive(c.herring_tol, "herring_tol");
  positive(c.length_tol, "length_tol");
  positive(c.soliton_radius, "soliton_radius");
  if (c.fixture_nodes < 3) throw PreconditionError("fixture_nodes must be at least 3");
  if (c.snapshots < 1) throw PreconditionError("snapshots must be at least 1");
  if (c.order < 0) throw PreconditionError("order must be non-negative");
  if (c.threads < 1) throw PreconditionError("threads must be at least 1");
}

TopologyChoices parse_choices(const std::vector<std::string>& specs, const Network& net) {
  TopologyChoices out;
  for (const auto& s : specs) {
    const auto colon = s.find(':');
    if (s.empty() || s[0] != 'v' || colon == std::string::npos) throw ParseError("topology choice '" + s + "' is not v<id>:<descriptor>");
    int label = 0;
    try {
      label = std::stoi(s.substr(1, colon - 1));
    } catch (const std::exception&) {
      throw ParseError("bad vertex label in '" + s + "'");
    }
    const int v = label - 1;
    if (v < 0 || v >= static_cast<int>(net.vertices.size())) throw PreconditionError("topology choice names missing vertex v" + std::to_string(label));
    const auto& vx = net.vertices[static_cast<std::size_t>(v)];
    if (vx.kind != VertexKind::Interior) throw PreconditionError("v" + std::to_string(label) + " is not interior");
    out[v] = TopologyDescriptor::parse(s.substr(colon + 1), static_cast<int>(vx.incident.size()));
  }
  return out;
}

int run(const RunConfig& config, std::ostream& log) {
  json m;
  m["version"] = version_string();
  m["config"] = to_json(config);
  int code = exit_code::internal;
  try {
    check_config(config);
    ensure_dir(config.output);
    if (config.command == "check") code = cmd_check(config, log, m);
    else if (config.command == "solitons") code = cmd_solitons(config, log, m);
    else if (config.command == "resolve") code = cmd_resolve(config, log, m);
    else if (config.command == "evolve") code = cmd_evolve(config, log, m);
    else if (config.command == "heatmodel") code = cmd_heatmodel(config, log, m);
    else if (config.command == "expand") code = cmd_expand(config, log, m);
    else throw UsageError("unknown subcommand '" + config.command + "'");
  } catch (const UsageError& e) {
    code = exit_code::usage, m["error"] = e.what();
  } catch (const ParseError& e) {
    code = exit_code::io, m["error"] = e.what();
  } catch (const std::ios_base::failure& e) {
    code = exit_code::io, m["error"] = e.what();
  } catch (const InvalidNetwork& e) {
    code = exit_code::invalid_input, m["error"] = e.what();
  } catch (const InvalidCurve& e) {
    code = exit_code::invalid_input, m["error"] = e.what();
  } catch (const PreconditionError& e) {
    code = exit_code::invalid_input, m["error"] = e.what();
  } catch (const UnsupportedValence& e) {
    code = exit_code::invalid_input, m["error"] = e.what();
  } catch (const TopologyDegenerate& e) {
    code = exit_code::topology_degenerate, m["error"] = e.what();
  } catch (const StartupError& e) {
    code = exit_code::startup, m["error"] = e.what();
  } catch (const StepFailure& e) {
    code = exit_code::step, m["error"] = e.what();
  } catch (const DegenerateParametrization& e) {
    code = exit_code::step, m["error"] = e.what();
  } catch (const UnsupportedSingularity& e) {
    code = exit_code::singularity, m["error"] = e.what();
  } catch (const SolverFailure& e) {
    code = exit_code::solver, m["error"] = e.what();
  } catch (const InversionFailure& e) {
    code = exit_code::solver, m["error"] = e.what();
  } catch (const FitFailure& e) {
    code = exit_code::solver, m["error"] = e.what();
  } catch (const std::exception& e) {
    code = exit_code::internal, m["error"] = e.what();
  }
  if (m.contains("error")) log << "error: " << m["error"].get<std::string>() << '\n';
  m["exit_code"] = code;
  try {
    if (fs::is_directory(config.output)) write_json(fs::path(config.output) / "manifest.json", m);
  } catch (const std::exception&) {
    if (code == exit_code::ok) code = exit_code::io;
  }
  return code;
}

}  // namespace netflow
