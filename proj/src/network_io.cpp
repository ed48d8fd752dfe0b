#include "netflow/network_io.hpp"

#include <json.hpp>

#include <fstream>

namespace netflow {

using nlohmann::json;

namespace {

double finite(const json& v, const char* what) {
  if (!v.is_number()) throw ParseError(std::string(what) + " must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ParseError(std::string(what) + " is not finite");
  return d;
}

Vec2 point(const json& v, const char* what) {
  if (!v.is_array() || v.size() != 2) throw ParseError(std::string(what) + " must be an [x, y] pair");
  return {finite(v[0], what), finite(v[1], what)};
}

}  // namespace

Network read_network(std::istream& in) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(std::string("network JSON: ") + e.what());
  }
  if (!doc.contains("curves") || !doc["curves"].is_array()) throw ParseError("missing \"curves\" array");
  if (!doc.contains("vertices") || !doc["vertices"].is_array()) throw ParseError("missing \"vertices\" array");

  Network net;
  for (const auto& c : doc["curves"]) {
    if (!c.contains("points") || !c["points"].is_array()) throw ParseError("curve without \"points\"");
    Points pts;
    for (const auto& p : c["points"]) pts.push_back(point(p, "curve point"));
    const bool closed = c.value("closed", false);
    if (c.contains("params")) {
      const auto& jp = c["params"];
      if (!jp.is_array()) throw ParseError("\"params\" must be an array");
      Eigen::VectorXd params(static_cast<Eigen::Index>(jp.size()));
      for (std::size_t i = 0; i < jp.size(); ++i) params(static_cast<Eigen::Index>(i)) = finite(jp[i], "param");
      net.curves.emplace_back(std::move(params), std::move(pts), closed);
    } else {
      net.curves.push_back(PolyCurve::uniform(std::move(pts), closed));
    }
  }
  for (const auto& v : doc["vertices"]) {
    Vertex vx;
    const std::string kind = v.value("kind", "");
    if (kind == "interior")
      vx.kind = VertexKind::Interior;
    else if (kind == "exterior")
      vx.kind = VertexKind::Exterior;
    else
      throw ParseError("vertex kind must be \"interior\" or \"exterior\"");
    if (!v.contains("position")) throw ParseError("vertex without \"position\"");
    vx.position = point(v["position"], "vertex position");
    for (const auto& e : v.value("incident", json::array())) {
      CurveEnd ce;
      if (!e.contains("curve") || !e["curve"].is_number_integer()) throw ParseError("incident entry needs integer \"curve\"");
      ce.curve = e["curve"].get<int>();
      const std::string end = e.value("end", "");
      if (end == "start")
        ce.end = End::Start;
      else if (end == "end")
        ce.end = End::End;
      else
        throw ParseError("incident \"end\" must be \"start\" or \"end\"");
      vx.incident.push_back(ce);
    }
    net.vertices.push_back(std::move(vx));
  }
  validate(net);
  return net;
}

Network load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  return read_network(in);
}

void write_network(std::ostream& out, const Network& net) {
  json doc;
  doc["curves"] = json::array();
  for (const auto& c : net.curves) {
    json jc;
    jc["points"] = json::array();
    for (const auto& p : c.points()) jc["points"].push_back({p.x(), p.y()});
    jc["params"] = std::vector<double>(c.params().data(), c.params().data() + c.params().size());
    jc["closed"] = c.closed();
    doc["curves"].push_back(std::move(jc));
  }
  doc["vertices"] = json::array();
  for (const auto& v : net.vertices) {
    json jv;
    jv["kind"] = v.kind == VertexKind::Interior ? "interior" : "exterior";
    jv["position"] = {v.position.x(), v.position.y()};
    jv["incident"] = json::array();
    for (const auto& e : v.incident) jv["incident"].push_back({{"curve", e.curve}, {"end", e.end == End::Start ? "start" : "end"}});
    doc["vertices"].push_back(std::move(jv));
  }
  out << doc.dump(1) << '\n';
}

void save_network(const std::string& path, const Network& net) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out.precision(17);
  write_network(out, net);
}

}  // namespace netflow
