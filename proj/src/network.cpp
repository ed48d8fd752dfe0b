#include "netflow/network.hpp"

#include <algorithm>
#include <numeric>

namespace netflow {

namespace {

// First derivative at x0 from three nodes on a nonuniform grid.
Vec2 one_sided(double x0, double x1, double x2, const Vec2& f0, const Vec2& f1, const Vec2& f2) {
  const double h1 = x1 - x0, h2 = x2 - x1;
  return -(2.0 * h1 + h2) / (h1 * (h1 + h2)) * f0 + (h1 + h2) / (h1 * h2) * f1 - h1 / (h2 * (h1 + h2)) * f2;
}

bool segments_cross(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
  auto orient = [](const Vec2& p, const Vec2& q, const Vec2& r) { return cross2(Vec2(q - p), Vec2(r - p)); };
  const double d1 = orient(c, d, a), d2 = orient(c, d, b), d3 = orient(a, b, c), d4 = orient(a, b, d);
  return ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0));
}

}  // namespace

PolyCurve::PolyCurve(Eigen::VectorXd params, Points points, bool closed)
    : params_(std::move(params)), points_(std::move(points)), closed_(closed) {
  if (points_.size() < 2) throw InvalidCurve("curve needs at least two samples");
  if (params_.size() != static_cast<Eigen::Index>(points_.size()))
    throw InvalidCurve("params and points differ in length");
  if (std::abs(params_(0)) > 1e-14 || std::abs(params_(params_.size() - 1) - 1.0) > 1e-14)
    throw InvalidCurve("parameter grid must run from 0 to 1");
  for (Eigen::Index i = 1; i < params_.size(); ++i)
    if (!(params_(i) > params_(i - 1))) throw InvalidCurve("parameter grid not increasing");
  for (const auto& p : points_)
    if (!p.allFinite()) throw InvalidCurve("non-finite sample");
  for (std::size_t i = 1; i < points_.size(); ++i)
    if ((points_[i] - points_[i - 1]).norm() == 0.0) throw InvalidCurve("repeated consecutive sample");
}

PolyCurve PolyCurve::uniform(Points points, bool closed) {
  const auto n = static_cast<Eigen::Index>(points.size());
  return PolyCurve(Eigen::VectorXd::LinSpaced(n, 0.0, 1.0), std::move(points), closed);
}

Vec2 PolyCurve::start_derivative() const {
  const auto& x = params_;
  if (closed_) {
    // Periodic grid: the last sample repeats the first.
    const int n = size();
    const double h = x(1) - x(0), hm = x(n - 1) - x(n - 2);
    return (points_[1] - points_[n - 2]) / (h + hm);
  }
  if (size() == 2) return (points_[1] - points_[0]) / (x(1) - x(0));
  return one_sided(x(0), x(1), x(2), points_[0], points_[1], points_[2]);
}

Vec2 PolyCurve::end_derivative() const {
  const auto& x = params_;
  const int n = size();
  if (closed_) return start_derivative();
  if (n == 2) return (points_[1] - points_[0]) / (x(1) - x(0));
  // Mirror the grid so the same formula applies.
  return -one_sided(-x(n - 1), -x(n - 2), -x(n - 3), points_[n - 1], points_[n - 2], points_[n - 3]);
}

double PolyCurve::length() const {
  double len = 0.0;
  for (std::size_t i = 1; i < points_.size(); ++i) len += (points_[i] - points_[i - 1]).norm();
  return len;
}

PolyCurve PolyCurve::reversed() const {
  const auto n = params_.size();
  Eigen::VectorXd p(n);
  for (Eigen::Index i = 0; i < n; ++i) p(i) = 1.0 - params_(n - 1 - i);
  p(0) = 0.0;
  p(n - 1) = 1.0;
  Points pts(points_.rbegin(), points_.rend());
  return PolyCurve(std::move(p), std::move(pts), closed_);
}

Vec2 PolyCurve::at_arclength_fraction(double u) const {
  const double total = length();
  const double target = std::clamp(u, 0.0, 1.0) * total;
  double acc = 0.0;
  for (std::size_t i = 1; i < points_.size(); ++i) {
    const double seg = (points_[i] - points_[i - 1]).norm();
    if (acc + seg >= target) {
      const double w = seg > 0 ? (target - acc) / seg : 0.0;
      return (1.0 - w) * points_[i - 1] + w * points_[i];
    }
    acc += seg;
  }
  return points_.back();
}

PolyCurve PolyCurve::resampled(int nodes) const {
  if (nodes < 2) throw InvalidCurve("resampling needs at least two nodes");
  Points out;
  out.reserve(static_cast<std::size_t>(nodes));
  // Single pass over the polyline.
  const double total = length();
  std::size_t seg = 1;
  double acc = 0.0;
  for (int k = 0; k < nodes; ++k) {
    const double target = total * k / (nodes - 1);
    while (seg + 1 < points_.size() && acc + (points_[seg] - points_[seg - 1]).norm() < target) {
      acc += (points_[seg] - points_[seg - 1]).norm();
      ++seg;
    }
    const double len = (points_[seg] - points_[seg - 1]).norm();
    const double w = len > 0 ? std::clamp((target - acc) / len, 0.0, 1.0) : 0.0;
    out.push_back((1.0 - w) * points_[seg - 1] + w * points_[seg]);
  }
  out.front() = points_.front();
  out.back() = points_.back();
  return PolyCurve::uniform(std::move(out), closed_);
}

double Network::diameter() const {
  double lo_x = 1e300, lo_y = 1e300, hi_x = -1e300, hi_y = -1e300;
  for (const auto& c : curves)
    for (const auto& p : c.points()) {
      lo_x = std::min(lo_x, p.x());
      lo_y = std::min(lo_y, p.y());
      hi_x = std::max(hi_x, p.x());
      hi_y = std::max(hi_y, p.y());
    }
  if (curves.empty()) return 0.0;
  return std::hypot(hi_x - lo_x, hi_y - lo_y);
}

Vec2 Network::end_position(const CurveEnd& e) const {
  const auto& c = curves.at(static_cast<std::size_t>(e.curve));
  return e.end == End::Start ? c.front() : c.back();
}

Vec2 Network::outgoing_tangent(const CurveEnd& e) const {
  const auto& c = curves.at(static_cast<std::size_t>(e.curve));
  const Vec2 d = e.end == End::Start ? c.start_derivative() : Vec2(-c.end_derivative());
  const double n = d.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw InvalidCurve("degenerate tangent at curve " + std::to_string(e.curve));
  return d / n;
}

double Network::total_length() const {
  double len = 0.0;
  for (const auto& c : curves) len += c.length();
  return len;
}

void validate(const Network& net, const ValidationOptions& options) {
  const double tol = options.tolerance.value_or(net.default_tolerance());
  const int n_curves = static_cast<int>(net.curves.size());
  std::vector<int> seen(static_cast<std::size_t>(2 * n_curves), 0);

  for (std::size_t v = 0; v < net.vertices.size(); ++v) {
    const auto& vx = net.vertices[v];
    const auto k = vx.incident.size();
    if (vx.kind == VertexKind::Interior && k < 3)
      throw InvalidNetwork("interior vertex " + std::to_string(v) + " has fewer than 3 incident curve ends");
    if (vx.kind == VertexKind::Exterior && k != 1)
      throw InvalidNetwork("exterior vertex " + std::to_string(v) + " must have exactly one incident curve end");
    for (const auto& e : vx.incident) {
      if (e.curve < 0 || e.curve >= n_curves) throw InvalidNetwork("incident curve id out of range");
      if (net.curves[static_cast<std::size_t>(e.curve)].closed())
        throw InvalidNetwork("closed curves cannot meet vertices");
      auto& slot = seen[static_cast<std::size_t>(2 * e.curve + (e.end == End::End ? 1 : 0))];
      if (slot++) throw InvalidNetwork("curve end attached to two vertices");
      if ((net.end_position(e) - vx.position).norm() > tol)
        throw InvalidNetwork("curve " + std::to_string(e.curve) + " end does not meet vertex " + std::to_string(v));
    }
    if (vx.kind == VertexKind::Interior) {
      std::vector<Vec2> dirs;
      for (const auto& e : vx.incident) dirs.push_back(net.outgoing_tangent(e));
      for (std::size_t a = 0; a < dirs.size(); ++a)
        for (std::size_t b = a + 1; b < dirs.size(); ++b)
          if ((dirs[a] - dirs[b]).norm() <= tol)
            throw InvalidNetwork("tangential curves at vertex " + std::to_string(v));
    }
  }
  for (int c = 0; c < n_curves; ++c) {
    const auto& curve = net.curves[static_cast<std::size_t>(c)];
    if (curve.closed()) continue;
    if (!seen[static_cast<std::size_t>(2 * c)] || !seen[static_cast<std::size_t>(2 * c + 1)])
      throw InvalidNetwork("curve " + std::to_string(c) + " has a free end");
    (void)net.outgoing_tangent({c, End::Start});
    (void)net.outgoing_tangent({c, End::End});
  }

  if (!options.check_embedded) return;
  struct Seg {
    int curve;
    int index;
    Vec2 a, b;
  };
  std::vector<Seg> segs;
  for (int c = 0; c < n_curves; ++c) {
    const auto& pts = net.curves[static_cast<std::size_t>(c)].points();
    for (std::size_t i = 1; i < pts.size(); ++i) segs.push_back({c, static_cast<int>(i), pts[i - 1], pts[i]});
  }
  for (std::size_t i = 0; i < segs.size(); ++i)
    for (std::size_t j = i + 1; j < segs.size(); ++j) {
      if (segs[i].curve == segs[j].curve && std::abs(segs[i].index - segs[j].index) <= 1) continue;
      if (segments_cross(segs[i].a, segs[i].b, segs[j].a, segs[j].b))
        throw InvalidNetwork("curves " + std::to_string(segs[i].curve) + " and " + std::to_string(segs[j].curve) +
                             " intersect");
    }
}

bool RegularityReport::all_regular() const {
  return std::all_of(vertices.begin(), vertices.end(), [](const auto& v) { return v.regular; });
}

std::vector<int> RegularityReport::irregular_vertices() const {
  std::vector<int> out;
  for (const auto& v : vertices)
    if (!v.regular) out.push_back(v.vertex);
  return out;
}

RegularityReport check_regular(const Network& net, double tol) {
  RegularityReport report;
  for (std::size_t v = 0; v < net.vertices.size(); ++v) {
    const auto& vx = net.vertices[v];
    if (vx.kind != VertexKind::Interior) continue;
    VertexRegularity r;
    r.vertex = static_cast<int>(v);
    r.valence = static_cast<int>(vx.incident.size());
    Vec2 sum = Vec2::Zero();
    std::vector<double> angles;
    for (const auto& e : vx.incident) {
      const Vec2 t = net.outgoing_tangent(e);
      sum += t;
      angles.push_back(angle_of(t));
    }
    std::sort(angles.begin(), angles.end());
    for (std::size_t i = 0; i < angles.size(); ++i) {
      const double next = i + 1 < angles.size() ? angles[i + 1] : angles[0] + 2.0 * kPi;
      r.angle_defects.push_back(next - angles[i] - 2.0 * kPi / 3.0);
    }
    r.tangent_sum_norm = sum.norm();
    r.max_deviation = r.tangent_sum_norm;
    for (double d : r.angle_defects) r.max_deviation = std::max(r.max_deviation, std::abs(d));
    r.regular = r.valence == 3 && r.tangent_sum_norm <= tol;
    report.vertices.push_back(std::move(r));
  }
  return report;
}

std::vector<double> Fan::angles() const {
  std::vector<double> a;
  for (const auto& d : directions) a.push_back(angle_of(d));
  return a;
}

Fan Fan::from_angles(const std::vector<double>& angles, Vec2 center) {
  Fan f;
  f.center = center;
  std::vector<double> a = angles;
  for (auto& x : a) x = wrap_angle(x);
  std::sort(a.begin(), a.end());
  for (double x : a) f.directions.push_back(unit_at(x));
  return f;
}

Fan Fan::rotated(double phi) const {
  std::vector<double> a = angles();
  for (auto& x : a) x += phi;
  Fan f = from_angles(a, rotation(phi) * center);
  return f;
}

std::vector<Fan> extract_fans(const Network& net) {
  std::vector<Fan> fans;
  for (std::size_t v = 0; v < net.vertices.size(); ++v) {
    const auto& vx = net.vertices[v];
    if (vx.kind != VertexKind::Interior) continue;
    std::vector<std::pair<double, CurveEnd>> rays;
    for (const auto& e : vx.incident) rays.emplace_back(angle_of(net.outgoing_tangent(e)), e);
    std::sort(rays.begin(), rays.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    Fan f;
    f.center = vx.position;
    f.vertex = static_cast<int>(v);
    for (const auto& [a, e] : rays) {
      f.directions.push_back(unit_at(a));
      f.ends.push_back(e);
    }
    fans.push_back(std::move(f));
  }
  return fans;
}

}  // namespace netflow
