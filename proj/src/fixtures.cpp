#include "netflow/fixtures.hpp"

namespace netflow {

PolyCurve arm_curve(const Vec2& p, const Vec2& d, const Vec2& q, int nodes) {
  const double len = (q - p).norm();
  const Vec2 quad = q - p - len * d;
  Points pts;
  for (int i = 0; i < nodes; ++i) {
    const double x = static_cast<double>(i) / (nodes - 1);
    pts.push_back(p + len * d * x + quad * x * x);
  }
  pts.back() = q;
  return PolyCurve::uniform(std::move(pts));
}

Network star_network(const Vec2& center, const std::vector<RayArm>& arms, int nodes) {
  Network net;
  Vertex c;
  c.kind = VertexKind::Interior;
  c.position = center;
  net.vertices.push_back(c);
  for (const auto& arm : arms) {
    const Vec2 d = unit_at(arm.angle);
    const Vec2 n = rotate_left(d);
    Points pts;
    for (int i = 0; i < nodes; ++i) {
      const double x = static_cast<double>(i) / (nodes - 1);
      pts.push_back(center + arm.length * (x * d + arm.bend * x * x * n));
    }
    pts.front() = center;
    const int id = static_cast<int>(net.curves.size());
    net.curves.push_back(PolyCurve::uniform(pts));
    net.vertices[0].incident.push_back({id, End::Start});
    net.vertices.push_back({VertexKind::Exterior, pts.back(), {{id, End::End}}});
  }
  return net;
}

Network triod_network(double a1, double a2, double a3, int nodes, double length) {
  return star_network(Vec2::Zero(), {{a1, length, 0.0}, {a2, length, 0.0}, {a3, length, 0.0}}, nodes);
}

Network cross_network(int nodes, double bend, double length) {
  std::vector<RayArm> arms;
  for (int i = 0; i < 4; ++i) arms.push_back({i * kPi / 2.0, length, bend});
  return star_network(Vec2::Zero(), arms, nodes);
}

Network bowtie_network(double a, double e, int nodes) {
  Network net;
  const Vec2 p(-e, 0.0), q(e, 0.0);
  net.vertices.push_back({VertexKind::Interior, p, {}});
  net.vertices.push_back({VertexKind::Interior, q, {}});
  net.curves.push_back(arm_curve(p, Vec2(1, 0), q, nodes));
  net.vertices[0].incident.push_back({0, End::Start});
  net.vertices[1].incident.push_back({0, End::End});
  const double deg = kPi / 180.0;
  struct Arm {
    int junction;
    double angle;
    Vec2 target;
  };
  const Arm arms[] = {{1, 60 * deg, {a, 1.0}}, {0, 120 * deg, {-a, 1.0}}, {0, 240 * deg, {-a, -1.0}},
                      {1, 300 * deg, {a, -1.0}}};
  for (const auto& arm : arms) {
    const Vec2 from = net.vertices[static_cast<std::size_t>(arm.junction)].position;
    const int id = static_cast<int>(net.curves.size());
    net.curves.push_back(arm_curve(from, unit_at(arm.angle), arm.target, nodes));
    net.vertices[static_cast<std::size_t>(arm.junction)].incident.push_back({id, End::Start});
    net.vertices.push_back({VertexKind::Exterior, arm.target, {{id, End::End}}});
  }
  return net;
}

Network circle_network(double radius, int nodes) {
  Points pts;
  for (int i = 0; i < nodes; ++i) pts.push_back(radius * unit_at(2.0 * kPi * i / nodes));
  pts.push_back(pts.front());
  Network net;
  net.curves.push_back(PolyCurve::uniform(std::move(pts), true));
  return net;
}

Network segment_network(const Vec2& a, const Vec2& b, int nodes) {
  Points pts;
  for (int i = 0; i < nodes; ++i) pts.push_back(a + (b - a) * (static_cast<double>(i) / (nodes - 1)));
  pts.back() = b;
  Network net;
  net.curves.push_back(PolyCurve::uniform(std::move(pts)));
  net.vertices.push_back({VertexKind::Exterior, a, {{0, End::Start}}});
  net.vertices.push_back({VertexKind::Exterior, b, {{0, End::End}}});
  return net;
}

}  // namespace netflow
