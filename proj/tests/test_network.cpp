#include <doctest.h>

#include "netflow/fixtures.hpp"
#include "netflow/network.hpp"
#include "netflow/network_io.hpp"

#include <random>
#include <sstream>

using namespace netflow;

namespace {

constexpr double deg = kPi / 180.0;

Network transformed(const Network& net, double phi, const Vec2& shift) {
  Network out;
  const Mat2 r = rotation(phi);
  for (const auto& c : net.curves) {
    Points pts;
    for (const auto& p : c.points()) pts.push_back(r * p + shift);
    out.curves.emplace_back(c.params(), std::move(pts), c.closed());
  }
  for (auto v : net.vertices) {
    v.position = r * v.position + shift;
    out.vertices.push_back(v);
  }
  return out;
}

Network with_reversed_curve(const Network& net, int curve) {
  Network out = net;
  out.curves[static_cast<std::size_t>(curve)] = net.curves[static_cast<std::size_t>(curve)].reversed();
  for (auto& v : out.vertices)
    for (auto& e : v.incident)
      if (e.curve == curve) e.end = e.end == End::Start ? End::End : End::Start;
  return out;
}

}  // namespace

TEST_CASE("symmetric triod is regular") {
  const auto net = triod_network(90 * deg, 210 * deg, 330 * deg, 9);
  validate(net, {.check_embedded = true});
  const auto rep = check_regular(net, 1e-9);
  REQUIRE(rep.vertices.size() == 1);
  CHECK(rep.vertices[0].regular);
  CHECK(rep.vertices[0].tangent_sum_norm < 1e-14);
  CHECK(rep.all_regular());
}

TEST_CASE("orthogonal cross is irregular by valence") {
  const auto rep = check_regular(cross_network(9), 1e-9);
  CHECK_FALSE(rep.vertices[0].regular);
  CHECK(rep.vertices[0].valence == 4);
  CHECK(rep.irregular_vertices() == std::vector<int>{0});
}

TEST_CASE("skewed triod tangent sum") {
  const auto rep = check_regular(triod_network(0.0, 90 * deg, 225 * deg, 9), 1e-9);
  CHECK_FALSE(rep.vertices[0].regular);
  CHECK(rep.vertices[0].tangent_sum_norm == doctest::Approx(std::sqrt(2.0) - 1.0).epsilon(1e-12));
  // Gaps 90, 135, 135 against 120.
  std::vector<double> defects = rep.vertices[0].angle_defects;
  std::sort(defects.begin(), defects.end());
  CHECK(defects[0] == doctest::Approx(-30 * deg));
  CHECK(defects[2] == doctest::Approx(15 * deg));
}

TEST_CASE("regularity is invariant under rigid motions and reversal") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  const auto base = star_network(Vec2(0.2, -0.1), {{0.3, 1.0, 0.4}, {2.0, 0.7, -0.2}, {4.1, 1.3, 0.1}}, 17);
  const auto ref = check_regular(base, 1e-9).vertices[0];
  for (int trial = 0; trial < 20; ++trial) {
    const auto moved = transformed(base, u(rng), Vec2(u(rng), u(rng)));
    const auto rep = check_regular(moved, 1e-9).vertices[0];
    CHECK(rep.tangent_sum_norm == doctest::Approx(ref.tangent_sum_norm).epsilon(1e-10));
    CHECK(rep.max_deviation == doctest::Approx(ref.max_deviation).epsilon(1e-10));
  }
  for (int c = 0; c < 3; ++c) {
    const auto flipped = with_reversed_curve(base, c);
    validate(flipped);
    const auto rep = check_regular(flipped, 1e-9).vertices[0];
    CHECK(rep.tangent_sum_norm == doctest::Approx(ref.tangent_sum_norm).epsilon(1e-12));
  }
}

TEST_CASE("endpoint derivative is second-order on a nonuniform grid") {
  Eigen::VectorXd x(5);
  x << 0.0, 0.1, 0.25, 0.6, 1.0;
  Points pts;
  for (int i = 0; i < 5; ++i) pts.emplace_back(x(i), x(i) * x(i));
  const PolyCurve c(x, pts);
  CHECK((c.start_derivative() - Vec2(1.0, 0.0)).norm() < 1e-13);
  CHECK((c.end_derivative() - Vec2(1.0, 2.0)).norm() < 1e-13);
}

TEST_CASE("fan extraction") {
  SUBCASE("triod") {
    const auto fans = extract_fans(triod_network(0.1, 2.2, 4.0, 5));
    REQUIRE(fans.size() == 1);
    CHECK(fans[0].valence() == 3);
  }
  SUBCASE("two 4-valent vertices") {
    auto a = cross_network(5);
    const auto b = transformed(cross_network(5), 0.0, Vec2(5.0, 0.0));
    const int off = static_cast<int>(a.curves.size());
    for (const auto& c : b.curves) a.curves.push_back(c);
    for (auto v : b.vertices) {
      for (auto& e : v.incident) e.curve += off;
      a.vertices.push_back(v);
    }
    validate(a);
    const auto fans = extract_fans(a);
    REQUIRE(fans.size() == 2);
    CHECK(fans[0].valence() == 4);
    CHECK(fans[1].valence() == 4);
  }
  SUBCASE("random 5-valent fans are unit and sorted") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u(0.0, 2.0 * kPi);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<RayArm> arms;
      std::vector<double> angles;
      while (angles.size() < 5) {
        const double a = u(rng);
        bool far = true;
        for (double b : angles) far = far && std::abs(std::remainder(a - b, 2 * kPi)) > 0.2;
        if (far) angles.push_back(a);
      }
      for (double a : angles) arms.push_back({a, 1.0, 0.0});
      const auto fans = extract_fans(star_network(Vec2::Zero(), arms, 4));
      const auto got = fans.at(0).angles();
      for (const auto& d : fans[0].directions) CHECK(d.norm() == doctest::Approx(1.0).epsilon(1e-14));
      CHECK(std::is_sorted(got.begin(), got.end()));
      for (double g : got) CHECK(g >= 0.0);
    }
  }
}

TEST_CASE("validation rejects broken networks") {
  auto net = triod_network(0.0, 2.0, 4.0, 5);
  SUBCASE("vertex mismatch") {
    net.vertices[0].position += Vec2(1e-3, 0.0);
    CHECK_THROWS_AS(validate(net), InvalidNetwork);
  }
  SUBCASE("two-valent interior vertex") {
    net.vertices[0].incident.pop_back();
    CHECK_THROWS_AS(validate(net), InvalidNetwork);
  }
  SUBCASE("tangential arms") {
    const auto bad = star_network(Vec2::Zero(), {{0.0, 1.0, 0.0}, {0.0, 1.0, 0.3}, {3.0, 1.0, 0.0}}, 5);
    CHECK_THROWS_AS(validate(bad), InvalidNetwork);
  }
  SUBCASE("crossing curves") {
    const auto bad = star_network(Vec2::Zero(), {{0.0, 1.0, 3.0}, {1.2, 3.0, 0.0}, {3.0, 1.0, 0.0}}, 30);
    CHECK_NOTHROW(validate(bad));
    CHECK_THROWS_AS(validate(bad, {.check_embedded = true}), InvalidNetwork);
  }
  SUBCASE("repeated sample") {
    Points pts{Vec2(0, 0), Vec2(0, 0), Vec2(1, 0)};
    CHECK_THROWS_AS(PolyCurve::uniform(pts), InvalidCurve);
  }
}

TEST_CASE("JSON round trip and non-finite rejection") {
  const auto net = star_network(Vec2(0.5, 0.25), {{0.3, 1.0, 0.4}, {2.0, 0.7, -0.2}, {4.1, 1.3, 0.1}}, 7);
  std::stringstream ss;
  ss.precision(17);
  write_network(ss, net);
  const auto back = read_network(ss);
  REQUIRE(back.curves.size() == net.curves.size());
  for (std::size_t c = 0; c < net.curves.size(); ++c)
    for (int i = 0; i < net.curves[c].size(); ++i)
      CHECK(back.curves[c].points()[static_cast<std::size_t>(i)] == net.curves[c].points()[static_cast<std::size_t>(i)]);
  CHECK(back.vertices[0].incident == net.vertices[0].incident);

  std::stringstream bad(R"({"curves":[{"points":[[0,0],[1e999,0]]}],"vertices":[]})");
  CHECK_THROWS_AS(read_network(bad), ParseError);
  std::stringstream bad2(R"({"curves":[{"points":[[0,0],[NaN,0]]}],"vertices":[]})");
  CHECK_THROWS_AS(read_network(bad2), ParseError);
}
