#include "expander_detail.hpp"

#include "netflow/stencil.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <json.hpp>

#include <ostream>

namespace netflow {

using detail::wrap_pm;

namespace {

// Where an arc meets a junction: which triangle branch (0, 1, 2 in CCW order).
struct ArcEnd {
  int junction = -1;
  int branch = -1;
};

struct BlockPlan {
  int block = 0;
  int base = 0;  // first global junction id
  std::vector<std::array<int, 3>> triangles;
  std::vector<int> externals;  // global arc ids, local leaf order
  std::vector<int> internals;  // global arc ids, diagonal order
};

int branch_of(const std::array<int, 3>& t, int p, int q) {
  if (p > q) std::swap(p, q);
  if (p == t[0] && q == t[1]) return 0;
  if (p == t[1] && q == t[2]) return 1;
  if (p == t[0] && q == t[2]) return 2;
  return -1;
}

double branch_angle(double beta, int branch) { return beta + 2.0 * kPi * branch / 3.0; }

// Cubic Hermite on one interval.
Vec2 hermite(const ExpanderArc& arc, Eigen::Index i, double s, Vec2* ds = nullptr) {
  const double h = arc.s(i + 1) - arc.s(i), u = (s - arc.s(i)) / h;
  const auto a = static_cast<std::size_t>(i), b = a + 1;
  const double h00 = 2 * u * u * u - 3 * u * u + 1, h10 = u * u * u - 2 * u * u + u;
  const double h01 = -2 * u * u * u + 3 * u * u, h11 = u * u * u - u * u;
  if (ds) {
    const double d00 = 6 * u * u - 6 * u, d10 = 3 * u * u - 4 * u + 1, d01 = -6 * u * u + 6 * u, d11 = 3 * u * u - 2 * u;
    *ds = (d00 * arc.eta[a] + d01 * arc.eta[b]) / h + d10 * arc.deta[a] + d11 * arc.deta[b];
  }
  return h00 * arc.eta[a] + h10 * h * arc.deta[a] + h01 * arc.eta[b] + h11 * h * arc.deta[b];
}

// Parameter in interval i where |scale * eta| = r, with eta inside at s_i.
double crossing(const ExpanderArc& arc, Eigen::Index i, double scale, double r) {
  double lo = arc.s(i), hi = arc.s(i + 1);
  const bool rising = (scale * arc.eta[static_cast<std::size_t>(i)]).norm() <= r;
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    const bool inside = (scale * hermite(arc, i, mid)).norm() <= r;
    ((inside == rising) ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 d = b - a;
  const double l2 = d.squaredNorm();
  const double u = l2 > 0.0 ? std::clamp((p - a).dot(d) / l2, 0.0, 1.0) : 0.0;
  return (p - a - u * d).norm();
}

}  // namespace

SolitonNetwork solve_soliton(const Fan& fan, const TopologyDescriptor& topo, const SolitonOptions& opt) {
  if (fan.valence() < 3) throw UnsupportedValence("soliton needs a fan of valence at least 3");
  if (topo.k != fan.valence()) throw PreconditionError("topology and fan have different valence");
  const Skeleton sk = skeleton(topo);
  std::vector<double> angle;
  for (const auto& d : fan.directions) angle.push_back(angle_of(d));

  SolitonNetwork sol;
  sol.topology = topo;
  sol.fan = fan;
  sol.radius = opt.radius;
  sol.arcs.resize(sk.arcs.size());
  sol.junctions.resize(static_cast<std::size_t>(sk.junctions));

  std::vector<BlockPlan> plans;
  int base = 0;
  for (std::size_t bi = 0; bi < topo.blocks.size(); ++bi) {
    BlockPlan p;
    p.block = static_cast<int>(bi);
    p.base = base;
    p.triangles = topo.blocks[bi].triangles();
    for (std::size_t e = 0; e < sk.arcs.size(); ++e) {
      const auto& a = sk.arcs[e];
      if (a.block != p.block) continue;
      if (a.kind == SkeletonArc::Kind::External) p.externals.push_back(static_cast<int>(e));
      if (a.kind == SkeletonArc::Kind::Internal) p.internals.push_back(static_cast<int>(e));
      if (a.kind == SkeletonArc::Kind::Geodesic) {
        sol.arcs[e] = geodesic_bvp(angle[static_cast<std::size_t>(a.a)], angle[static_cast<std::size_t>(a.b)], opt.radius,
                                   opt.nodes);
      }
    }
    base += static_cast<int>(p.triangles.size());
    if (!p.triangles.empty()) plans.push_back(std::move(p));
  }
  if (plans.empty()) return sol;

  MinimizerOptions mo;
  mo.radius = opt.radius;
  mo.nodes = opt.minimizer_nodes;
  const DiscreteSoliton seed = minimize_g_length(fan, topo, mo);
  sol.seed = seed.junctions;

  for (const auto& plan : plans) {
    const auto& block = topo.blocks[static_cast<std::size_t>(plan.block)];
    const int b = block.size();
    const int nj = static_cast<int>(plan.triangles.size());
    auto locate = [&](int p, int q) {
      for (int t = 0; t < nj; ++t) {
        const int br = branch_of(plan.triangles[static_cast<std::size_t>(t)], p, q);
        if (br >= 0) return ArcEnd{t, br};
      }
      throw PreconditionError("inconsistent block triangulation");
    };
    std::vector<ArcEnd> ext_end;
    for (int leaf = 0; leaf < b; ++leaf) ext_end.push_back(locate(leaf, (leaf + 1) % b));
    std::vector<std::pair<ArcEnd, ArcEnd>> int_end;
    for (std::size_t d = 0; d < block.diagonals.size(); ++d) {
      const auto [p, q] = block.diagonals[d];
      const auto& sa = sk.arcs[static_cast<std::size_t>(plan.internals[d])];
      std::vector<ArcEnd> ends;
      for (int t = 0; t < nj; ++t) {
        const int br = branch_of(plan.triangles[static_cast<std::size_t>(t)], p, q);
        if (br >= 0) ends.push_back({t, br});
      }
      if (ends.size() != 2) throw PreconditionError("diagonal must border two triangles");
      if (plan.base + ends[0].junction != sa.a) std::swap(ends[0], ends[1]);
      int_end.emplace_back(ends[0], ends[1]);
    }

    // Seed from the discrete minimizer.
    const int nu = 3 * nj + static_cast<int>(int_end.size());
    Eigen::VectorXd X(nu);
    std::vector<std::vector<double>> branch_dirs(static_cast<std::size_t>(nj));
    auto record = [&](int arc, const ArcEnd& end, bool at_start) {
      const auto& pts = seed.arcs[static_cast<std::size_t>(arc)];
      const Vec2 d = at_start ? Vec2(pts[1] - pts[0]) : Vec2(pts[pts.size() - 2] - pts.back());
      branch_dirs[static_cast<std::size_t>(end.junction)].push_back(std::atan2(d.y(), d.x()) -
                                                                     2.0 * kPi * end.branch / 3.0);
    };
    for (int leaf = 0; leaf < b; ++leaf) record(plan.externals[static_cast<std::size_t>(leaf)], ext_end[static_cast<std::size_t>(leaf)], true);
    for (std::size_t d = 0; d < int_end.size(); ++d) {
      record(plan.internals[d], int_end[d].first, true);
      record(plan.internals[d], int_end[d].second, false);
    }
    for (int t = 0; t < nj; ++t) {
      X.segment<2>(3 * t) = seed.junctions[static_cast<std::size_t>(plan.base + t)];
      double cs = 0.0, sn = 0.0;
      for (double a : branch_dirs[static_cast<std::size_t>(t)]) cs += std::cos(a), sn += std::sin(a);
      X(3 * t + 2) = std::atan2(sn, cs);
    }
    for (std::size_t d = 0; d < int_end.size(); ++d) {
      const auto& pts = seed.arcs[static_cast<std::size_t>(plan.internals[d])];
      double len = 0.0;
      for (std::size_t i = 0; i + 1 < pts.size(); ++i) len += (pts[i + 1] - pts[i]).norm();
      X(3 * nj + static_cast<int>(d)) = len;
    }

    auto F = [&](const Eigen::VectorXd& z) {
      Eigen::VectorXd r(nu);
      int row = 0;
      for (int leaf = 0; leaf < b; ++leaf) {
        const auto& e = ext_end[static_cast<std::size_t>(leaf)];
        const Vec2 P = z.segment<2>(3 * e.junction);
        const double a = asymptotic_angle(P, branch_angle(z(3 * e.junction + 2), e.branch));
        const int fan_ray = sk.arcs[static_cast<std::size_t>(plan.externals[static_cast<std::size_t>(leaf)])].b;
        r(row++) = wrap_pm(a - angle[static_cast<std::size_t>(fan_ray)]);
      }
      for (std::size_t d = 0; d < int_end.size(); ++d) {
        const auto& [ea, eb] = int_end[d];
        const double len = z(3 * nj + static_cast<int>(d));
        const GeodesicState end =
            shoot_geodesic(z.segment<2>(3 * ea.junction), branch_angle(z(3 * ea.junction + 2), ea.branch), len);
        const Vec2 gap = end.position - z.segment<2>(3 * eb.junction);
        r(row++) = gap.x();
        r(row++) = gap.y();
        r(row++) = wrap_pm(end.theta - branch_angle(z(3 * eb.junction + 2), eb.branch) - kPi);
      }
      return r;
    };
    const double res = detail::newton(F, X, opt.tolerance, opt.max_iterations);
    for (std::size_t d = 0; d < int_end.size(); ++d)
      if (X(3 * nj + static_cast<int>(d)) < 1e-6)
        throw TopologyDegenerate("internal edge collapsed", plan.internals[d]);
    if (!(res <= std::max(opt.tolerance * 100.0, 1e-10))) throw SolverFailure("soliton junction system did not converge", res);

    for (int t = 0; t < nj; ++t) {
      auto& J = sol.junctions[static_cast<std::size_t>(plan.base + t)];
      J.position = X.segment<2>(3 * t);
    }
    std::vector<int> filled(static_cast<std::size_t>(nj), 0);
    auto attach = [&](int t, int arc, End end) {
      auto& J = sol.junctions[static_cast<std::size_t>(plan.base + t)];
      J.incident[static_cast<std::size_t>(filled[static_cast<std::size_t>(t)]++)] = {arc, end};
    };
    for (int leaf = 0; leaf < b; ++leaf) {
      const auto& e = ext_end[static_cast<std::size_t>(leaf)];
      const int arc = plan.externals[static_cast<std::size_t>(leaf)];
      sol.arcs[static_cast<std::size_t>(arc)] = detail::sample_external(
          X.segment<2>(3 * e.junction), branch_angle(X(3 * e.junction + 2), e.branch), opt.radius, opt.nodes);
      attach(e.junction, arc, End::Start);
    }
    for (std::size_t d = 0; d < int_end.size(); ++d) {
      const auto& [ea, eb] = int_end[d];
      const int arc = plan.internals[d];
      const double len = X(3 * nj + static_cast<int>(d));
      const int nodes = std::max(9, static_cast<int>(std::ceil(opt.nodes * len / opt.radius)));
      sol.arcs[static_cast<std::size_t>(arc)] = detail::sample_internal(
          X.segment<2>(3 * ea.junction), branch_angle(X(3 * ea.junction + 2), ea.branch), len, nodes);
      attach(ea.junction, arc, End::Start);
      attach(eb.junction, arc, End::End);
    }
  }
  return sol;
}

Eigen::VectorXd soliton_residual_profile(const ExpanderArc& arc) {
  if (arc.size() < 3) throw InsufficientData("residual needs at least three samples");
  Points d1, d2;
  grid_derivatives(arc.s, arc.eta, d1, d2, 9);
  Eigen::VectorXd r(arc.size());
  for (int i = 0; i < arc.size(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    const double speed = d1[k].norm();
    const double kappa = cross2(d1[k], d2[k]) / (speed * speed * speed);
    const Vec2 nu = rotate_left(d1[k]) / speed;
    r(i) = kappa - arc.eta[k].dot(nu);
  }
  return r;
}

double soliton_residual(const ExpanderArc& arc) { return soliton_residual_profile(arc).lpNorm<Eigen::Infinity>(); }

std::vector<double> junction_balance(const SolitonNetwork& sol) {
  std::vector<double> out;
  for (const auto& J : sol.junctions) {
    Vec2 sum = Vec2::Zero();
    for (const auto& [arc, end] : J.incident) {
      const auto& a = sol.arcs[static_cast<std::size_t>(arc)];
      sum += end == End::Start ? Vec2(a.deta.front().normalized()) : Vec2(-a.deta.back().normalized());
    }
    out.push_back(sum.norm());
  }
  return out;
}

AsymptoticFit asymptotic_fit(const ExpanderArc& arc, double s_lo, double s_hi) {
  if (arc.kind != SkeletonArc::Kind::External) throw PreconditionError("asymptotic fit needs an external arc");
  if (arc.size() < 10 || arc.s(arc.size() - 1) < 3.0) throw PreconditionError("arc must reach s >= 3");
  AsymptoticFit fit;
  const Eigen::Index n = arc.s.size();
  const Eigen::Index first = n - std::max<Eigen::Index>(2, n / 10);
  double ss = 0.0;
  for (Eigen::Index i = first; i < n; ++i) {
    fit.direction += arc.s(i) * arc.eta[static_cast<std::size_t>(i)];
    ss += arc.s(i) * arc.s(i);
  }
  fit.direction /= ss;

  std::vector<double> mu;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s = arc.s(i);
    if (s < s_lo || s > s_hi) continue;
    const auto k = static_cast<std::size_t>(i);
    fit.s.push_back(s);
    mu.push_back((s * arc.deta[k] - arc.eta[k]).norm());
  }
  const double floor = 1e-13;
  if (mu.empty() || *std::max_element(mu.begin(), mu.end()) <= floor) {
    fit.slope = -std::numeric_limits<double>::infinity();
    fit.s.clear();
    return fit;
  }
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (mu[i] <= floor) break;
    if (i > 0 && mu[i] > mu[i - 1] * (1.0 + 1e-9))
      throw FitFailure("|s eta' - eta| is not decreasing near s = " + std::to_string(fit.s[i]));
    xs.push_back(fit.s[i] * fit.s[i]);
    ys.push_back(std::log(mu[i]));
  }
  fit.s.resize(xs.size());
  fit.log_mu = ys;
  if (xs.size() < 2) throw FitFailure("too few samples above the noise floor");
  const double m = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) sx += xs[i], sy += ys[i], sxx += xs[i] * xs[i], sxy += xs[i] * ys[i];
  fit.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  return fit;
}

SolitonPatch truncate_and_scale(const SolitonNetwork& sol, double t0, double r) {
  if (!(t0 > 0.0)) throw PreconditionError("t0 must be positive");
  SolitonPatch patch;
  patch.scale = std::sqrt(2.0 * t0);
  const double lam = patch.scale;
  if (r > sol.radius * lam * (1.0 + 1e-12)) throw RangeError("excision radius exceeds the truncation radius");
  for (const auto& J : sol.junctions) {
    if (lam * J.position.norm() >= r) throw RangeError("excision radius smaller than the soliton core");
    patch.junctions.push_back(lam * J.position);
  }
  for (const auto& arc : sol.arcs) {
    const Eigen::Index n = arc.s.size();
    auto inside = [&](Eigen::Index i) { return (lam * arc.eta[static_cast<std::size_t>(i)]).norm() <= r; };
    Eigen::Index lo = 0, hi = n - 1;
    double s_lo = arc.s(0), s_hi = arc.s(n - 1);
    if (arc.kind == SkeletonArc::Kind::Internal) {
      for (Eigen::Index i = 0; i < n; ++i)
        if (!inside(i)) throw RangeError("internal arc leaves the excision ball");
    } else {
      Eigen::Index i = arc.kind == SkeletonArc::Kind::Geodesic ? n / 2 : 0;
      if (!inside(i)) throw RangeError("soliton core outside the excision ball");
      hi = i;
      while (hi + 1 < n && inside(hi + 1)) ++hi;
      if (hi + 1 < n) s_hi = crossing(arc, hi, lam, r);
      if (arc.kind == SkeletonArc::Kind::Geodesic) {
        lo = i;
        while (lo > 0 && inside(lo - 1)) --lo;
        if (lo > 0) s_lo = crossing(arc, lo - 1, lam, r);
      }
    }
    std::vector<double> ps;
    Points pts;
    auto push = [&](double s, const Vec2& p) {
      if (!pts.empty() && (p - pts.back()).norm() < 1e-9 * std::max(1.0, r)) {
        ps.back() = s;
        pts.back() = p;
        return;
      }
      ps.push_back(s);
      pts.push_back(p);
    };
    if (s_lo < arc.s(lo)) push(s_lo, lam * hermite(arc, lo - 1, s_lo));
    for (Eigen::Index i = lo; i <= hi; ++i) push(arc.s(i), lam * arc.eta[static_cast<std::size_t>(i)]);
    if (s_hi > arc.s(hi)) push(s_hi, lam * hermite(arc, hi, s_hi));
    Eigen::VectorXd params(static_cast<Eigen::Index>(ps.size()));
    for (std::size_t i = 0; i < ps.size(); ++i) params(static_cast<Eigen::Index>(i)) = (ps[i] - ps.front()) / (ps.back() - ps.front());
    params(0) = 0.0;
    params(params.size() - 1) = 1.0;
    patch.arcs.emplace_back(params, pts);
  }
  return patch;
}

double g_length(const SolitonNetwork& sol, double r) {
  if (r > sol.radius * (1.0 + 1e-12)) throw RangeError("radius exceeds the truncation radius");
  using Rule = boost::math::quadrature::gauss<double, 10>;
  double total = 0.0;
  for (const auto& arc : sol.arcs)
    for (Eigen::Index i = 0; i + 1 < arc.s.size(); ++i) {
      const bool a_in = arc.eta[static_cast<std::size_t>(i)].norm() <= r;
      const bool b_in = arc.eta[static_cast<std::size_t>(i + 1)].norm() <= r;
      if (!a_in && !b_in) continue;
      double lo = arc.s(i), hi = arc.s(i + 1);
      if (!a_in) lo = crossing(arc, i, 1.0, r);
      if (!b_in) hi = crossing(arc, i, 1.0, r);
      total += Rule::integrate(
          [&](double s) {
            Vec2 d;
            const Vec2 p = hermite(arc, i, s, &d);
            return std::exp(0.5 * p.squaredNorm()) * d.norm();
          },
          lo, hi);
    }
  return total;
}

double fan_g_length(const Fan& fan, double r) {
  const double ray = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      [](double x) { return std::exp(0.5 * x * x); }, 0.0, r, 10, 1e-14);
  return fan.valence() * ray;
}

double soliton_distance(const SolitonNetwork& a, const SolitonNetwork& b) {
  auto one_sided = [](const SolitonNetwork& p, const SolitonNetwork& q) {
    double worst = 0.0;
    for (const auto& arc : p.arcs)
      for (const auto& x : arc.eta) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& other : q.arcs)
          for (std::size_t i = 0; i + 1 < other.eta.size(); ++i)
            best = std::min(best, segment_distance(x, other.eta[i], other.eta[i + 1]));
        worst = std::max(worst, best);
      }
    return worst;
  };
  return std::max(one_sided(a, b), one_sided(b, a));
}

void write_arc_csv(std::ostream& out, const ExpanderArc& arc) {
  const Eigen::VectorXd res = soliton_residual_profile(arc);
  out << "s,x,y,residual\n";
  out.precision(17);
  for (int i = 0; i < arc.size(); ++i) {
    const auto& p = arc.eta[static_cast<std::size_t>(i)];
    out << arc.s(i) << ',' << p.x() << ',' << p.y() << ',' << res(i) << '\n';
  }
}

std::string soliton_manifest(const SolitonNetwork& sol) {
  nlohmann::json j;
  j["fan_angles"] = sol.fan.angles();
  j["topology"] = sol.topology.to_string();
  j["radius"] = sol.radius;
  j["seed"] = nlohmann::json::array();
  for (const auto& p : sol.seed) j["seed"].push_back({p.x(), p.y()});
  j["junctions"] = nlohmann::json::array();
  for (const auto& J : sol.junctions) j["junctions"].push_back({J.position.x(), J.position.y()});
  j["arcs"] = nlohmann::json::array();
  for (std::size_t e = 0; e < sol.arcs.size(); ++e) {
    const auto& a = sol.arcs[e];
    nlohmann::json arc;
    arc["index"] = e;
    arc["kind"] = a.kind == SkeletonArc::Kind::External ? "external"
                  : a.kind == SkeletonArc::Kind::Internal ? "internal"
                                                           : "geodesic";
    arc["nodes"] = a.size();
    arc["residual"] = soliton_residual(a);
    if (a.direction) arc["direction"] = {a.direction->x(), a.direction->y()};
    if (a.kind == SkeletonArc::Kind::External) {
      try {
        const AsymptoticFit fit = asymptotic_fit(a);
        arc["fitted_direction"] = {fit.direction.x(), fit.direction.y()};
        if (std::isfinite(fit.slope)) arc["decay_slope"] = fit.slope;
      } catch (const Error&) {
      }
    }
    j["arcs"].push_back(arc);
  }
  return j.dump(2);
}

}  // namespace netflow
