#include "expander_detail.hpp"

#include <Eigen/SparseCholesky>


namespace netflow {

namespace {

// Midpoint g-length exp(|m|^2 / 2) |d| of one segment, with gradient and
// Hessian in (A, B).
double segment(const Vec2& A, const Vec2& B, Eigen::Vector4d* g, Eigen::Matrix4d* H) {
  const Vec2 m = 0.5 * (A + B), d = B - A;
  const double L = d.norm();
  const double w = std::exp(0.5 * m.squaredNorm());
  if (!g) return w * L;
  const Vec2 gm = w * L * m;
  const Vec2 gd = w * d / L;
  g->head<2>() = 0.5 * gm - gd;
  g->tail<2>() = 0.5 * gm + gd;
  if (H) {
    const Mat2 I = Mat2::Identity();
    const Mat2 Hmd = w * m * (d / L).transpose();
    Eigen::Matrix4d Hz, T;
    Hz << w * L * (I + m * m.transpose()), Hmd, Hmd.transpose(), w * (I - d * d.transpose() / (L * L)) / L;
    T << 0.5 * I, 0.5 * I, -I, I;
    *H = T.transpose() * Hz * T;
  }
  return w * L;
}

Points resample(const Points& p, int segments) {
  std::vector<double> acc{0.0};
  for (std::size_t i = 0; i + 1 < p.size(); ++i) acc.push_back(acc.back() + (p[i + 1] - p[i]).norm());
  Points out{p.front()};
  std::size_t k = 0;
  for (int i = 1; i < segments; ++i) {
    const double target = acc.back() * i / segments;
    while (k + 2 < acc.size() && acc[k + 1] < target) ++k;
    const double u = (target - acc[k]) / std::max(acc[k + 1] - acc[k], 1e-300);
    out.push_back(p[k] + u * (p[k + 1] - p[k]));
  }
  out.push_back(p.back());
  return out;
}

// Leaves reachable through `arc` from junction `from` in the skeleton tree.
void leaves_behind(const Skeleton& sk, int arc, int from, std::vector<int>& out) {
  const auto& a = sk.arcs[static_cast<std::size_t>(arc)];
  if (a.kind == SkeletonArc::Kind::External) {
    out.push_back(a.b);
    return;
  }
  const int next = a.a == from ? a.b : a.a;
  for (std::size_t e = 0; e < sk.arcs.size(); ++e) {
    if (static_cast<int>(e) == arc) continue;
    const auto& c = sk.arcs[e];
    if (c.kind == SkeletonArc::Kind::Geodesic) continue;
    if (c.a == next || (c.kind == SkeletonArc::Kind::Internal && c.b == next)) leaves_behind(sk, static_cast<int>(e), next, out);
  }
}

}  // namespace

DiscreteSoliton minimize_g_length(const Fan& fan, const TopologyDescriptor& topo, const MinimizerOptions& opt) {
  if (topo.k != fan.valence()) throw PreconditionError("topology and fan have different valence");
  const Skeleton sk = skeleton(topo);
  const double R = opt.radius;
  auto leaf_point = [&](int leaf) { return Vec2(R * fan.directions[static_cast<std::size_t>(leaf)].normalized()); };

  // Junction seeds: each branch pulls toward the mean direction of its leaves.
  std::vector<std::vector<int>> incident(static_cast<std::size_t>(sk.junctions));
  for (std::size_t e = 0; e < sk.arcs.size(); ++e) {
    const auto& a = sk.arcs[e];
    if (a.kind == SkeletonArc::Kind::Geodesic) continue;
    incident[static_cast<std::size_t>(a.a)].push_back(static_cast<int>(e));
    if (a.kind == SkeletonArc::Kind::Internal) incident[static_cast<std::size_t>(a.b)].push_back(static_cast<int>(e));
  }
  Points seeds;
  for (int j = 0; j < sk.junctions; ++j) {
    Vec2 acc = Vec2::Zero();
    for (int e : incident[static_cast<std::size_t>(j)]) {
      std::vector<int> leaves;
      leaves_behind(sk, e, j, leaves);
      Vec2 mean = Vec2::Zero();
      for (int l : leaves) mean += fan.directions[static_cast<std::size_t>(l)].normalized();
      acc += mean / static_cast<double>(leaves.size());
    }
    seeds.push_back(acc / 3.0);
  }

  // Each arc: start and end are a junction or a pinned leaf point; interior
  // nodes move along the normals of an equally spaced reference polyline,
  // which is rebuilt between Newton rounds.
  enum class Anchor { Junction, Leaf };
  struct Line {
    Anchor start_kind, end_kind;
    int start, end;  // junction id or leaf index
    Points ref, normal;
  };
  const int segs = opt.nodes + 1;
  std::vector<Line> lines;
  Points junction = seeds;
  for (const auto& a : sk.arcs) {
    Line l;
    l.start_kind = a.kind == SkeletonArc::Kind::Geodesic ? Anchor::Leaf : Anchor::Junction;
    l.end_kind = a.kind == SkeletonArc::Kind::Internal ? Anchor::Junction : Anchor::Leaf;
    l.start = a.a;
    l.end = a.b;
    lines.push_back(l);
  }
  auto anchor = [&](Anchor kind, int id) { return kind == Anchor::Leaf ? leaf_point(id) : junction[static_cast<std::size_t>(id)]; };
  for (auto& l : lines) {
    const Vec2 p0 = anchor(l.start_kind, l.start), p1 = anchor(l.end_kind, l.end);
    for (int i = 0; i <= segs; ++i) l.ref.push_back(p0 + (p1 - p0) * (static_cast<double>(i) / segs));
  }

  const int nj = sk.junctions;
  const auto n_lines = static_cast<int>(lines.size());
  const Eigen::Index N = 2 * nj + static_cast<Eigen::Index>(n_lines) * opt.nodes;
  auto var = [&](int line, int node) { return 2 * nj + line * opt.nodes + node - 1; };
  auto build = [&](const Eigen::VectorXd& z, int li) {
    const auto& l = lines[static_cast<std::size_t>(li)];
    Points p = l.ref;
    auto end_point = [&](Anchor kind, int id) {
      return kind == Anchor::Leaf ? leaf_point(id) : Vec2(z.segment<2>(2 * id));
    };
    p.front() = end_point(l.start_kind, l.start);
    p.back() = end_point(l.end_kind, l.end);
    for (int i = 1; i < segs; ++i) p[static_cast<std::size_t>(i)] += z(var(li, i)) * l.normal[static_cast<std::size_t>(i)];
    return p;
  };
  auto objective = [&](const Eigen::VectorXd& z) {
    double e = 0.0;
    for (int li = 0; li < n_lines; ++li) {
      const Points p = build(z, li);
      for (std::size_t i = 0; i + 1 < p.size(); ++i) e += segment(p[i], p[i + 1], nullptr, nullptr);
    }
    return e;
  };

  int it = 0;
  double E = 0.0;
  for (int round = 0; it < opt.max_iterations; ++round) {
    for (auto& l : lines) {
      l.ref = resample(l.ref, segs);
      l.normal.assign(l.ref.size(), Vec2::Zero());
      for (int i = 1; i < segs; ++i)
        l.normal[static_cast<std::size_t>(i)] = rotate_left(Vec2(l.ref[static_cast<std::size_t>(i + 1)] - l.ref[static_cast<std::size_t>(i - 1)])).normalized();
    }
    std::vector<double> spacing;
    for (const auto& l : lines) spacing.push_back((l.ref[1] - l.ref[0]).norm());
    Eigen::VectorXd x = Eigen::VectorXd::Zero(N);
    for (int j = 0; j < nj; ++j) x.segment<2>(2 * j) = junction[static_cast<std::size_t>(j)];
    E = objective(x);
    double mu = 1e-6;
    int inner = 0;
    for (; inner < 4 && it < opt.max_iterations; ++inner, ++it) {
      Eigen::VectorXd g = Eigen::VectorXd::Zero(N);
      std::vector<Eigen::Triplet<double>> trip;
      for (int li = 0; li < n_lines; ++li) {
        const auto& l = lines[static_cast<std::size_t>(li)];
        const Points p = build(x, li);
        // Jacobian of a node position in the unknowns: rows of d p / d x.
        auto slots = [&](int node, std::vector<std::pair<Eigen::Index, Vec2>>& out) {
          out.clear();
          if (node == 0 || node == segs) {
            const Anchor kind = node == 0 ? l.start_kind : l.end_kind;
            const int id = node == 0 ? l.start : l.end;
            if (kind == Anchor::Junction) {
              out.emplace_back(2 * id, Vec2(1.0, 0.0));
              out.emplace_back(2 * id + 1, Vec2(0.0, 1.0));
            }
          } else {
            out.emplace_back(var(li, node), l.normal[static_cast<std::size_t>(node)]);
          }
        };
        std::vector<std::pair<Eigen::Index, Vec2>> sa, sb;
        for (int i = 0; i < segs; ++i) {
          Eigen::Vector4d gs;
          Eigen::Matrix4d Hs;
          segment(p[static_cast<std::size_t>(i)], p[static_cast<std::size_t>(i + 1)], &gs, &Hs);
          slots(i, sa);
          slots(i + 1, sb);
          const std::vector<std::pair<Eigen::Index, Vec2>>* side[2] = {&sa, &sb};
          for (int P = 0; P < 2; ++P)
            for (const auto& [r, dr] : *side[P]) {
              g(r) += dr.dot(gs.segment<2>(2 * P));
              for (int Q = 0; Q < 2; ++Q)
                for (const auto& [c, dc] : *side[Q]) trip.emplace_back(r, c, dr.dot(Hs.block<2, 2>(2 * P, 2 * Q) * dc));
            }
        }
      }
      if (g.lpNorm<Eigen::Infinity>() <= opt.tolerance * std::max(1.0, E)) break;
      Eigen::SparseMatrix<double> H(N, N);
      H.setFromTriplets(trip.begin(), trip.end());
      const double scale = std::max(1.0, H.diagonal().cwiseAbs().maxCoeff());
      bool moved = false;
      for (int tries = 0; tries < 60 && !moved; ++tries) {
        Eigen::SparseMatrix<double> A = H;
        for (Eigen::Index k = 0; k < N; ++k) A.coeffRef(k, k) += mu * scale;
        Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt(A);
        if (llt.info() != Eigen::Success) {
          mu *= 4.0;
          continue;
        }
        const Eigen::VectorXd trial = x + llt.solve(-g);
        // Normal offsets stay below half a reference spacing so the polyline
        // cannot fold.
        bool folded = false;
        for (int li = 0; li < n_lines && !folded; ++li)
          folded = trial.segment(var(li, 1), opt.nodes).lpNorm<Eigen::Infinity>() > 0.5 * spacing[static_cast<std::size_t>(li)];
        const double Et = folded ? std::numeric_limits<double>::infinity() : objective(trial);
        if (std::isfinite(Et) && Et <= E) {
          moved = true;
          x = trial;
          E = Et;
          mu = std::max(mu / 5.0, 1e-15);
        } else {
          mu *= 4.0;
        }
      }
      if (!moved) break;
    }
    for (int j = 0; j < nj; ++j) junction[static_cast<std::size_t>(j)] = x.segment<2>(2 * j);
    for (int li = 0; li < n_lines; ++li) lines[static_cast<std::size_t>(li)].ref = build(x, li);
    if (inner == 0) break;
  }

  DiscreteSoliton out;
  out.iterations = it;
  out.g_length = E;
  out.junctions = junction;
  for (std::size_t e = 0; e < lines.size(); ++e) {
    const Points& pts = lines[e].ref;
    double len = 0.0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) len += (pts[i + 1] - pts[i]).norm();
    if (sk.arcs[e].kind == SkeletonArc::Kind::Internal && len < 1e-6)
      throw TopologyDegenerate("internal edge collapsed during minimization", static_cast<int>(e));
    out.arcs.push_back(pts);
  }
  return out;
}

}  // namespace netflow
