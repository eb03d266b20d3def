#include "qprop/metric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

#include "qprop/errors.hpp"

namespace qprop {

namespace {

double real_gap(const TraceWeights& phi, const TraceWeights& psi, const BlockElement& x) {
  return eval_trace(phi, x).real() - eval_trace(psi, x).real();
}

void require_state_shapes(const LipEvaluator& eval, const TraceWeights& phi,
                          const TraceWeights& psi) {
  const AlgebraShape& top = eval.spec().tower.levels[eval.level()];
  if (phi.shape != top || psi.shape != top)
    throw domain_error("states must live on the top level of the spec");
}

bool all_scalar_blocks(const AlgebraShape& s) {
  for (const Int& d : s.dims)
    if (d != 1) return false;
  return true;
}

}  // namespace

KantorovichExact kantorovich_commutative_exact(const LipEvaluator& eval, const TraceWeights& phi,
                                               const TraceWeights& psi) {
  const LipSpec& spec = eval.spec();
  const std::size_t n_level = eval.level();
  require_state_shapes(eval, phi, psi);
  for (std::size_t lv = 0; lv <= n_level; ++lv)
    if (!all_scalar_blocks(spec.tower.levels[lv]))
      throw domain_error("exact Kantorovich solver needs all-scalar levels");
  if (spec.tower.levels[0].blocks() != 1)
    throw domain_error("exact Kantorovich solver needs scalars at level 0 "
                       "(otherwise the distance can be infinite)");

  const std::size_t d = spec.tower.levels[n_level].blocks();
  KantorovichExact out;
  out.potential.assign(d, 0.0);
  if (d == 1) return out;

  // Lip-ball constraints over the potential a, one family per level m.
  std::vector<std::vector<double>> rows;
  std::vector<double> rhs;
  auto push_abs_row = [&](const std::vector<double>& g, double r) {
    bool nonzero = false;
    for (double v : g)
      if (v != 0.0) nonzero = true;
    if (!nonzero) return;
    rows.push_back(g);
    rhs.push_back(r);
    std::vector<double> neg(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) neg[i] = -g[i];
    rows.push_back(std::move(neg));
    rhs.push_back(r);
  };

  for (std::size_t m = 0; m < n_level; ++m) {
    MultiplicityEmbedding comp = compose_steps(spec.tower, m, n_level);
    std::vector<std::vector<std::size_t>> fibers(comp.in_shape.blocks());
    for (std::size_t j = 0; j < d; ++j) {
      std::size_t cls = comp.in_shape.blocks();
      for (std::size_t i = 0; i < comp.in_shape.blocks(); ++i) {
        if (comp.at(j, i) == 0) continue;
        if (cls != comp.in_shape.blocks() || comp.at(j, i) != 1)
          throw domain_error("composite embedding is not a partition");
        cls = i;
      }
      if (cls == comp.in_shape.blocks())
        throw domain_error("composite embedding has an empty row");
      fibers[cls].push_back(j);
    }
    const double beta_m = eval.beta(m);
    if (spec.kind == LipKind::cond_exp) {
      const std::vector<double>& lam = spec.trace->lambda;
      for (const auto& fiber : fibers) {
        if (fiber.size() < 2) continue;
        double w_total = 0;
        for (std::size_t j : fiber) w_total += lam[j];
        for (std::size_t j : fiber) {
          std::vector<double> g(d, 0.0);
          g[j] += 1.0;
          for (std::size_t jp : fiber) g[jp] -= lam[jp] / w_total;
          push_abs_row(g, beta_m);
        }
      }
    } else {
      for (const auto& fiber : fibers) {
        for (std::size_t a = 0; a < fiber.size(); ++a) {
          for (std::size_t b = a + 1; b < fiber.size(); ++b) {
            std::vector<double> g(d, 0.0);
            g[fiber[a]] = 1.0;
            g[fiber[b]] = -1.0;
            push_abs_row(g, 2.0 * beta_m);
          }
        }
      }
    }
  }

  // Gauge-fix a_0 = 0 (the ball is invariant under scalar shifts) and shift
  // the rest to u_j = a_j + M >= 0.  The level-0 rows force |a_j| <= 2beta(0)
  // once a_0 = 0, so a padded M keeps the positivity cut slack.
  const double m_shift = 2.0 * to_double(eval.beta_exact(0)) * (1.0 + 1e-9) + 1e-9;
  std::vector<std::vector<double>> a_u(rows.size(), std::vector<double>(d - 1, 0.0));
  std::vector<double> b_u(rows.size(), 0.0);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    double coef_sum = 0;
    for (std::size_t j = 1; j < d; ++j) {
      a_u[r][j - 1] = rows[r][j];
      coef_sum += rows[r][j];
    }
    b_u[r] = rhs[r] + m_shift * coef_sum;
  }
  std::vector<double> c_u(d - 1, 0.0);
  for (std::size_t j = 1; j < d; ++j) c_u[j - 1] = phi.lambda[j] - psi.lambda[j];

  LpResult lp = solve_lp(c_u, a_u, b_u);
  if (lp.status != LpResult::Status::optimal)
    throw precision_error("Kantorovich linear program did not reach an optimum");

  for (std::size_t j = 1; j < d; ++j) out.potential[j] = lp.x[j - 1] - m_shift;
  double val = 0;
  for (std::size_t j = 0; j < d; ++j)
    val += (phi.lambda[j] - psi.lambda[j]) * out.potential[j];
  out.value = std::fabs(val);
  return out;
}

KantorovichEstimate kantorovich_lower_bound(const LipEvaluator& eval, const TraceWeights& phi,
                                            const TraceWeights& psi, std::size_t samples,
                                            std::uint64_t seed) {
  require_state_shapes(eval, phi, psi);
  const AlgebraShape& top = eval.spec().tower.levels[eval.level()];
  const std::vector<std::size_t> dd = top.dense_dims();
  const bool slow = eval.spec().kind == LipKind::quotient;
  const bool commutative = all_scalar_blocks(top);

  const std::size_t grid_n = slow ? 7 : 10;
  const std::size_t golden_n = slow ? 5 : 8;
  const std::size_t max_rounds = slow ? 8 : (commutative ? 40 : 20);
  const std::size_t starts_n = slow ? 2 : 4;
  constexpr double kImproveTol = 1e-13;

  auto lip_up = [&](const BlockElement& x) { return eval.value(x).upper; };
  auto hval = [&](const BlockElement& x) { return real_gap(phi, psi, x); };
  auto project = [&](BlockElement x) {
    double l = lip_up(x);
    if (l > 1.0) x *= cx(1.0 / (l * (1.0 + 1e-12)), 0);
    return x;
  };

  CounterRng rng(seed, 11);
  std::vector<BlockElement> ball = eval.sample_ball(samples, rng);

  KantorovichEstimate out;
  out.samples = ball.size();
  out.seed = seed;
  out.witness = BlockElement::zero(top);
  std::vector<std::pair<double, std::size_t>> ranked;
  for (std::size_t i = 0; i < ball.size(); ++i) {
    double sc = std::fabs(hval(ball[i]));
    ranked.emplace_back(sc, i);
    if (sc > out.value) {
      out.value = sc;
      out.witness = ball[i];
    }
  }
  std::sort(ranked.begin(), ranked.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });

  // Direction bank: trace-gap gradient, its sign pattern, diagonal units
  // (or block identities when the top is large), commutative pair
  // differences, and extrapolations through the best samples.
  struct Dir {
    BlockElement d;
    double h_d = 0;
    double lip = 0;
  };
  std::vector<Dir> dirs;
  auto push_dir = [&](BlockElement d) {
    Dir dir;
    dir.h_d = hval(d);
    dir.lip = lip_up(d);
    if (std::fabs(dir.h_d) < 1e-15) return;  // no first-order gain
    dir.d = std::move(d);
    dirs.push_back(std::move(dir));
  };

  BlockElement grad = BlockElement::zero(top);
  BlockElement sign_split = BlockElement::zero(top);
  for (std::size_t j = 0; j < top.blocks(); ++j) {
    double w = (phi.lambda[j] - psi.lambda[j]) / static_cast<double>(dd[j]);
    double s = w > 0 ? 1.0 : (w < 0 ? -1.0 : 0.0);
    for (std::size_t i = 0; i < dd[j]; ++i) {
      grad.blocks[j](i, i) = w;
      sign_split.blocks[j](i, i) = s;
    }
  }
  push_dir(grad);
  push_dir(sign_split);

  std::size_t total_dim = 0;
  for (std::size_t n : dd) total_dim += n;
  const std::size_t unit_cap = slow ? 6 : 24;
  if (total_dim <= unit_cap) {
    for (std::size_t k = 0; k < top.blocks(); ++k)
      for (std::size_t i = 0; i < dd[k]; ++i) push_dir(matrix_unit(top, k, i, i));
  } else {
    for (std::size_t k = 0; k < std::min<std::size_t>(top.blocks(), 16); ++k) {
      BlockElement e = BlockElement::zero(top);
      for (std::size_t i = 0; i < dd[k]; ++i) e.blocks[k](i, i) = 1.0;
      push_dir(std::move(e));
    }
  }
  if (commutative && !slow && top.blocks() <= 12) {
    for (std::size_t a = 0; a < top.blocks(); ++a)
      for (std::size_t b = a + 1; b < top.blocks(); ++b)
        push_dir(matrix_unit(top, a, 0, 0) - matrix_unit(top, b, 0, 0));
  }
  for (std::size_t r = 1; r < std::min<std::size_t>(ranked.size(), 3); ++r)
    push_dir(ball[ranked[0].second] - ball[ranked[r].second]);

  // Value of the radially re-projected point a + t d, using linearity of the
  // trace gap: h((a + t d)/max(1, L)) = (h(a) + t h(d)) / max(1, L).
  auto value_at = [&](const BlockElement& a, double h_a, const Dir& dir, double t) {
    BlockElement cand = a + cx(t, 0) * dir.d;
    double denom = std::max(1.0, lip_up(cand));
    return std::fabs(h_a + t * dir.h_d) / denom;
  };

  // Boundary ride: from a feasible point, push each direction to (just
  // inside) the feasibility boundary by bracketing and bisection.  The trace
  // gap is linear along a ray, so the farthest feasible point is always the
  // best one on that ray; unlike the radial re-projection above, the move
  // never shrinks the other coordinates.  Skipped for the quotient kind,
  // where every feasibility test costs a solver run.
  auto ride = [&](BlockElement a, double& h_a) {
    double score = std::fabs(h_a);
    const std::size_t passes = commutative ? 6 : 2;
    for (std::size_t pass = 0; pass < passes; ++pass) {
      bool moved = false;
      for (const Dir& dir : dirs) {
        const double s = (h_a >= 0) == (dir.h_d >= 0) ? 1.0 : -1.0;
        double t_lo = 0;
        double t_hi = std::min(0.5 / std::max(dir.lip, 1e-12), 1e7);
        std::size_t grow = 0;
        while (grow < 60 && lip_up(a + cx(s * t_hi, 0) * dir.d) <= 1.0) {
          t_lo = t_hi;
          t_hi *= 2;
          ++grow;
        }
        if (grow >= 60) continue;  // effectively unconstrained direction
        for (int it = 0; it < 50; ++it) {
          const double mid = 0.5 * (t_lo + t_hi);
          if (lip_up(a + cx(s * mid, 0) * dir.d) <= 1.0)
            t_lo = mid;
          else
            t_hi = mid;
        }
        if (t_lo <= 0) continue;
        const double h_new = h_a + s * t_lo * dir.h_d;
        if (std::fabs(h_new) > score + kImproveTol) {
          a += cx(s * t_lo, 0) * dir.d;
          h_a = h_new;
          score = std::fabs(h_new);
          moved = true;
        }
      }
      if (!moved) break;
    }
    return a;
  };

  // Fresh self-adjoint direction for the hit-and-run phase below.
  auto random_dir = [&]() {
    BlockElement d = BlockElement::zero(top);
    for (std::size_t k = 0; k < top.blocks(); ++k) {
      for (std::size_t i = 0; i < dd[k]; ++i) {
        d.blocks[k](i, i) = rng.gaussian();
        for (std::size_t j2 = i + 1; j2 < dd[k]; ++j2) {
          const cx z(0.5 * rng.gaussian(), 0.5 * rng.gaussian());
          d.blocks[k](i, j2) = z;
          d.blocks[k](j2, i) = std::conj(z);
        }
      }
    }
    return d;
  };

  std::vector<BlockElement> starts;
  if (!ranked.empty()) starts.push_back(ball[ranked[0].second]);
  starts.push_back(project(sign_split));
  starts.push_back(project(grad));
  if (ranked.size() > 1) starts.push_back(ball[ranked[1].second]);
  if (starts.size() > starts_n) starts.resize(starts_n);

  struct Finisher {
    double score = 0;
    BlockElement a;
    double h_a = 0;
  };
  std::vector<Finisher> finals;

  for (BlockElement a : starts) {
    double h_a = hval(a);
    double score = std::fabs(h_a);
    for (std::size_t round = 0; round < max_rounds; ++round) {
      double best_v = score;
      double best_t = 0;
      const Dir* best_dir = nullptr;
      for (const Dir& dir : dirs) {
        double s = (h_a >= 0) == (dir.h_d >= 0) ? 1.0 : -1.0;
        double t0 = std::min(0.25 / std::max(dir.lip, 1e-12), 1e6);
        double loc_t = 0, loc_v = score;
        for (std::size_t i = 0; i < grid_n; ++i) {
          double t = s * t0 * static_cast<double>(1u << i);
          double v = value_at(a, h_a, dir, t);
          if (v > loc_v) {
            loc_v = v;
            loc_t = t;
          }
        }
        if (loc_t != 0) {
          double lo = loc_t / 2, hi = loc_t * 2;
          if (lo > hi) std::swap(lo, hi);
          constexpr double kGold = 0.6180339887498949;
          double x1 = hi - kGold * (hi - lo), x2 = lo + kGold * (hi - lo);
          double f1 = value_at(a, h_a, dir, x1), f2 = value_at(a, h_a, dir, x2);
          for (std::size_t it = 0; it < golden_n; ++it) {
            if (f1 < f2) {
              lo = x1;
              x1 = x2;
              f1 = f2;
              x2 = lo + kGold * (hi - lo);
              f2 = value_at(a, h_a, dir, x2);
            } else {
              hi = x2;
              x2 = x1;
              f2 = f1;
              x1 = hi - kGold * (hi - lo);
              f1 = value_at(a, h_a, dir, x1);
            }
          }
          double xm = f1 > f2 ? x1 : x2, fm = std::max(f1, f2);
          if (fm > loc_v) {
            loc_v = fm;
            loc_t = xm;
          }
        }
        if (loc_v > best_v) {
          best_v = loc_v;
          best_t = loc_t;
          best_dir = &dir;
        }
      }
      if (!best_dir || best_v <= score + kImproveTol) break;
      a = project(a + cx(best_t, 0) * best_dir->d);
      h_a = hval(a);
      score = std::fabs(h_a);
    }
    if (!slow) {
      a = project(std::move(a));
      h_a = hval(a);
      a = ride(std::move(a), h_a);
      score = std::fabs(h_a);
    }
    finals.push_back({score, std::move(a), h_a});
  }
  std::sort(finals.begin(), finals.end(),
            [](const Finisher& a, const Finisher& b) { return a.score > b.score; });

  // Active-set polish (all-scalar towers, expectation kind): the unit ball
  // is then the polytope {a : |a_j - (E_m a)_j| <= beta_m}, every constraint
  // row linear.  From the best finisher, repeatedly identify the near-active
  // rows, ask a small feasibility LP for a direction that improves the gap
  // without leaving any active row, take the exact maximal step, and stop
  // when no such direction exists - first-order optimality is global here,
  // so the polish lands on the true supremum (up to roundoff).  Rows come
  // from probing the conditional expectations with coordinate units, not
  // from any closed-form transcription of the ball.
  const bool active_set_ok = commutative && eval.spec().kind == LipKind::cond_exp;
  if (!slow && active_set_ok && !finals.empty()) {
    const std::size_t nb = top.blocks();
    struct Row {
      std::vector<double> g;
      double beta = 0;
    };
    std::vector<Row> rows;
    for (std::size_t m = 0; m < eval.level(); ++m) {
      // col[j2][j] = coefficient of a_{j2} in (E_m a)_j
      std::vector<std::vector<double>> col(nb);
      for (std::size_t j2 = 0; j2 < nb; ++j2) {
        const BlockElement img = eval.expectation(m).apply(matrix_unit(top, j2, 0, 0));
        col[j2].resize(nb);
        for (std::size_t j = 0; j < nb; ++j) col[j2][j] = img.blocks[j](0, 0).real();
      }
      for (std::size_t j = 0; j < nb; ++j) {
        Row r;
        r.g.assign(nb, 0.0);
        r.g[j] = 1.0;
        for (std::size_t j2 = 0; j2 < nb; ++j2) r.g[j2] -= col[j2][j];
        r.beta = eval.beta(m);
        double mass = 0;
        for (double v : r.g) mass += std::fabs(v);
        if (mass > 1e-13) rows.push_back(std::move(r));
      }
    }

    Finisher& f = finals[0];
    std::vector<double> av(nb);
    for (std::size_t j = 0; j < nb; ++j) av[j] = f.a.blocks[j](0, 0).real();
    std::vector<double> c(nb);
    const double sgn = f.h_a >= 0 ? 1.0 : -1.0;
    for (std::size_t j = 0; j < nb; ++j) c[j] = sgn * hval(matrix_unit(top, j, 0, 0));
    auto dot = [](const std::vector<double>& x, const std::vector<double>& y) {
      double s = 0;
      for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
      return s;
    };

    for (std::size_t round = 0; round < 200; ++round) {
      // Direction LP over u in [0,2]^nb, d = u - 1: maximize c.d subject to
      // s_r (r.d) <= 0 for every near-active row (sign s_r toward the bound).
      std::vector<std::vector<double>> A;
      std::vector<double> b;
      for (const Row& r : rows) {
        const double ra = dot(r.g, av);
        if (std::fabs(ra) < r.beta * (1.0 - 1e-7)) continue;
        const double sr = ra >= 0 ? 1.0 : -1.0;
        std::vector<double> arow(nb);
        double row_sum = 0;
        for (std::size_t j = 0; j < nb; ++j) {
          arow[j] = sr * r.g[j];
          row_sum += arow[j];
        }
        A.push_back(std::move(arow));
        b.push_back(std::max(row_sum, 0.0));  // keeps d = 0 feasible
      }
      for (std::size_t j = 0; j < nb; ++j) {  // box u_j <= 2
        std::vector<double> arow(nb, 0.0);
        arow[j] = 1.0;
        A.push_back(std::move(arow));
        b.push_back(2.0);
      }
      const LpResult dir = solve_lp(c, A, b);
      if (dir.status != LpResult::Status::optimal) break;
      std::vector<double> d(nb);
      double gain = 0;
      for (std::size_t j = 0; j < nb; ++j) {
        d[j] = dir.x[j] - 1.0;
        gain += c[j] * d[j];
      }
      if (gain <= 1e-11) break;  // no improving feasible direction: optimal

      // Exact maximal step keeping every row inside [-beta, beta].
      // The LP vertex satisfies its rows only to simplex roundoff, so treat
      // sub-1e-12 row velocities as zero and clamp slacks at the bound: the
      // current point is certified inside the ball by the acceptance test.
      double t_max = std::numeric_limits<double>::infinity();
      for (const Row& r : rows) {
        const double ra = dot(r.g, av);
        const double rd = dot(r.g, d);
        if (rd > 1e-12) t_max = std::min(t_max, std::max(r.beta - ra, 0.0) / rd);
        if (rd < -1e-12) t_max = std::min(t_max, std::min(-r.beta - ra, 0.0) / rd);
      }
      if (!std::isfinite(t_max) || t_max <= 0) break;

      // Accept the step.  Rows already pinned at their bound can drift out by
      // ~t x (sub-threshold row velocity), so a candidate a hair outside is
      // radially projected back rather than rejected: the value cost is of
      // the same roundoff order.
      bool accepted = false;
      for (int back = 0; back < 8 && !accepted; ++back) {
        const double t = t_max * (1.0 - 1e-12 * static_cast<double>(1u << back));
        if (t <= 0) break;
        BlockElement cand = BlockElement::zero(top);
        for (std::size_t j = 0; j < nb; ++j) cand.blocks[j](0, 0) = av[j] + t * d[j];
        const double l = lip_up(cand);
        if (l > 1.0 + 1e-9) continue;
        if (l > 1.0) cand *= cx(1.0 / (l * (1.0 + 1e-12)), 0);
        for (std::size_t j = 0; j < nb; ++j) av[j] = cand.blocks[j](0, 0).real();
        f.a = std::move(cand);
        f.h_a = hval(f.a);
        f.score = std::fabs(f.h_a);
        accepted = true;
      }
      if (!accepted) break;
    }
  }

  // Hit-and-run polish: from the best finishers, repeatedly ride to the
  // feasibility boundary along fresh random directions.  Sign alignment
  // makes every accepted ride weakly improving, and rides along directions
  // that barely change the gap still drift laterally across the current
  // face, escaping the stall points of the fixed direction bank.  A final
  // bank ride then snaps the walk onto its vertex.
  if (!slow && !active_set_ok && !finals.empty()) {
    const std::size_t walk_starts = std::min<std::size_t>(finals.size(), commutative ? 3 : 1);
    const std::size_t ride_budget = commutative ? 640 : 48;
    const std::size_t stall_cap = commutative ? 640 : 24;
    for (std::size_t w = 0; w < walk_starts; ++w) {
      BlockElement a = finals[w].a;
      double h_a = finals[w].h_a;
      double score = finals[w].score;
      std::size_t stalls = 0;
      for (std::size_t k = 0; k < ride_budget && stalls < stall_cap; ++k) {
        const BlockElement d = random_dir();
        const double h_d = hval(d);
        const double dlip = lip_up(d);
        if (dlip < 1e-12) continue;  // direction is (numerically) Lip-null
        const double s = (h_a >= 0) == (h_d >= 0) ? 1.0 : -1.0;
        double t_lo = 0;
        double t_hi = 2.2 / dlip;
        if (lip_up(a + cx(s * t_hi, 0) * d) <= 1.0) {
          t_lo = t_hi;  // whole bracket feasible: take the long ride
        } else {
          for (int it = 0; it < 30; ++it) {
            const double mid = 0.5 * (t_lo + t_hi);
            if (lip_up(a + cx(s * mid, 0) * d) <= 1.0)
              t_lo = mid;
            else
              t_hi = mid;
          }
        }
        if (t_lo <= 0) {
          ++stalls;
          continue;
        }
        // Alternate boundary rides with uniform steps inside the feasible
        // segment: endpoint rides maximise the gap along the ray, interior
        // steps keep the walk mixing where the feasible cone is wider.
        const double t_use = (k & 1u) ? t_lo : t_lo * rng.uniform();
        if (t_use <= 0) {
          ++stalls;
          continue;
        }
        a += cx(s * t_use, 0) * d;
        h_a += s * t_use * h_d;
        if ((k & 31u) == 31u) h_a = hval(a);  // resync accumulated drift
        if (std::fabs(h_a) > score + kImproveTol) {
          score = std::fabs(h_a);
          stalls = 0;
        } else {
          ++stalls;
        }
      }
      a = project(std::move(a));
      h_a = hval(a);
      a = ride(std::move(a), h_a);
      finals[w] = {std::fabs(h_a), std::move(a), h_a};
    }
  }

  for (Finisher& f : finals) {
    if (f.score > out.value) {
      out.value = f.score;
      out.witness = std::move(f.a);
    }
  }

  out.witness = project(std::move(out.witness));
  out.value = std::fabs(hval(out.witness));
  return out;
}

Rat diameter_upper_bound(const LipSpec& spec) {
  if (spec.beta.empty()) throw domain_error("spec has no weight sequence");
  return Rat(2) * spec.beta[0];
}

double bridge_seminorm(const MultiplicityEmbedding& pi_a, const MultiplicityEmbedding& pi_b,
                       const BlockElement& a, const BlockElement& b) {
  if (pi_a.out_shape != pi_b.out_shape)
    throw domain_error("bridge legs must land in the same ambient algebra");
  if (a.shape != pi_a.in_shape || b.shape != pi_b.in_shape)
    throw shape_error("bridge elements do not match the embedding domains");
  return op_norm(apply_embedding(pi_a, a) - apply_embedding(pi_b, b));
}

BetaBoundCertificate beta_bound_certificate(const LipEvaluator& eval, std::size_t m,
                                            std::size_t samples, std::uint64_t seed) {
  if (eval.spec().kind != LipKind::cond_exp)
    throw domain_error("truncation certificate needs the conditional-expectation kind");
  if (m >= eval.level()) throw domain_error("truncation level must be below the top");

  BetaBoundCertificate cert;
  cert.level_m = m;
  cert.claimed = eval.beta_exact(m);
  cert.seed = seed;
  const double beta_m = eval.beta(m);
  const ConditionalExpectation& exp_m = eval.expectation(m);

  CounterRng rng(seed, 12);
  std::vector<BlockElement> ball = eval.sample_ball(samples, rng);
  cert.samples = ball.size();
  double worst_ball = -std::numeric_limits<double>::infinity();
  double worst_norm = -std::numeric_limits<double>::infinity();
  for (const BlockElement& a : ball) {
    BlockElement e = exp_m.apply(a);
    worst_ball = std::max(worst_ball, eval.value(e).upper - 1.0);
    worst_norm = std::max(worst_norm, op_norm(a - e) - beta_m);
  }
  cert.worst_ball_residual = worst_ball;
  cert.worst_norm_residual = worst_norm;
  cert.verified = worst_ball <= cert.tolerance && worst_norm <= cert.tolerance;
  return cert;
}

RescaleBound rescaling_bridge_bound(const LipEvaluator& member, const LipEvaluator& limit,
                                    std::size_t sphere_samples, std::size_t partner_samples,
                                    std::uint64_t seed) {
  const AlgebraShape& top = member.spec().tower.levels[member.level()];
  if (top != limit.spec().tower.levels[limit.level()])
    throw domain_error("rescaling bound needs a shared top level");

  RescaleBound cert;
  cert.seed = seed;
  cert.partner_samples = partner_samples;
  const bool quotient_involved = member.spec().kind == LipKind::quotient ||
                                 limit.spec().kind == LipKind::quotient;
  auto tol_for = [&](double scale) {
    return 1e-9 + (quotient_involved ? 4e-6 * std::max(1.0, scale) : 0.0);
  };

  CounterRng rng(seed, 13);
  const BlockElement one = BlockElement::identity(top);
  const double one_norm2 = hs_inner(one, one).real();

  struct Sample {
    BlockElement b;
    LipValue lm, ll;
  };
  std::vector<Sample> sphere;
  const std::size_t attempts_cap = 4 * sphere_samples + 8;
  for (std::size_t att = 0; att < attempts_cap && sphere.size() < sphere_samples; ++att) {
    BlockElement a = member.random_sa(rng);
    BlockElement w = a - cx(hs_inner(one, a).real() / one_norm2, 0) * one;
    double n = op_norm(w);
    if (n < 1e-9) continue;
    Sample s;
    s.b = cx(1.0 / n, 0) * w;
    s.lm = member.value(s.b);
    s.ll = limit.value(s.b);
    sphere.push_back(std::move(s));
  }
  if (sphere.empty()) throw domain_error("no trace-free directions at the top level");
  cert.sphere_samples = sphere.size();

  double m_s = std::numeric_limits<double>::infinity();
  for (const Sample& s : sphere) m_s = std::min(m_s, std::min(s.lm.lower, s.ll.lower));
  cert.m_s = m_s;
  if (!(m_s > 1e-12)) {
    cert.eps = std::numeric_limits<double>::infinity();
    cert.verified = false;
    return cert;
  }
  double eps = 0;
  for (const Sample& s : sphere) {
    double dev = std::max({s.lm.upper - s.ll.lower, s.ll.upper - s.lm.lower, 0.0});
    eps = std::max(eps, dev / m_s);
  }
  cert.eps = eps;

  double worst_dist = std::numeric_limits<double>::infinity();
  double worst_lip = std::numeric_limits<double>::infinity();
  double tol_used = 0;
  bool ok = true;
  // One recheck verifies one direction of the rescaling exchange: scale b so
  // the partner matches the source Lip-value, then test the two certified
  // inequalities with honest (lower-bound) right-hand sides.
  auto recheck = [&](const BlockElement& a, const LipEvaluator& src, const LipEvaluator& dst,
                     double ratio, double r, double sh, const BlockElement& b) {
    BlockElement partner = cx(ratio * r, 0) * b + cx(sh, 0) * one;
    LipValue la = src.value(a);
    double lhs_d = op_norm(a - partner);
    double rhs_d = eps * la.lower;
    double margin_d = rhs_d - lhs_d;
    double lhs_l = dst.value(partner).upper;
    double rhs_l = la.lower;
    double margin_l = rhs_l - lhs_l;
    worst_dist = std::min(worst_dist, margin_d);
    worst_lip = std::min(worst_lip, margin_l);
    double td = tol_for(std::max(std::fabs(lhs_d), std::fabs(rhs_d)));
    double tl = tol_for(std::max(std::fabs(lhs_l), std::fabs(rhs_l)));
    tol_used = std::max({tol_used, td, tl});
    ok = ok && margin_d >= -td && margin_l >= -tl;
  };
  for (std::size_t t = 0; t < partner_samples; ++t) {
    const Sample& s = sphere[t % sphere.size()];
    double r = rng.uniform(0.25, 2.0);
    double sh = rng.uniform(-1.0, 1.0);
    BlockElement a = cx(r, 0) * s.b + cx(sh, 0) * one;
    // Source in the limit ball, partner certified for the member norm.
    recheck(a, limit, member, s.ll.upper / s.lm.upper, r, sh, s.b);
    // Source in the member ball, partner certified for the limit norm.
    recheck(a, member, limit, s.lm.upper / s.ll.upper, r, sh, s.b);
  }
  if (partner_samples == 0) {
    worst_dist = 0;
    worst_lip = 0;
  }
  cert.worst_distance_margin = worst_dist;
  cert.worst_lip_margin = worst_lip;
  cert.tolerance = tol_used;
  cert.verified = ok;
  return cert;
}

LipSpec truncate_spec(const LipSpec& spec, std::size_t level) {
  if (level < 1 || level > spec.level)
    throw domain_error("truncation level out of range");
  if (level == spec.level) return spec;
  std::vector<AlgebraShape> levels(spec.tower.levels.begin(),
                                   spec.tower.levels.begin() + level + 1);
  std::vector<MultiplicityEmbedding> steps(spec.tower.steps.begin(),
                                           spec.tower.steps.begin() + level);
  Tower sub = make_tower(std::move(levels), std::move(steps), spec.tower.label);
  std::vector<Rat> beta(spec.beta.begin(),
                        spec.beta.begin() + std::min(spec.beta.size(), level + 1));
  std::optional<TraceWeights> trace;
  if (spec.trace)
    trace = pullback_trace(compose_steps(spec.tower, level, spec.level), *spec.trace);
  return make_lip_spec(std::move(sub), level, spec.kind, std::move(trace), std::move(beta));
}

ChainBound propinquity_chain_bound(const FusingFamily& family, std::size_t level, std::size_t k,
                                   std::size_t sphere_samples, std::uint64_t seed) {
  if (family.members.empty()) throw domain_error("empty fusing family");
  if (k >= family.members.size()) throw domain_error("member index out of range");
  if (family.dominator.size() <= level)
    throw domain_error("dominating sequence too short for the requested level");
  if (family.limit.level < level || family.members[k].level < level)
    throw domain_error("specs too shallow for the requested level");
  if (family.members[k].kind != family.limit.kind)
    throw domain_error("member and limit use different Lip-norm kinds");

  std::vector<Tower> towers;
  towers.reserve(family.members.size());
  for (const LipSpec& s : family.members) towers.push_back(s.tower);
  std::vector<std::size_t> fusing = fusing_sequence(towers, family.limit.tower, level);
  const std::size_t c_n = fusing[level];
  if (k < c_n) {
    std::ostringstream msg;
    msg << "member " << k << " precedes the fusing threshold c(" << level << ") = " << c_n;
    throw hypothesis_error(msg.str());
  }

  auto check_dominated = [&](const LipSpec& s, const char* who) {
    std::size_t upto = std::min(level, s.beta.empty() ? 0 : s.beta.size() - 1);
    for (std::size_t n = 0; n <= upto; ++n) {
      if (s.beta[n] <= family.dominator[n]) continue;
      std::ostringstream msg;
      msg << who << " weight at level " << n << " exceeds the dominating sequence";
      throw hypothesis_error(msg.str());
    }
  };
  for (const LipSpec& s : family.members) check_dominated(s, "member");
  check_dominated(family.limit, "limit");

  ChainBound out;
  out.level = level;
  out.member = k;
  out.c_n = c_n;
  out.two_b = Rat(2) * family.dominator[level];

  auto bridge_at = [&](std::size_t n) {
    LipSpec mem = truncate_spec(family.members[k], n);
    LipSpec lim = truncate_spec(family.limit, n);
    LipEvaluator mem_eval(std::move(mem));
    LipEvaluator lim_eval(std::move(lim));
    RescaleBound b = rescaling_bridge_bound(mem_eval, lim_eval, sphere_samples, sphere_samples,
                                            seed + 1000003ULL * n);
    double dist = 0;
    if (mem_eval.spec().trace && lim_eval.spec().trace)
      dist = weight_distance(*mem_eval.spec().trace, *lim_eval.spec().trace);
    return std::make_pair(b, dist);
  };

  for (std::size_t n = 1; n < level; ++n) {
    auto [b, dist] = bridge_at(n);
    (void)dist;
    ChainLevelTerm term;
    term.level = n;
    term.two_b = Rat(2) * family.dominator[n];
    term.bridge = b.eps;
    term.total = to_double(term.two_b) + b.eps;
    out.per_level.push_back(std::move(term));
  }
  auto [bridge, dist] = bridge_at(level);
  out.bridge = bridge.eps;
  out.total = to_double(out.two_b) + bridge.eps;
  out.trace_distance = dist;
  ChainLevelTerm top_term;
  top_term.level = level;
  top_term.two_b = out.two_b;
  top_term.bridge = out.bridge;
  top_term.total = out.total;
  out.per_level.push_back(std::move(top_term));
  out.verified = bridge.verified;
  return out;
}

BlockElement apply_isometry(const IsometryMap& map, const BlockElement& x,
                            const AlgebraShape& target) {
  if (map.perms.empty()) throw domain_error("isometry map has no permutations");
  const std::vector<std::size_t>& perm = map.perms.back();
  const std::size_t d = x.shape.blocks();
  if (perm.size() != d || target.blocks() != d)
    throw shape_error("permutation does not match the top level");
  if (!map.top_unitaries.empty() && map.top_unitaries.size() != d)
    throw shape_error("wrong number of top-level unitaries");
  BlockElement out = BlockElement::zero(target);
  std::vector<char> seen(d, 0);
  for (std::size_t j = 0; j < d; ++j) {
    std::size_t pj = perm[j];
    if (pj >= d || seen[pj]) throw domain_error("block map is not a permutation");
    seen[pj] = 1;
    if (target.dims[pj] != x.shape.dims[j])
      throw shape_error("permutation does not preserve block dimensions");
    if (map.top_unitaries.empty()) {
      out.blocks[pj] = x.blocks[j];
    } else {
      const CMatrix& u = map.top_unitaries[j];
      if (u.dim() != x.blocks[j].dim())
        throw shape_error("top unitary has the wrong dimension");
      out.blocks[pj] = mul(mul(u, x.blocks[j]), u.adjoint());
    }
  }
  return out;
}

IsometryMap relabeling_isometry(const Tower& t,
                                const std::vector<std::vector<std::size_t>>& perms) {
  if (perms.size() != t.levels.size())
    throw shape_error("need one block permutation per level");
  for (std::size_t n = 0; n < perms.size(); ++n) {
    if (perms[n].size() != t.levels[n].blocks())
      throw shape_error("permutation size does not match level block count");
    std::vector<char> seen(perms[n].size(), 0);
    for (std::size_t j : perms[n]) {
      if (j >= perms[n].size() || seen[j]) throw domain_error("level map is not a permutation");
      seen[j] = 1;
    }
  }

  // pi[j][r] = coordinate of source cell r of block j inside the relabeled
  // tower's realization of the same element, built one step at a time so it
  // intertwines the nested layouts of every lower level simultaneously.
  std::vector<std::vector<std::size_t>> pi(t.levels[0].blocks());
  for (std::size_t j = 0; j < pi.size(); ++j) {
    pi[j].resize(t.levels[0].dense_dims()[j]);
    for (std::size_t r = 0; r < pi[j].size(); ++r) pi[j][r] = r;
  }
  for (std::size_t n = 0; n < t.steps.size(); ++n) {
    const MultiplicityEmbedding& e = t.steps[n];
    const std::vector<std::size_t>& pin = perms[n];
    const std::size_t in_blocks = e.in_shape.blocks();
    const std::vector<std::size_t> din = t.levels[n].dense_dims();
    std::vector<std::size_t> pin_inv(in_blocks);
    for (std::size_t i = 0; i < in_blocks; ++i) pin_inv[pin[i]] = i;

    const std::size_t out_blocks = e.out_shape.blocks();
    const std::vector<std::size_t> dout = t.levels[n + 1].dense_dims();
    std::vector<std::vector<std::size_t>> next(out_blocks);
    for (std::size_t j = 0; j < out_blocks; ++j) {
      next[j].assign(dout[j], 0);
      // Start offset of the copies of each relabeled input block inside the
      // relabeled output block (stacked in relabeled input order).
      std::vector<std::size_t> off_v(in_blocks, 0);
      std::size_t acc = 0;
      for (std::size_t ip = 0; ip < in_blocks; ++ip) {
        off_v[ip] = acc;
        const std::size_t iu = pin_inv[ip];
        acc += e.at(j, iu).convert_to<std::size_t>() * din[iu];
      }
      std::size_t off_u = 0;
      for (std::size_t i = 0; i < in_blocks; ++i) {
        const std::size_t copies = e.at(j, i).convert_to<std::size_t>();
        for (std::size_t c = 0; c < copies; ++c) {
          const std::size_t v0 = off_v[pin[i]] + c * din[i];
          for (std::size_t r = 0; r < din[i]; ++r) next[j][off_u + r] = v0 + pi[i][r];
          off_u += din[i];
        }
      }
    }
    pi = std::move(next);
  }

  IsometryMap map;
  map.perms = perms;
  map.top_unitaries.reserve(pi.size());
  for (const std::vector<std::size_t>& p : pi) {
    CMatrix uni(p.size());
    for (std::size_t r = 0; r < p.size(); ++r) uni(p[r], r) = cx(1, 0);
    map.top_unitaries.push_back(std::move(uni));
  }
  return map;
}

IsometryCertificate verify_quantum_isometry(const IsometryMap& map, const LipEvaluator& u,
                                            const LipEvaluator& v, std::size_t samples,
                                            std::uint64_t seed, double tolerance) {
  IsometryCertificate cert;
  cert.seed = seed;
  if (tolerance < 1e-8) throw domain_error("isometry tolerance can only be loosened");
  cert.tolerance = tolerance;
  const std::size_t n_level = u.level();
  auto fail = [&](const char* why) {
    cert.failure = why;
    cert.verified = false;
    return cert;
  };

  if (v.level() != n_level) return fail("level mismatch");
  if (u.spec().kind != v.spec().kind) return fail("kind mismatch");
  if (map.perms.size() != n_level + 1) return fail("permutation count mismatch");

  const Tower& tu = u.spec().tower;
  const Tower& tv = v.spec().tower;
  for (std::size_t n = 0; n <= n_level; ++n) {
    const AlgebraShape& su = tu.levels[n];
    const AlgebraShape& sv = tv.levels[n];
    const std::vector<std::size_t>& perm = map.perms[n];
    if (su.blocks() != sv.blocks() || perm.size() != su.blocks())
      return fail("level block counts mismatch");
    std::vector<char> seen(perm.size(), 0);
    for (std::size_t j = 0; j < perm.size(); ++j) {
      if (perm[j] >= perm.size() || seen[perm[j]]) return fail("block map is not a permutation");
      seen[perm[j]] = 1;
      if (sv.dims[perm[j]] != su.dims[j]) return fail("block dimensions mismatch");
    }
  }
  for (std::size_t n = 0; n < n_level; ++n) {
    const MultiplicityEmbedding& eu = tu.steps[n];
    const MultiplicityEmbedding& ev = tv.steps[n];
    const auto& pin = map.perms[n];
    const auto& pout = map.perms[n + 1];
    for (std::size_t j = 0; j < eu.out_shape.blocks(); ++j)
      for (std::size_t i = 0; i < eu.in_shape.blocks(); ++i)
        if (ev.at(pout[j], pin[i]) != eu.at(j, i)) return fail("step matrices not conjugate");
  }
  if (!map.top_unitaries.empty()) {
    const AlgebraShape& su = tu.levels[n_level];
    if (map.top_unitaries.size() != su.blocks()) return fail("wrong number of top unitaries");
    std::vector<std::size_t> dims = su.dense_dims();
    for (std::size_t j = 0; j < dims.size(); ++j) {
      const CMatrix& uni = map.top_unitaries[j];
      if (uni.dim() != dims[j]) return fail("top unitary has the wrong dimension");
      CMatrix res = mul(uni, uni.adjoint()) - CMatrix::identity(dims[j]);
      if (res.frobenius() > 1e-9) return fail("top block map is not unitary");
    }
  }
  cert.structure_ok = true;

  for (std::size_t m = 0; m < n_level; ++m)
    if (u.beta_exact(m) != v.beta_exact(m)) return fail("weight sequences differ");
  cert.beta_ok = true;

  const auto& wu = u.spec().trace;
  const auto& wv = v.spec().trace;
  if (wu.has_value() != wv.has_value()) return fail("trace data mismatch");
  if (wu) {
    const auto& perm = map.perms[n_level];
    for (std::size_t j = 0; j < perm.size(); ++j)
      if (wv->lambda[perm[j]] != wu->lambda[j]) return fail("trace weights differ");
  }
  cert.trace_ok = true;

  CounterRng rng(seed, 14);
  std::vector<BlockElement> ball = u.sample_ball(samples, rng);
  cert.samples = ball.size();
  const AlgebraShape& target = tv.levels[n_level];
  double dev = 0;
  for (const BlockElement& a : ball) {
    BlockElement b = apply_isometry(map, a, target);
    dev = std::max(dev, std::fabs(v.value(b).value() - u.value(a).value()));
  }
  cert.max_deviation = dev;
  if (dev > cert.tolerance) return fail("Lip-norm deviation above tolerance");
  cert.verified = true;
  return cert;
}

}  // namespace qprop
