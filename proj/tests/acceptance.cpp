// Release gate: twelve pinned end-to-end checks covering continued
// fractions, tower structure, conditional expectations, trace consistency,
// Lip-norms, quasi-Leibniz inequalities, quotient solving, truncation and
// fusing-chain bounds, isometry certification, transport distances, and
// CLI determinism.  One PASS/FAIL line per check; exit code = #failures.
//
// Every tolerance is pinned here in the body of its check.  A failure
// prints the first few offending observations.

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qprop/errors.hpp"
#include "qprop/metric.hpp"
#include "qprop/rng.hpp"

using namespace qprop;
namespace fs = std::filesystem;

namespace {

// --- tiny harness ---------------------------------------------------------

struct Check {
  bool ok = true;
  std::size_t failures = 0;
  std::string detail;

  void expect(bool cond, const std::string& msg) {
    if (cond) return;
    ok = false;
    ++failures;
    if (failures <= 4) {
      if (!detail.empty()) detail += "; ";
      detail += msg;
    }
  }
};

struct Gate {
  int failed = 0;

  void run(int id, const std::string& title, const std::function<void(Check&)>& body) {
    Check c;
    try {
      body(c);
    } catch (const std::exception& e) {
      c.expect(false, std::string("unexpected exception: ") + e.what());
    }
    if (c.ok) {
      std::printf("check %02d  PASS  %s\n", id, title.c_str());
    } else {
      ++failed;
      std::printf("check %02d  FAIL  %s  [%zu failure(s): %s]\n", id, title.c_str(), c.failures,
                  c.detail.c_str());
    }
    std::fflush(stdout);
  }
};

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return buf;
}

// --- shared generators ----------------------------------------------------

BlockElement random_sa_element(const AlgebraShape& s, CounterRng& rng) {
  BlockElement x = BlockElement::zero(s);
  std::vector<std::size_t> dims = s.dense_dims();
  for (std::size_t k = 0; k < dims.size(); ++k)
    for (std::size_t i = 0; i < dims[k]; ++i)
      for (std::size_t j = 0; j < dims[k]; ++j)
        x.blocks[k](i, j) = cx(rng.gaussian(), rng.gaussian());
  return sa_projection(x);
}

TraceWeights random_state(const AlgebraShape& s, CounterRng& rng) {
  std::vector<double> lam(s.blocks());
  double total = 0;
  for (double& l : lam) {
    l = 0.05 + rng.uniform();
    total += l;
  }
  for (double& l : lam) l /= total;
  return make_trace(s, lam);
}

ContinuedFraction random_cf(CounterRng& rng, std::size_t len, Int max_quot) {
  std::vector<Int> qs{Int(0)};
  for (std::size_t j = 1; j < len; ++j)
    qs.push_back(Int(1) + Int(rng.below(static_cast<std::uint64_t>(max_quot))));
  return make_cf(std::move(qs));
}

// Random tower with every block dimension <= 4 at every level and the
// requested depth: each output block is filled greedily within the size
// budget, and unhit inputs get their own singleton output block so each
// step stays injective (block count is unconstrained, sizes are).
Tower random_capped_tower(CounterRng& rng, std::size_t depth) {
  std::vector<Int> dims0{Int(1 + rng.below(2))};
  if (rng.below(2) == 0) dims0.push_back(Int(1 + rng.below(2)));
  std::vector<AlgebraShape> levels{make_shape(dims0)};
  std::vector<MultiplicityEmbedding> steps;
  for (std::size_t n = 0; n < depth; ++n) {
    const AlgebraShape& in = levels.back();
    const std::vector<std::size_t> nin = in.dense_dims();
    const std::size_t b_in = in.blocks();
    std::vector<std::vector<Int>> rows;
    std::vector<bool> hit(b_in, false);
    const std::size_t primary = 1 + rng.below(3);
    for (std::size_t j = 0; j < primary; ++j) {
      std::vector<Int> row(b_in, Int(0));
      std::size_t budget = 4;
      for (std::size_t tries = 0; tries < 6; ++tries) {
        const std::size_t i = rng.below(b_in);
        if (nin[i] <= budget) {
          row[i] += 1;
          hit[i] = true;
          budget -= nin[i];
        }
        if (budget == 0) break;
      }
      bool empty = true;
      for (const Int& m : row)
        if (m != 0) empty = false;
      if (empty) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < b_in; ++i)
          if (nin[i] < nin[best]) best = i;
        row[best] = 1;
        hit[best] = true;
      }
      rows.push_back(std::move(row));
    }
    for (std::size_t i = 0; i < b_in; ++i)
      if (!hit[i]) {
        std::vector<Int> row(b_in, Int(0));
        row[i] = 1;
        rows.push_back(std::move(row));
      }
    std::vector<Int> out_dims;
    std::vector<Int> mult;
    for (const std::vector<Int>& row : rows) {
      Int d = 0;
      for (std::size_t i = 0; i < b_in; ++i) d += row[i] * in.dims[i];
      out_dims.push_back(d);
      for (const Int& m : row) mult.push_back(m);
    }
    AlgebraShape out = make_shape(out_dims);
    steps.push_back(make_embedding(in, out, std::move(mult)));
    levels.push_back(out);
  }
  return make_tower(std::move(levels), std::move(steps));
}

// Random commutative tower: refining partitions up to max_top points.
Tower random_partition_tower(CounterRng& rng, std::size_t max_top) {
  std::vector<AlgebraShape> levels{make_shape({Int(1)})};
  std::vector<MultiplicityEmbedding> steps;
  std::size_t cur = 1;
  while (true) {
    std::size_t next = cur + 1 + rng.below(3);
    if (next > max_top) next = max_top;
    if (next <= cur) break;
    std::vector<std::size_t> fiber(next);
    for (std::size_t j = 0; j < cur; ++j) fiber[j] = j;
    for (std::size_t j = cur; j < next; ++j) fiber[j] = rng.below(cur);
    std::vector<Int> mult(next * cur, Int(0));
    for (std::size_t j = 0; j < next; ++j) mult[j * cur + fiber[j]] = 1;
    AlgebraShape out = make_shape(std::vector<Int>(next, Int(1)));
    steps.push_back(make_embedding(levels.back(), out, mult));
    levels.push_back(out);
    cur = next;
    if (cur == max_top || rng.below(3) == 0) break;
  }
  return make_tower(levels, steps);
}

Tower permute_tower(const Tower& t, const std::vector<std::vector<std::size_t>>& perms) {
  std::vector<AlgebraShape> levels;
  for (std::size_t n = 0; n < t.levels.size(); ++n) {
    std::vector<Int> dims(t.levels[n].blocks());
    for (std::size_t j = 0; j < dims.size(); ++j) dims[perms[n][j]] = t.levels[n].dims[j];
    levels.push_back(make_shape(std::move(dims)));
  }
  std::vector<MultiplicityEmbedding> steps;
  for (std::size_t n = 0; n < t.steps.size(); ++n) {
    const MultiplicityEmbedding& e = t.steps[n];
    const auto& pin = perms[n];
    const auto& pout = perms[n + 1];
    std::vector<Int> mult(e.out_shape.blocks() * e.in_shape.blocks(), Int(0));
    for (std::size_t j = 0; j < e.out_shape.blocks(); ++j)
      for (std::size_t i = 0; i < e.in_shape.blocks(); ++i)
        mult[pout[j] * e.in_shape.blocks() + pin[i]] = e.at(j, i);
    steps.push_back(make_embedding(levels[n], levels[n + 1], std::move(mult)));
  }
  return make_tower(std::move(levels), std::move(steps), t.label);
}

LipSpec diag_pair_spec(const ContinuedFraction& cf, std::size_t level, LipKind kind) {
  Tower t = effros_shen_tower(cf, level);
  std::optional<TraceWeights> w;
  if (kind == LipKind::cond_exp) w = effros_shen_trace(cf, level).weights;
  std::vector<Rat> beta = effros_shen_beta(cf, level);
  return make_lip_spec(std::move(t), level, kind, std::move(w), std::move(beta));
}

// Family whose member k follows the limit quotients through index k and
// then continues with a constant tail.
FusingFamily tail_family(const ContinuedFraction& limit_cf, std::size_t members,
                         std::size_t level, Int tail) {
  FusingFamily fam;
  const std::size_t len = limit_cf.quotients.size();
  for (std::size_t k = 0; k < members; ++k) {
    std::vector<Int> qs{Int(0)};
    for (std::size_t j = 1; j < len; ++j)
      qs.push_back(j <= k ? limit_cf.quotients[j] : tail);
    fam.members.push_back(diag_pair_spec(make_cf(std::move(qs)), level, LipKind::cond_exp));
  }
  fam.limit = diag_pair_spec(limit_cf, level, LipKind::cond_exp);
  for (std::size_t n = 0; n <= level; ++n) {
    Rat best = fam.limit.beta[n];
    for (const LipSpec& s : fam.members) best = std::max(best, s.beta[n]);
    fam.dominator.push_back(best);
  }
  return fam;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main() {
  Gate gate;

  // 1. Convergent recursion: Fibonacci prefix, determinant identity on
  //    random quotient sequences, and the exact golden weight 1/13.
  gate.run(1, "continued fractions: Fibonacci convergents, det = +/-1, golden beta(3) = 1/13",
           [](Check& c) {
             const Convergents g = convergents(golden_cf(9));
             const std::vector<Int> fib{1, 1, 2, 3, 5, 8, 13, 21, 34};
             c.expect(g.q.size() == fib.size(), "golden depth-8 convergent count");
             for (std::size_t n = 0; n < fib.size() && n < g.q.size(); ++n)
               c.expect(g.q[n] == fib[n], "golden q[" + std::to_string(n) + "] is Fibonacci");

             CounterRng rng(1001, 1);
             for (int trial = 0; trial < 50; ++trial) {
               const ContinuedFraction cf = random_cf(rng, 2 + rng.below(9), Int(6));
               const Convergents cv = convergents(cf);
               for (std::size_t n = 0; n + 1 < cv.q.size(); ++n) {
                 const Int det = cv.p[n + 1] * cv.q[n] - cv.p[n] * cv.q[n + 1];
                 c.expect(det == 1 || det == -1,
                          "determinant identity at trial " + std::to_string(trial));
               }
             }

             const std::vector<Rat> beta = effros_shen_beta(golden_cf(9), 3);
             c.expect(beta[3] == Rat(1, 13), "golden beta(3) equals 1/13 exactly");
           });

  // 2. Diagonal-pair tower structure for random quotient sequences:
  //    shapes (q_n, q_{n-1}), step matrices [[a_{n+1},1],[1,0]],
  //    unital and injective at every step.
  gate.run(2, "tower structure: shapes, step matrices, unital+injective to depth 8",
           [](Check& c) {
             CounterRng rng(2002, 1);
             for (int trial = 0; trial < 20; ++trial) {
               const ContinuedFraction cf = random_cf(rng, 9, Int(6));
               const Convergents cv = convergents(cf);
               const Tower t = effros_shen_tower(cf, 8);
               c.expect(t.levels.size() == 9 && t.steps.size() == 8, "tower depth");
               c.expect(t.levels[0] == make_shape({Int(1)}), "level 0 is scalar");
               for (std::size_t n = 1; n <= 8; ++n)
                 c.expect(t.levels[n] == make_shape({cv.q[n], cv.q[n - 1]}),
                          "level " + std::to_string(n) + " shape");
               for (std::size_t n = 0; n < 8; ++n) {
                 const MultiplicityEmbedding& e = t.steps[n];
                 if (n == 0) {
                   c.expect(e.mult == std::vector<Int>{cf.quotients[1], Int(1)},
                            "step 0 multiplicity column");
                 } else {
                   c.expect(e.mult == std::vector<Int>{cf.quotients[n + 1], Int(1), Int(1),
                                                       Int(0)},
                            "step " + std::to_string(n) + " multiplicity matrix");
                 }
                 // unital: row sums against input dims reproduce output dims
                 for (std::size_t j = 0; j < e.out_shape.blocks(); ++j) {
                   Int total = 0;
                   for (std::size_t i = 0; i < e.in_shape.blocks(); ++i)
                     total += e.at(j, i) * e.in_shape.dims[i];
                   c.expect(total == e.out_shape.dims[j], "unital row");
                 }
                 // injective: no zero column
                 for (std::size_t i = 0; i < e.in_shape.blocks(); ++i) {
                   bool nonzero = false;
                   for (std::size_t j = 0; j < e.out_shape.blocks(); ++j)
                     if (e.at(j, i) != 0) nonzero = true;
                   c.expect(nonzero, "injective column");
                 }
                 // reconstruction re-runs the validating constructor
                 make_embedding(e.in_shape, e.out_shape, e.mult);
               }
             }
           });

  // 3. Conditional-expectation laws on random towers with block sizes <= 4
  //    and depth <= 4: idempotence, contractivity, trace preservation,
  //    module property, nesting.  300 elements across 10 towers.
  gate.run(3, "conditional expectations: five laws on 300 elements across 10 towers",
           [](Check& c) {
             for (int tw = 0; tw < 10; ++tw) {
               CounterRng rng(3000 + tw, 3);
               const std::size_t depth = 1 + rng.below(4);
               const Tower t = random_capped_tower(rng, depth);
               for (const AlgebraShape& s : t.levels)
                 for (const Int& d : s.dims)
                   c.expect(d <= 4, "block size cap");
               const TraceWeights w = random_state(t.top(), rng);
               std::vector<ConditionalExpectation> exps;
               for (std::size_t m = 0; m < depth; ++m) exps.emplace_back(t, depth, m, w);
               for (int rep = 0; rep < 30; ++rep) {
                 const BlockElement x = random_sa_element(t.top(), rng);
                 const std::size_t m = rng.below(depth);
                 const ConditionalExpectation& em = exps[m];
                 const BlockElement ex = em.apply(x);
                 c.expect(op_norm(em.apply(ex) - ex) <= 1e-9, "idempotence");
                 c.expect(op_norm(ex) <= op_norm(x) + 1e-9, "contractivity");
                 c.expect(std::abs(eval_trace(w, ex) - eval_trace(w, x)) <= 1e-10,
                          "trace preservation");
                 const BlockElement u = random_sa_element(t.levels[m], rng);
                 const BlockElement v = random_sa_element(t.levels[m], rng);
                 const BlockElement au = em.push(u);
                 const BlockElement av = em.push(v);
                 c.expect(op_norm(em.apply(mul(mul(au, x), av)) - mul(mul(au, ex), av)) <= 1e-9,
                          "module property");
                 const std::size_t k = rng.below(m + 1);
                 const ConditionalExpectation& ek = exps[k];
                 c.expect(op_norm(ek.apply(ex) - ek.apply(x)) <= 1e-9, "nesting E_k E_m = E_k");
               }
             }
           });

  // 4. Trace-weight consistency: pulling the level-(n+1) weights (t, 1-t)
  //    back one step reproduces the level-n weights for the golden quotients
  //    and for (0,2,1,3,1,4), touching levels 1..5; and for the golden
  //    tower the level-1 weight reproduces the golden ratio within the
  //    certified enclosure width.
  gate.run(4, "trace consistency: weight pullback at levels 1..5, t(theta,1) = theta",
           [](Check& c) {
             const std::vector<std::pair<std::string, ContinuedFraction>> cases{
                 {"golden", golden_cf(9)},
                 {"(0,2,1,3,1,4)", make_cf({Int(0), Int(2), Int(1), Int(3), Int(1), Int(4)})}};
             for (const auto& [name, cf] : cases) {
               const Tower t = effros_shen_tower(cf, 5);
               for (std::size_t n = 0; n + 1 <= 5; ++n) {
                 const std::vector<Rat> w_out = effros_shen_weights_exact(cf, n + 1);
                 const std::vector<Rat> w_in = effros_shen_weights_exact(cf, n);
                 const std::vector<Rat> pulled = pullback_weights_exact(t.steps[n], w_out);
                 c.expect(pulled.size() == w_in.size(), name + " pullback size");
                 for (std::size_t i = 0; i < w_in.size(); ++i) {
                   const double gap = std::abs(to_double(pulled[i] - w_in[i]));
                   c.expect(gap <= 1e-9, name + " pullback onto level " + std::to_string(n) +
                                             " gap " + fmt(gap));
                 }
               }
             }
             const EffrosShenTrace tr = effros_shen_trace(golden_cf(9), 1);
             const double theta = (std::sqrt(5.0) - 1.0) / 2.0;
             const double width = to_double(tr.t_range.width());
             c.expect(std::abs(to_double(tr.t_mid) - theta) <= width,
                      "golden t(theta,1) within enclosure width " + fmt(width));
           });

  // 5. Commutative oracle: scalars inside C^2 with weights (1/2,1/2) and
  //    beta(0) = 1 give Lip-norm |x1-x2|/2 and transport distance 2
  //    between the two point masses.
  gate.run(5, "two-point oracle: lip = |x1-x2|/2, distance of point masses = 2",
           [](Check& c) {
             const AlgebraShape l0 = make_shape({Int(1)});
             const AlgebraShape l1 = make_shape({Int(1), Int(1)});
             Tower t = make_tower({l0, l1}, {make_embedding(l0, l1, {Int(1), Int(1)})});
             const TraceWeights w = make_trace(l1, {0.5, 0.5});
             const LipEvaluator eval(
                 make_lip_spec(std::move(t), 1, LipKind::cond_exp, w, {Rat(1)}));
             CounterRng rng(5005, 1);
             for (int rep = 0; rep < 100; ++rep) {
               BlockElement x = BlockElement::zero(l1);
               const double x1 = rng.gaussian();
               const double x2 = rng.gaussian();
               x.blocks[0](0, 0) = x1;
               x.blocks[1](0, 0) = x2;
               const double lip = eval.value(x).value();
               c.expect(std::abs(lip - std::abs(x1 - x2) / 2) <= 1e-12,
                        "lip formula, gap " + fmt(std::abs(lip - std::abs(x1 - x2) / 2)));
             }
             const TraceWeights d1 = make_trace(l1, {1.0, 0.0});
             const TraceWeights d2 = make_trace(l1, {0.0, 1.0});
             const KantorovichExact ex = kantorovich_commutative_exact(eval, d1, d2);
             c.expect(std::abs(ex.value - 2.0) <= 1e-9, "point-mass distance " + fmt(ex.value));
           });

  // 6. Quasi-Leibniz inequalities: (2,0) for the expectation Lip-norm and
  //    (1,0) for the quotient Lip-norm, 500 self-adjoint pairs each,
  //    slack 1e-7; quotient values enter conservatively by their
  //    certified interval ends.
  gate.run(6, "quasi-Leibniz: (2,0) expectation kind, (1,0) quotient kind, 500 pairs each",
           [](Check& c) {
             const ContinuedFraction cf6 =
                 make_cf({Int(0), Int(2), Int(1), Int(3), Int(1), Int(4)});
             const LipEvaluator ce(diag_pair_spec(cf6, 2, LipKind::cond_exp));
             CounterRng rng_a(606, 1);
             const LeibnizReport ra = quasi_leibniz_check(ce, 2.0, 0.0, 500, rng_a, 1e-7);
             c.expect(ra.passed && ra.failures == 0,
                      "(2,0) worst margin " + fmt(ra.worst_margin));
             c.expect(ra.pairs == 500, "(2,0) pair count");

             const LipEvaluator qu(diag_pair_spec(golden_cf(9), 2, LipKind::quotient));
             CounterRng rng_b(606, 2);
             const LeibnizReport rb = quasi_leibniz_check(qu, 1.0, 0.0, 500, rng_b, 1e-7);
             c.expect(rb.passed && rb.failures == 0,
                      "(1,0) worst margin " + fmt(rb.worst_margin));
             c.expect(rb.pairs == 500, "(1,0) pair count");
           });

  // 7. Quotient-distance sandwich against the trace-orthogonal projection:
  //    ||x - E_m x||/2 - 1e-6 <= S_m(x) <= ||x - E_m x|| + 1e-8 on 500
  //    elements; relative gap <= 1e-5 on at least 95%, anything else
  //    carries converged = false.
  gate.run(7, "quotient sandwich on 500 elements, 95% certified to rel gap 1e-5",
           [](Check& c) {
             const ContinuedFraction cf6 =
                 make_cf({Int(0), Int(2), Int(1), Int(3), Int(1), Int(4)});
             const std::vector<Tower> towers{effros_shen_tower(golden_cf(9), 3),
                                             effros_shen_tower(cf6, 3)};
             std::size_t certified = 0;
             std::size_t total = 0;
             for (std::size_t ti = 0; ti < towers.size(); ++ti) {
               const Tower& t = towers[ti];
               std::vector<QuotientSolver> solvers;
               for (std::size_t m = 0; m < 3; ++m) solvers.emplace_back(t, m, 3);
               CounterRng rng(7000 + ti, 7);
               for (int rep = 0; rep < 250; ++rep) {
                 const BlockElement x = random_sa_element(t.top(), rng);
                 const std::size_t m = rng.below(3);
                 const QuotientSolver& solver = solvers[m];
                 const BlockElement ex = solver.hs_projection().apply(x);
                 const double residual = op_norm(x - ex);
                 const QuotientResult q = solver.solve(x);
                 ++total;
                 c.expect(q.value <= residual + 1e-8,
                          "upper side: S_m " + fmt(q.value) + " vs " + fmt(residual));
                 c.expect(q.value >= residual / 2 - 1e-6,
                          "lower side: S_m " + fmt(q.value) + " vs half " + fmt(residual / 2));
                 c.expect(q.lower <= q.value + 1e-12, "certified interval ordering");
                 if (q.rel_gap <= 1e-5)
                   ++certified;
                 else
                   c.expect(!q.converged, "unconverged instance must be flagged");
               }
             }
             c.expect(total == 500, "instance count");
             c.expect(certified * 20 >= total * 19,
                      "certified fraction " + fmt(double(certified) / double(total)));
           });

  // 8. Truncation-ball certificate on the golden depth-4 tower with default
  //    weights and the unique-trace state: for m = 1,2,3, 200 sampled
  //    Lip-ball elements have L(E_m a) <= 1 + 1e-9 and
  //    ||a - E_m a|| <= beta(m) + 1e-9.
  gate.run(8, "truncation certificates at m = 1,2,3 on the golden depth-4 tower",
           [](Check& c) {
             const LipEvaluator eval(diag_pair_spec(golden_cf(9), 4, LipKind::cond_exp));
             for (std::size_t m = 1; m <= 3; ++m) {
               const BetaBoundCertificate cert =
                   beta_bound_certificate(eval, m, 200, 800 + m);
               c.expect(cert.verified, "m=" + std::to_string(m) + " verified");
               c.expect(cert.samples >= 200, "m=" + std::to_string(m) + " sample count");
               c.expect(cert.tolerance == 1e-9, "pinned tolerance");
               c.expect(cert.claimed == eval.beta_exact(m), "claimed radius is beta(m)");
               c.expect(cert.worst_ball_residual <= 1e-9,
                        "ball residual " + fmt(cert.worst_ball_residual));
               c.expect(cert.worst_norm_residual <= 1e-9,
                        "norm residual " + fmt(cert.worst_norm_residual));
             }
           });

  // 9. Fusing chain toward the golden tower for members following the
  //    golden quotients through k and then the constant tail 2: fusing
  //    thresholds c_N <= N+1, member-vs-limit weight distance at level 3
  //    strictly decreasing over k = 4..9, and the emitted bound is exactly
  //    2/13 plus the bridge term.
  gate.run(9, "fusing chain: thresholds, strictly decreasing trace gaps, exact 2B(3)",
           [](Check& c) {
             const FusingFamily fam = tail_family(golden_cf(10), 10, 3, Int(2));
             std::vector<Tower> towers;
             for (const LipSpec& s : fam.members) towers.push_back(s.tower);
             const std::vector<std::size_t> cs = fusing_sequence(towers, fam.limit.tower, 3);
             for (std::size_t n = 0; n < cs.size(); ++n)
               c.expect(cs[n] <= n + 1, "c_" + std::to_string(n) + " = " +
                                            std::to_string(cs[n]) + " <= N+1");

             std::vector<double> gaps;
             for (std::size_t k = 4; k <= 9; ++k)
               gaps.push_back(weight_distance(*fam.members[k].trace, *fam.limit.trace));
             for (std::size_t i = 0; i + 1 < gaps.size(); ++i)
               c.expect(gaps[i] > gaps[i + 1], "weight distance strictly decreasing at k=" +
                                                   std::to_string(4 + i) + ": " + fmt(gaps[i]) +
                                                   " vs " + fmt(gaps[i + 1]));

             c.expect(fam.dominator[3] == Rat(1, 13), "dominating weight B(3) = 1/13");
             const ChainBound b = propinquity_chain_bound(fam, 3, 4, 40, 909);
             c.expect(b.verified, "chain bound verified");
             c.expect(b.c_n == 3, "chain threshold c_3");
             c.expect(b.two_b == Rat(2, 13), "2 B(3) = 2/13 exactly");
             c.expect(b.total == to_double(b.two_b) + b.bridge, "total = 2B(3) + bridge");
             c.expect(!b.per_level.empty() && b.per_level.back().total == b.total,
                      "per-level terms end at the emitted bound");
           });

  // 10. Isometry certification on a relabeled depth-4 tower: the built
  //     block-permutation isometry passes with deviation <= 1e-8 over 200
  //     samples; perturbing the target weights by 1e-3 is rejected at the
  //     trace-compatibility check.
  gate.run(10, "isometry: relabeled tower accepted, trace-perturbed variant rejected",
           [](Check& c) {
             const LipSpec spec = diag_pair_spec(golden_cf(9), 4, LipKind::cond_exp);
             const std::vector<std::vector<std::size_t>> perms{
                 {0}, {1, 0}, {1, 0}, {1, 0}, {1, 0}};
             const IsometryMap map = relabeling_isometry(spec.tower, perms);
             const Tower tp = permute_tower(spec.tower, perms);
             std::vector<double> lam(2);
             lam[perms[4][0]] = spec.trace->lambda[0];
             lam[perms[4][1]] = spec.trace->lambda[1];
             const LipEvaluator u(spec);
             const LipEvaluator v(make_lip_spec(tp, 4, LipKind::cond_exp,
                                                make_trace(tp.top(), lam), spec.beta));
             const IsometryCertificate ok = verify_quantum_isometry(map, u, v, 200, 1010);
             c.expect(ok.verified, "accepted: " + ok.failure);
             c.expect(ok.structure_ok && ok.beta_ok && ok.trace_ok, "all stages pass");
             c.expect(ok.samples >= 200, "sample count");
             c.expect(ok.max_deviation <= 1e-8, "deviation " + fmt(ok.max_deviation));

             std::vector<double> bad = lam;
             bad[0] += 1e-3;
             bad[1] -= 1e-3;
             const LipEvaluator v2(make_lip_spec(tp, 4, LipKind::cond_exp,
                                                 make_trace(tp.top(), bad), spec.beta));
             const IsometryCertificate rej = verify_quantum_isometry(map, u, v2, 200, 1010);
             c.expect(!rej.verified, "perturbed variant rejected");
             c.expect(!rej.trace_ok, "rejected at the trace check");
             c.expect(rej.failure == "trace weights differ", "failure names the trace check");
           });

  // 11. Transport estimator vs exact LP on 30 random commutative towers
  //     (top dimension <= 8): within 1e-4 below, never above by more
  //     than 1e-9.
  gate.run(11, "transport estimator within 1e-4 of the LP on 30 commutative instances",
           [](Check& c) {
             for (int inst = 0; inst < 30; ++inst) {
               CounterRng rng(1111 + inst, 11);
               const Tower t = random_partition_tower(rng, 8);
               const std::size_t level = t.depth();
               std::vector<Rat> beta;
               for (std::size_t m = 0; m < level; ++m)
                 beta.push_back(Rat(1, Int(1 + m * m)));
               const TraceWeights w = random_state(t.top(), rng);
               const LipEvaluator eval(
                   make_lip_spec(t, level, LipKind::cond_exp, w, std::move(beta)));
               const TraceWeights phi = random_state(t.top(), rng);
               const TraceWeights psi = random_state(t.top(), rng);
               const KantorovichExact ex = kantorovich_commutative_exact(eval, phi, psi);
               const KantorovichEstimate est =
                   kantorovich_lower_bound(eval, phi, psi, 64, 2000 + inst);
               c.expect(est.value <= ex.value + 1e-9,
                        "instance " + std::to_string(inst) + " estimate above LP by " +
                            fmt(est.value - ex.value));
               c.expect(ex.value - est.value <= 1e-4,
                        "instance " + std::to_string(inst) + " shortfall " +
                            fmt(ex.value - est.value));
             }
           });

  // 12. CLI determinism: the self-check suite with a pinned seed exits
  //     cleanly and emits byte-identical reports on repeated runs.
  gate.run(12, "verify-suite --seed 7 passes and is byte-identical across runs",
           [](Check& c) {
             const char* cli = std::getenv("QPROP_CLI");
             c.expect(cli != nullptr, "QPROP_CLI must point at the command-line binary");
             if (!cli) return;
             const fs::path dir =
                 fs::temp_directory_path() / ("qprop-acceptance-" + std::to_string(::getpid()));
             fs::create_directories(dir);
             const fs::path out1 = dir / "run1.json";
             const fs::path out2 = dir / "run2.json";
             for (const fs::path* out : {&out1, &out2}) {
               const std::string cmd = std::string("\"") + cli + "\" verify-suite --seed 7 > \"" +
                                       out->string() + "\" 2>/dev/null";
               const int status = std::system(cmd.c_str());
               const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
               c.expect(code == 0, "suite exit code " + std::to_string(code));
             }
             const std::string a = slurp(out1);
             const std::string b = slurp(out2);
             c.expect(!a.empty(), "suite output nonempty");
             c.expect(a == b, "reports are byte-identical");
             fs::remove_all(dir);
           });

  if (gate.failed == 0)
    std::printf("acceptance: all 12 checks passed\n");
  else
    std::printf("acceptance: %d of 12 checks FAILED\n", gate.failed);
  return gate.failed;
}
