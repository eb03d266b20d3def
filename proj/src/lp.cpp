#include "qprop/lp.hpp"

#include <algorithm>
#include <cmath>

namespace qprop {

namespace {

constexpr double kEps = 1e-9;
constexpr int kMaxPivots = 20000;

struct Tableau {
  std::size_t rows, cols;           // cols excludes the rhs column
  std::vector<std::vector<double>> t;  // rows x (cols+1), rhs last
  std::vector<std::size_t> basis;      // basic column per row

  double& rhs(std::size_t i) { return t[i][cols]; }

  void pivot(std::size_t pr, std::size_t pc) {
    const double p = t[pr][pc];
    for (double& v : t[pr]) v /= p;
    for (std::size_t i = 0; i < rows; ++i) {
      if (i == pr) continue;
      const double f = t[i][pc];
      if (f == 0) continue;
      for (std::size_t j = 0; j <= cols; ++j) t[i][j] -= f * t[pr][j];
    }
    basis[pr] = pc;
  }

  // Bland's rule on the given costs; returns the objective value reached.
  // banned columns never enter.
  double optimize(const std::vector<double>& cost, const std::vector<bool>& banned) {
    for (int iter = 0; iter < kMaxPivots; ++iter) {
      // reduced costs priced against the current basis
      std::size_t enter = cols;
      for (std::size_t j = 0; j < cols; ++j) {
        if (banned[j]) continue;
        double r = cost[j];
        for (std::size_t i = 0; i < rows; ++i) r -= cost[basis[i]] * t[i][j];
        if (r > kEps) {
          enter = j;
          break;  // Bland: first improving column
        }
      }
      if (enter == cols) {
        double z = 0;
        for (std::size_t i = 0; i < rows; ++i) z += cost[basis[i]] * rhs(i);
        return z;
      }
      std::size_t leave = rows;
      double best_ratio = 0;
      for (std::size_t i = 0; i < rows; ++i) {
        if (t[i][enter] <= kEps) continue;
        const double ratio = rhs(i) / t[i][enter];
        if (leave == rows || ratio < best_ratio - kEps ||
            (std::abs(ratio - best_ratio) <= kEps && basis[i] < basis[leave]))
          leave = i, best_ratio = ratio;
      }
      if (leave == rows) throw precision_error("lp unbounded during pricing");
      pivot(leave, enter);
    }
    throw precision_error("lp pivot limit exceeded");
  }
};

}  // namespace

LpResult solve_lp(const std::vector<double>& c, const std::vector<std::vector<double>>& a,
                  const std::vector<double>& b) {
  const std::size_t m = a.size(), n = c.size();
  for (const auto& row : a)
    if (row.size() != n) throw shape_error("lp row width mismatch");
  if (b.size() != m) throw shape_error("lp rhs size mismatch");

  // columns: n structural | m slacks | m artificials | rhs
  Tableau tab;
  tab.rows = m;
  tab.cols = n + 2 * m;
  tab.t.assign(m, std::vector<double>(tab.cols + 1, 0.0));
  tab.basis.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double sgn = (b[i] < 0) ? -1.0 : 1.0;
    for (std::size_t j = 0; j < n; ++j) tab.t[i][j] = sgn * a[i][j];
    tab.t[i][n + i] = sgn;           // slack
    tab.t[i][n + m + i] = 1.0;       // artificial
    tab.t[i][tab.cols] = sgn * b[i];
    tab.basis[i] = n + m + i;
  }

  std::vector<bool> banned(tab.cols, false);
  std::vector<double> phase1(tab.cols, 0.0);
  for (std::size_t i = 0; i < m; ++i) phase1[n + m + i] = -1.0;
  const double infeas = tab.optimize(phase1, banned);
  if (infeas < -1e-7) return LpResult{LpResult::Status::infeasible, 0, {}};

  // Drive basic artificials out where possible; ban them from re-entering.
  for (std::size_t i = 0; i < m; ++i) {
    if (tab.basis[i] < n + m) continue;
    std::size_t pc = tab.cols;
    for (std::size_t j = 0; j < n + m; ++j)
      if (std::abs(tab.t[i][j]) > kEps) {
        pc = j;
        break;
      }
    if (pc != tab.cols) tab.pivot(i, pc);
  }
  for (std::size_t j = n + m; j < tab.cols; ++j) banned[j] = true;

  std::vector<double> phase2(tab.cols, 0.0);
  for (std::size_t j = 0; j < n; ++j) phase2[j] = c[j];
  LpResult res;
  try {
    res.value = tab.optimize(phase2, banned);
  } catch (const precision_error& e) {
    if (std::string(e.what()).find("unbounded") != std::string::npos)
      return LpResult{LpResult::Status::unbounded, 0, {}};
    throw;
  }
  res.status = LpResult::Status::optimal;
  res.x.assign(n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    if (tab.basis[i] < n) res.x[tab.basis[i]] = tab.rhs(i);
  return res;
}

}  // namespace qprop
