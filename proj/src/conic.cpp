#include "boxplan/conic.hpp"

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace boxplan::conic {

int ConicProblem::add_var(double lo, double hi) {
  lb.push_back(lo);
  ub.push_back(hi);
  linear.push_back(0.0);
  return num_vars++;
}

int ConicProblem::add_vars(int n, double lo, double hi) {
  const int first = num_vars;
  for (int i = 0; i < n; ++i) add_var(lo, hi);
  return first;
}

void ConicProblem::add_linear(int i, double v) { linear[i] += v; }

void ConicProblem::add_quad(int i, int j, double v) {
  quad.emplace_back(i, j, v);
}

int ConicProblem::add_eq(const std::vector<std::pair<int, double>>& terms, double rhs) {
  const int row = num_eq_rows();
  for (const auto& [col, coeff] : terms) {
    eq.emplace_back(row, col, coeff);
  }
  eq_rhs.push_back(rhs);
  return row;
}

void ConicProblem::add_soc(std::vector<int> vars) {
  soc_blocks.push_back(std::move(vars));
}

void ConicProblem::fix_var(int i, double value) {
  add_eq({{i, 1.0}}, value);
}

namespace {

using Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

struct Layout {
  int n = 0;  // variables
  int p = 0;  // equality rows
  int l = 0;  // orthant rows
  int m = 0;  // total cone dimension
  int degree = 0;
  std::vector<int> lower_row;  // per variable, -1 if no finite lower bound
  std::vector<int> upper_row;
  std::vector<int> soc_offset;  // offsets into s/z, after the orthant block
  std::vector<int> soc_dim;
};

struct Scaling {
  VectorXd w_orth;   // sqrt(s/z)
  VectorXd w2_orth;  // s/z
  std::vector<double> soc_beta;
  std::vector<VectorXd> soc_v;
  VectorXd lambda;  // scaled point, = W z = W^{-1} s
};

double cone_min_eig(const VectorXd& u, const Layout& lay) {
  double m = kInf;
  for (int i = 0; i < lay.l; ++i) m = std::min(m, u[i]);
  for (size_t c = 0; c < lay.soc_offset.size(); ++c) {
    const int off = lay.soc_offset[c];
    const int q = lay.soc_dim[c];
    const double tail = (q > 1) ? u.segment(off + 1, q - 1).norm() : 0.0;
    m = std::min(m, u[off] - tail);
  }
  return m;
}

// Smallest positive root of a t^2 + b t + c with c > 0, or +inf if none.
double smallest_positive_root(double a, double b, double c) {
  const double tiny = 1e-300;
  if (std::abs(a) < tiny) {
    if (b < -tiny) return -c / b;
    return kInf;
  }
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return kInf;
  const double sq = std::sqrt(disc);
  const double qq = (b >= 0.0) ? -0.5 * (b + sq) : -0.5 * (b - sq);
  double best = kInf;
  if (std::abs(a) > tiny && qq != 0.0) {
    const double t1 = qq / a;
    if (t1 > 0.0) best = std::min(best, t1);
  }
  if (qq != 0.0) {
    const double t2 = c / qq;
    if (t2 > 0.0) best = std::min(best, t2);
  }
  return best;
}

// Largest t >= 0 with u + t du still in the cone.
double cone_max_step(const VectorXd& u, const VectorXd& du, const Layout& lay) {
  double step = kInf;
  for (int i = 0; i < lay.l; ++i) {
    if (du[i] < 0.0) step = std::min(step, -u[i] / du[i]);
  }
  for (size_t c = 0; c < lay.soc_offset.size(); ++c) {
    const int off = lay.soc_offset[c];
    const int q = lay.soc_dim[c];
    const double u0 = u[off];
    const double d0 = du[off];
    double a, b, cc;
    if (q > 1) {
      const auto u1 = u.segment(off + 1, q - 1);
      const auto d1 = du.segment(off + 1, q - 1);
      a = d0 * d0 - d1.squaredNorm();
      b = 2.0 * (u0 * d0 - u1.dot(d1));
      cc = u0 * u0 - u1.squaredNorm();
    } else {
      a = d0 * d0;
      b = 2.0 * u0 * d0;
      cc = u0 * u0;
    }
    cc = std::max(cc, 0.0);
    step = std::min(step, smallest_positive_root(a, b, cc));
    if (d0 < 0.0) step = std::min(step, -u0 / d0);
  }
  return step;
}

bool compute_scaling(const VectorXd& s, const VectorXd& z, const Layout& lay, Scaling& sc) {
  sc.w2_orth.resize(lay.l);
  sc.w_orth.resize(lay.l);
  sc.lambda.resize(lay.m);
  for (int i = 0; i < lay.l; ++i) {
    if (s[i] <= 0.0 || z[i] <= 0.0) return false;
    sc.w2_orth[i] = s[i] / z[i];
    sc.w_orth[i] = std::sqrt(sc.w2_orth[i]);
    sc.lambda[i] = std::sqrt(s[i] * z[i]);
  }
  const size_t ncones = lay.soc_offset.size();
  sc.soc_beta.resize(ncones);
  sc.soc_v.resize(ncones);
  for (size_t c = 0; c < ncones; ++c) {
    const int off = lay.soc_offset[c];
    const int q = lay.soc_dim[c];
    const auto sb = s.segment(off, q);
    const auto zb = z.segment(off, q);
    const double tail_s = (q > 1) ? sb.tail(q - 1).squaredNorm() : 0.0;
    const double tail_z = (q > 1) ? zb.tail(q - 1).squaredNorm() : 0.0;
    const double res_s = sb[0] * sb[0] - tail_s;
    const double res_z = zb[0] * zb[0] - tail_z;
    if (res_s <= 0.0 || res_z <= 0.0 || sb[0] <= 0.0 || zb[0] <= 0.0) return false;
    const double as = std::sqrt(res_s);
    const double az = std::sqrt(res_z);
    VectorXd sbar = sb / as;
    VectorXd zbar = zb / az;
    const double gamma = std::sqrt((1.0 + sbar.dot(zbar)) / 2.0);
    // NT scaling point wbar = (sbar + J zbar) / (2 gamma), then the
    // hyperbolic Householder vector v = (wbar + e) / sqrt(2 (wbar0 + 1)),
    // which makes W = beta (2vv' - J) satisfy W z = W^{-1} s.
    VectorXd v(q);
    v[0] = (sbar[0] + zbar[0]) / (2.0 * gamma);
    if (q > 1) v.tail(q - 1) = (sbar.tail(q - 1) - zbar.tail(q - 1)) / (2.0 * gamma);
    v[0] += 1.0;
    v /= std::sqrt(2.0 * v[0]);
    const double beta = std::sqrt(as / az);
    sc.soc_beta[c] = beta;
    sc.soc_v[c] = v;
    // lambda = W z = beta (2 v (v.z) - J z)
    const double vz = v.dot(zb);
    VectorXd lam = 2.0 * vz * v;
    lam[0] -= zb[0];
    if (q > 1) lam.tail(q - 1) += zb.tail(q - 1);
    sc.lambda.segment(off, q) = beta * lam;
  }
  return true;
}

// out = W u
void apply_w(const Scaling& sc, const Layout& lay, const VectorXd& u, VectorXd& out) {
  out.resize(lay.m);
  out.head(lay.l) = sc.w_orth.cwiseProduct(u.head(lay.l));
  for (size_t c = 0; c < lay.soc_offset.size(); ++c) {
    const int off = lay.soc_offset[c];
    const int q = lay.soc_dim[c];
    const VectorXd& v = sc.soc_v[c];
    const auto ub = u.segment(off, q);
    const double vu = v.dot(ub);
    VectorXd r = 2.0 * vu * v;
    r[0] -= ub[0];
    if (q > 1) r.tail(q - 1) += ub.tail(q - 1);
    out.segment(off, q) = sc.soc_beta[c] * r;
  }
}

// out = W^{-1} u, using W^{-1} = (1/beta) (2 (Jv)(Jv)' - J)
void apply_w_inv(const Scaling& sc, const Layout& lay, const VectorXd& u, VectorXd& out) {
  out.resize(lay.m);
  out.head(lay.l) = u.head(lay.l).cwiseQuotient(sc.w_orth);
  for (size_t c = 0; c < lay.soc_offset.size(); ++c) {
    const int off = lay.soc_offset[c];
    const int q = lay.soc_dim[c];
    const VectorXd& v = sc.soc_v[c];
    const auto ub = u.segment(off, q);
    VectorXd jv = -v;
    jv[0] = v[0];
    const double jvu = jv.dot(ub);
    VectorXd r = 2.0 * jvu * jv;
    r[0] -= ub[0];
    if (q > 1) r.tail(q - 1) += ub.tail(q - 1);
    out.segment(off, q) = r / sc.soc_beta[c];
  }
}

// Jordan product u o v on the cone algebra.
void jordan_mul(const Layout& lay, const VectorXd& u, const VectorXd& v, VectorXd& out) {
  out.resize(lay.m);
  out.head(lay.l) = u.head(lay.l).cwiseProduct(v.head(lay.l));
  for (size_t c = 0; c < lay.soc_offset.size(); ++c) {
    const int off = lay.soc_offset[c];
    const int q = lay.soc_dim[c];
    const auto ub = u.segment(off, q);
    const auto vb = v.segment(off, q);
    out[off] = ub.dot(vb);
    if (q > 1) {
      out.segment(off + 1, q - 1) = ub[0] * vb.tail(q - 1) + vb[0] * ub.tail(q - 1);
    }
  }
}

// Solves lambda o u = d for u.
void jordan_solve(const Scaling& sc, const Layout& lay, const VectorXd& d, VectorXd& out) {
  out.resize(lay.m);
  out.head(lay.l) = d.head(lay.l).cwiseQuotient(sc.lambda.head(lay.l));
  for (size_t c = 0; c < lay.soc_offset.size(); ++c) {
    const int off = lay.soc_offset[c];
    const int q = lay.soc_dim[c];
    const auto lam = sc.lambda.segment(off, q);
    const auto db = d.segment(off, q);
    if (q == 1) {
      out[off] = db[0] / lam[0];
      continue;
    }
    const double tail2 = lam.tail(q - 1).squaredNorm();
    const double det = lam[0] * lam[0] - tail2;
    const double u0 = (lam[0] * db[0] - lam.tail(q - 1).dot(db.tail(q - 1))) / det;
    out[off] = u0;
    out.segment(off + 1, q - 1) = (db.tail(q - 1) - u0 * lam.tail(q - 1)) / lam[0];
  }
}

VectorXd cone_identity(const Layout& lay) {
  VectorXd e = VectorXd::Zero(lay.m);
  e.head(lay.l).setOnes();
  for (int off : lay.soc_offset) e[off] = 1.0;
  return e;
}

struct StandardForm {
  Layout lay;
  SpMat P;  // n x n, full symmetric
  SpMat A;  // p x n, rows equilibrated
  SpMat G;  // m x n
  VectorXd c, b, h;
  VectorXd eq_row_scale;
  std::vector<std::pair<int, double>> fixed_from_bounds;  // vars pinned by lb == ub
};

StandardForm build_standard_form(const ConicProblem& prob) {
  if (prob.num_vars <= 0) {
    throw std::invalid_argument("conic::solve: problem has no variables");
  }
  StandardForm sf;
  const int n = prob.num_vars;
  sf.lay.n = n;
  sf.c = Eigen::Map<const VectorXd>(prob.linear.data(), n);

  // Objective quadratic: add_quad(i, j, v) contributes v * x_i * x_j, so the
  // matrix P of (1/2) x'Px gets 2v on the diagonal and v on both triangles.
  std::vector<Triplet> ptrip;
  for (const auto& t : prob.quad) {
    if (t.row() < 0 || t.row() >= n || t.col() < 0 || t.col() >= n) {
      throw std::invalid_argument("conic::solve: quadratic term index out of range");
    }
    if (t.row() == t.col()) {
      ptrip.emplace_back(t.row(), t.col(), 2.0 * t.value());
    } else {
      ptrip.emplace_back(t.row(), t.col(), t.value());
      ptrip.emplace_back(t.col(), t.row(), t.value());
    }
  }
  sf.P.resize(n, n);
  sf.P.setFromTriplets(ptrip.begin(), ptrip.end());

  // Equalities, plus rows for variables pinned by lb == ub.
  std::vector<Triplet> atrip = prob.eq;
  std::vector<double> brhs = prob.eq_rhs;
  for (int i = 0; i < n; ++i) {
    if (prob.lb[i] > prob.ub[i]) {
      throw std::invalid_argument("conic::solve: variable has lb > ub");
    }
    if (prob.lb[i] == prob.ub[i] && std::isfinite(prob.lb[i])) {
      atrip.emplace_back(static_cast<int>(brhs.size()), i, 1.0);
      brhs.push_back(prob.lb[i]);
      sf.fixed_from_bounds.emplace_back(i, prob.lb[i]);
    }
  }
  const int p = static_cast<int>(brhs.size());
  sf.lay.p = p;
  sf.A.resize(p, n);
  for (const auto& t : atrip) {
    if (t.col() < 0 || t.col() >= n || t.row() < 0 || t.row() >= p) {
      throw std::invalid_argument("conic::solve: equality term index out of range");
    }
  }
  sf.A.setFromTriplets(atrip.begin(), atrip.end());
  sf.b = Eigen::Map<const VectorXd>(brhs.data(), p);

  // Row equilibration of the equalities; duals are rescaled on extraction.
  sf.eq_row_scale = VectorXd::Ones(p);
  if (p > 0) {
    VectorXd rowmax = VectorXd::Zero(p);
    for (int k = 0; k < sf.A.outerSize(); ++k) {
      for (SpMat::InnerIterator it(sf.A, k); it; ++it) {
        rowmax[it.row()] = std::max(rowmax[it.row()], std::abs(it.value()));
      }
    }
    for (int r = 0; r < p; ++r) {
      sf.eq_row_scale[r] = std::max(1.0, rowmax[r]);
    }
    for (int k = 0; k < sf.A.outerSize(); ++k) {
      for (SpMat::InnerIterator it(sf.A, k); it; ++it) {
        it.valueRef() /= sf.eq_row_scale[it.row()];
      }
    }
    sf.b = sf.b.cwiseQuotient(sf.eq_row_scale);
  }

  // Inequality part: finite bounds first (the orthant block), then the
  // second-order cone slices.
  std::vector<Triplet> gtrip;
  std::vector<double> hvals;
  sf.lay.lower_row.assign(n, -1);
  sf.lay.upper_row.assign(n, -1);
  auto pinned = [&](int i) { return prob.lb[i] == prob.ub[i] && std::isfinite(prob.lb[i]); };
  for (int i = 0; i < n; ++i) {
    if (std::isfinite(prob.lb[i]) && !pinned(i)) {
      sf.lay.lower_row[i] = static_cast<int>(hvals.size());
      gtrip.emplace_back(static_cast<int>(hvals.size()), i, -1.0);
      hvals.push_back(-prob.lb[i]);
    }
  }
  for (int i = 0; i < n; ++i) {
    if (std::isfinite(prob.ub[i]) && !pinned(i)) {
      sf.lay.upper_row[i] = static_cast<int>(hvals.size());
      gtrip.emplace_back(static_cast<int>(hvals.size()), i, 1.0);
      hvals.push_back(prob.ub[i]);
    }
  }
  sf.lay.l = static_cast<int>(hvals.size());
  for (const auto& block : prob.soc_blocks) {
    if (block.empty()) {
      throw std::invalid_argument("conic::solve: empty SOC block");
    }
    sf.lay.soc_offset.push_back(static_cast<int>(hvals.size()));
    sf.lay.soc_dim.push_back(static_cast<int>(block.size()));
    for (int idx : block) {
      if (idx < 0 || idx >= n) {
        throw std::invalid_argument("conic::solve: SOC index out of range");
      }
      gtrip.emplace_back(static_cast<int>(hvals.size()), idx, -1.0);
      hvals.push_back(0.0);
    }
  }
  sf.lay.m = static_cast<int>(hvals.size());
  sf.lay.degree = sf.lay.l + static_cast<int>(prob.soc_blocks.size());
  sf.G.resize(sf.lay.m, n);
  sf.G.setFromTriplets(gtrip.begin(), gtrip.end());
  sf.h = Eigen::Map<const VectorXd>(hvals.data(), sf.lay.m);
  return sf;
}

// Symmetric indefinite KKT system
//   [ P   A'   G'  ]
//   [ A            ]
//   [ G       -W'W ]
// factored with static regularization (+d, -d, -d) and solved with two
// rounds of iterative refinement against the unregularized operator.
class KktSolver {
 public:
  KktSolver(const StandardForm& sf) : sf_(sf) {
    const Layout& lay = sf.lay;
    dim_ = lay.n + lay.p + lay.m;
    reg_ = VectorXd::Zero(dim_);
    reg_.head(lay.n).setConstant(delta_);
    reg_.tail(lay.p + lay.m).setConstant(-delta_);

    base_.clear();
    for (int k = 0; k < sf.P.outerSize(); ++k) {
      for (SpMat::InnerIterator it(sf.P, k); it; ++it) {
        if (it.row() >= it.col()) base_.emplace_back(it.row(), it.col(), it.value());
      }
    }
    for (int i = 0; i < lay.n; ++i) base_.emplace_back(i, i, 0.0);  // keep diagonal present
    for (int k = 0; k < sf.A.outerSize(); ++k) {
      for (SpMat::InnerIterator it(sf.A, k); it; ++it) {
        base_.emplace_back(lay.n + it.row(), it.col(), it.value());
      }
    }
    for (int r = 0; r < lay.p; ++r) base_.emplace_back(lay.n + r, lay.n + r, 0.0);
    for (int k = 0; k < sf.G.outerSize(); ++k) {
      for (SpMat::InnerIterator it(sf.G, k); it; ++it) {
        base_.emplace_back(lay.n + lay.p + it.row(), it.col(), it.value());
      }
    }
    kkt_.resize(dim_, dim_);
  }

  // Assemble and factor with the given scaling; W = identity when null.
  bool factor(const Scaling* sc) {
    const Layout& lay = sf_.lay;
    std::vector<Triplet> trip = base_;
    const int zoff = lay.n + lay.p;
    if (sc == nullptr) {
      // Identity scaling, but with the same sparsity pattern as the scaled
      // case so the symbolic factorization can be reused.
      for (int r = 0; r < lay.l; ++r) trip.emplace_back(zoff + r, zoff + r, -1.0);
      for (size_t c = 0; c < lay.soc_offset.size(); ++c) {
        const int off = lay.soc_offset[c];
        const int q = lay.soc_dim[c];
        for (int i = 0; i < q; ++i) {
          for (int j = 0; j <= i; ++j) {
            trip.emplace_back(zoff + off + i, zoff + off + j, (i == j) ? -1.0 : 0.0);
          }
        }
      }
    } else {
      for (int r = 0; r < lay.l; ++r) {
        trip.emplace_back(zoff + r, zoff + r, -sc->w2_orth[r]);
      }
      for (size_t c = 0; c < lay.soc_offset.size(); ++c) {
        const int off = lay.soc_offset[c];
        const int q = lay.soc_dim[c];
        const VectorXd& v = sc->soc_v[c];
        VectorXd jv = -v;
        jv[0] = v[0];
        const double b2 = sc->soc_beta[c] * sc->soc_beta[c];
        const double vtv = v.squaredNorm();
        // W'W = beta^2 (I + 4 (v'v) vv' - 2 v (Jv)' - 2 (Jv) v')
        for (int i = 0; i < q; ++i) {
          for (int j = 0; j <= i; ++j) {
            double val = 4.0 * vtv * v[i] * v[j] - 2.0 * v[i] * jv[j] - 2.0 * jv[i] * v[j];
            if (i == j) val += 1.0;
            trip.emplace_back(zoff + off + i, zoff + off + j, -b2 * val);
          }
        }
      }
    }
    for (int i = 0; i < dim_; ++i) trip.emplace_back(i, i, reg_[i]);
    kkt_.setFromTriplets(trip.begin(), trip.end());
    if (!analyzed_) {
      ldlt_.analyzePattern(kkt_);
      analyzed_ = true;
    }
    ldlt_.factorize(kkt_);
    return ldlt_.info() == Eigen::Success;
  }

  VectorXd solve(const VectorXd& rhs) const {
    VectorXd x = ldlt_.solve(rhs);
    for (int round = 0; round < 2; ++round) {
      VectorXd resid = rhs - kkt_.selfadjointView<Eigen::Lower>() * x + reg_.cwiseProduct(x);
      x += ldlt_.solve(resid);
    }
    return x;
  }

  void bump_regularization() {
    delta_ *= 100.0;
    reg_.head(sf_.lay.n).setConstant(delta_);
    reg_.tail(sf_.lay.p + sf_.lay.m).setConstant(-delta_);
  }

 private:
  const StandardForm& sf_;
  int dim_ = 0;
  double delta_ = 1e-9;
  VectorXd reg_;
  std::vector<Triplet> base_;
  SpMat kkt_;
  Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
  bool analyzed_ = false;
};

ConicSolution extract_solution(const StandardForm& sf, const VectorXd& x, const VectorXd& y,
                               const VectorXd& z) {
  const Layout& lay = sf.lay;
  ConicSolution sol;
  sol.x = x;
  sol.eq_dual = VectorXd::Zero(lay.p);
  for (int r = 0; r < lay.p; ++r) sol.eq_dual[r] = y[r] / sf.eq_row_scale[r];
  sol.lower_dual = VectorXd::Zero(lay.n);
  sol.upper_dual = VectorXd::Zero(lay.n);
  for (int i = 0; i < lay.n; ++i) {
    if (lay.lower_row[i] >= 0) sol.lower_dual[i] = z[lay.lower_row[i]];
    if (lay.upper_row[i] >= 0) sol.upper_dual[i] = z[lay.upper_row[i]];
  }
  sol.objective = 0.5 * x.dot(sf.P * x) + sf.c.dot(x);
  return sol;
}

}  // namespace

ConicSolution solve(const ConicProblem& problem, const SolveOptions& options) {
  StandardForm sf = build_standard_form(problem);
  const Layout& lay = sf.lay;
  KktSolver kkt(sf);

  const double ftol = options.feas_tol;
  const double bnorm = std::max(1.0, sf.b.norm());
  const double hnorm = std::max(1.0, sf.h.norm());
  const double cnorm = std::max(1.0, sf.c.norm());

  // No cone part: a single symmetric solve of the equality KKT system.
  if (lay.m == 0) {
    if (!kkt.factor(nullptr)) {
      kkt.bump_regularization();
      if (!kkt.factor(nullptr)) {
        ConicSolution sol;
        sol.message = "KKT factorization failed";
        return sol;
      }
    }
    VectorXd rhs(lay.n + lay.p);
    rhs.head(lay.n) = -sf.c;
    rhs.tail(lay.p) = sf.b;
    VectorXd sol_vec = kkt.solve(rhs);
    VectorXd x = sol_vec.head(lay.n);
    VectorXd y = sol_vec.tail(lay.p);
    ConicSolution sol = extract_solution(sf, x, y, VectorXd());
    sol.primal_residual = lay.p > 0 ? (sf.A * x - sf.b).norm() / bnorm : 0.0;
    sol.dual_residual = (sf.P * x + sf.c + sf.A.transpose() * y).norm() / cnorm;
    sol.gap = 0.0;
    sol.iterations = 1;
    if (sol.primal_residual <= std::max(ftol, 1e-8) && sol.dual_residual <= std::max(ftol, 1e-8)) {
      sol.status = SolveStatus::optimal;
    } else {
      sol.status = SolveStatus::numerical_failure;
      sol.message = "equality KKT solve did not reach tolerance";
    }
    return sol;
  }

  // Initial point from one solve with identity scaling, shifted into the
  // interior of the cone.
  if (!kkt.factor(nullptr)) {
    kkt.bump_regularization();
    if (!kkt.factor(nullptr)) {
      ConicSolution sol;
      sol.message = "initial KKT factorization failed";
      return sol;
    }
  }
  VectorXd rhs(lay.n + lay.p + lay.m);
  rhs.head(lay.n) = -sf.c;
  rhs.segment(lay.n, lay.p) = sf.b;
  rhs.tail(lay.m) = sf.h;
  VectorXd init = kkt.solve(rhs);
  VectorXd x = init.head(lay.n);
  VectorXd y = init.segment(lay.n, lay.p);
  VectorXd z = init.tail(lay.m);
  VectorXd s = -z;
  const VectorXd e = cone_identity(lay);
  {
    const double ts = -cone_min_eig(s, lay);
    if (ts >= -1e-8 * std::max(1.0, s.norm())) s += (1.0 + ts) * e;
    const double tz = -cone_min_eig(z, lay);
    if (tz >= -1e-8 * std::max(1.0, z.norm())) z += (1.0 + tz) * e;
  }

  ConicSolution best;
  double best_score = kInf;
  Scaling sc;
  VectorXd rx, ry, rz, g, tmp, ds, dz_only, wg;
  int consecutive_tiny_steps = 0;

  for (int it = 0; it < options.max_iterations; ++it) {
    rx = sf.P * x + sf.c + sf.A.transpose() * y + sf.G.transpose() * z;
    ry = sf.A * x - sf.b;
    rz = sf.G * x + s - sf.h;
    const double gap = s.dot(z);
    const double mu = gap / lay.degree;
    const double pobj = 0.5 * x.dot(sf.P * x) + sf.c.dot(x);
    const double pres = std::max(lay.p > 0 ? ry.norm() / bnorm : 0.0, rz.norm() / hnorm);
    const double dres = rx.norm() / cnorm;
    const double relgap = gap / std::max(1.0, std::abs(pobj));

    const double score = pres + dres + std::max(relgap, 0.0);
    if (score < best_score) {
      best_score = score;
      best = extract_solution(sf, x, y, z);
      best.primal_residual = pres;
      best.dual_residual = dres;
      best.gap = gap;
      best.iterations = it;
    }
    if (options.verbose) {
      std::ostringstream os;
      os << "iter " << it << " pres " << pres << " dres " << dres << " gap " << gap;
      best.message = os.str();
    }
    if (pres <= ftol && dres <= ftol && relgap <= options.tol) {
      ConicSolution sol = extract_solution(sf, x, y, z);
      sol.status = SolveStatus::optimal;
      sol.primal_residual = pres;
      sol.dual_residual = dres;
      sol.gap = gap;
      sol.iterations = it;
      return sol;
    }

    if (!compute_scaling(s, z, lay, sc)) break;
    if (!kkt.factor(&sc)) {
      kkt.bump_regularization();
      if (!kkt.factor(&sc)) break;
    }

    // Affine (predictor) direction.
    rhs.head(lay.n) = -rx;
    rhs.segment(lay.n, lay.p) = -ry;
    rhs.tail(lay.m) = -rz + s;  // W(lambda o\ (lambda o lambda)) = W lambda = s
    VectorXd dir = kkt.solve(rhs);
    VectorXd dz_aff = dir.tail(lay.m);
    apply_w(sc, lay, dz_aff, tmp);
    tmp = -sc.lambda - tmp;  // g_aff - W dz
    apply_w(sc, lay, tmp, ds);
    VectorXd ds_aff = ds;

    double alpha_aff = std::min({1.0, cone_max_step(s, ds_aff, lay), cone_max_step(z, dz_aff, lay)});
    const double gap_aff = (s + alpha_aff * ds_aff).dot(z + alpha_aff * dz_aff);
    double sigma = 0.0;
    if (gap > 0.0) {
      const double ratio = std::clamp(gap_aff / gap, 0.0, 1.0);
      sigma = ratio * ratio * ratio;
    }

    // Combined (corrector) direction.
    VectorXd wds, wdz, eta, dcompl;
    apply_w_inv(sc, lay, ds_aff, wds);
    apply_w(sc, lay, dz_aff, wdz);
    jordan_mul(lay, wds, wdz, eta);
    jordan_mul(lay, sc.lambda, sc.lambda, dcompl);
    dcompl = sigma * mu * e - eta - dcompl;
    jordan_solve(sc, lay, dcompl, g);
    apply_w(sc, lay, g, wg);
    rhs.head(lay.n) = -rx;
    rhs.segment(lay.n, lay.p) = -ry;
    rhs.tail(lay.m) = -rz - wg;
    dir = kkt.solve(rhs);
    VectorXd dx = dir.head(lay.n);
    VectorXd dy = dir.segment(lay.n, lay.p);
    VectorXd dz = dir.tail(lay.m);
    apply_w(sc, lay, dz, tmp);
    tmp = g - tmp;
    apply_w(sc, lay, tmp, ds);

    double alpha = std::min(cone_max_step(s, ds, lay), cone_max_step(z, dz, lay));
    alpha = std::min(1.0, 0.99 * alpha);
    if (alpha < 1e-10) {
      if (++consecutive_tiny_steps >= 3) break;
    } else {
      consecutive_tiny_steps = 0;
    }
    x += alpha * dx;
    y += alpha * dy;
    s += alpha * ds;
    z += alpha * dz;
    best.iterations = it + 1;
  }

  // Did not converge to full tolerance; accept a mildly loose solution,
  // otherwise report the failure with diagnostics.
  ConicSolution sol = best;
  if (sol.primal_residual <= 100.0 * ftol && sol.dual_residual <= 100.0 * ftol &&
      sol.gap / std::max(1.0, std::abs(sol.objective)) <= 100.0 * options.tol) {
    sol.status = SolveStatus::optimal;
    sol.message = "converged loosely (EQ residual slack 100x)";
    return sol;
  }
  std::ostringstream os;
  os << "interior-point did not converge: pres " << sol.primal_residual << " dres "
     << sol.dual_residual << " gap " << sol.gap << " after " << sol.iterations << " iterations";
  sol.message = os.str();
  if (sol.primal_residual > 1e-4 && sol.dual_residual <= 1e-6) {
    sol.status = SolveStatus::infeasible;
  } else {
    sol.status = SolveStatus::numerical_failure;
  }
  return sol;
}

}  // namespace boxplan::conic
