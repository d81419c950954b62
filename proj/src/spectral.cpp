#include "tipsim/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>

#include <Eigen/SparseCholesky>
#include <lapacke.h>

#include "parallel.hpp"

namespace tipsim {

namespace {

void lapack_check(lapack_int info, const char* what) {
  if (info != 0)
    throw NumericsError(std::string(what) + " failed, info=" + std::to_string(info));
}

EigenSet dense_eigen_path(const SparseSymMatrix& h) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h.to_dense());
  if (solver.info() != Eigen::Success)
    throw NumericsError("SelfAdjointEigenSolver did not converge");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

EigenSet dense_syevr_path(const SparseSymMatrix& h) {
  const auto n = static_cast<lapack_int>(h.dim());
  Eigen::MatrixXd a = h.to_dense();
  Eigen::VectorXd w(n);
  Eigen::MatrixXd z(n, n);
  std::vector<lapack_int> isuppz(2 * static_cast<std::size_t>(n));
  lapack_int m = 0;
  lapack_check(LAPACKE_dsyevr(LAPACK_COL_MAJOR, 'V', 'A', 'U', n, a.data(), n,
                              0.0, 0.0, 0, 0, 0.0, &m, w.data(), z.data(), n,
                              isuppz.data()),
               "dsyevr");
  if (m != n) throw NumericsError("dsyevr returned fewer eigenpairs than expected");
  return {std::move(w), std::move(z)};
}

}  // namespace

EigenSet diagonalize(const SparseSymMatrix& h, const DenseLimits& limits) {
  if (h.dim() <= limits.eigen_max) return dense_eigen_path(h);
  if (h.dim() <= limits.syevr_max) return dense_syevr_path(h);
  throw NumericsError(
      "diagonalize: dimension " + std::to_string(h.dim()) +
      " exceeds the dense limits; use diagonalize_window or for_each_eigenpair_block");
}

std::vector<double> all_eigenvalues(const SparseSymMatrix& h) {
  const auto dim = h.dim();
  const auto n = static_cast<lapack_int>(dim);
  const std::size_t kd = h.bandwidth();

  std::vector<double> d(dim, 0.0), e(dim > 0 ? dim - 1 : 0, 0.0);
  if (kd <= 1) {
    for (const auto& t : h.upper()) {
      if (t.row == t.col)
        d[t.row] = t.value;
      else
        e[t.row] = t.value;
    }
  } else {
    const std::size_t ldab = kd + 1;
    if (ldab * dim > (std::size_t{3} << 28))  // ~6.4 GB of doubles
      throw NumericsError("all_eigenvalues: band storage too large");
    std::vector<double> ab(ldab * dim, 0.0);
    // Lower-band column-major storage: AB[(i-j) + j*ldab] = A(i,j), i >= j.
    for (const auto& t : h.upper())
      ab[(t.col - t.row) + t.row * ldab] = t.value;
    double dummy_q = 0.0;
    lapack_check(LAPACKE_dsbtrd(LAPACK_COL_MAJOR, 'N', 'L', n,
                                static_cast<lapack_int>(kd), ab.data(),
                                static_cast<lapack_int>(ldab), d.data(), e.data(),
                                &dummy_q, 1),
                 "dsbtrd");
  }
  lapack_check(LAPACKE_dsterf(n, d.data(), e.data()), "dsterf");
  return d;
}

void for_each_eigenpair_block(
    const SparseSymMatrix& h, int block_size,
    const std::function<void(const Eigen::VectorXd&, const Eigen::MatrixXd&,
                             std::size_t)>& visit) {
  DenseLimits limits;
  if (h.dim() > limits.stream_max)
    throw NumericsError("for_each_eigenpair_block: dimension too large");
  if (block_size < 1) throw std::invalid_argument("block_size must be >= 1");

  const auto n = static_cast<lapack_int>(h.dim());
  Eigen::MatrixXd a = h.to_dense();
  Eigen::VectorXd d(n), e(n > 1 ? n - 1 : 1), tau(n > 1 ? n - 1 : 1);
  lapack_check(LAPACKE_dsytrd(LAPACK_COL_MAJOR, 'L', n, a.data(), n, d.data(),
                              e.data(), tau.data()),
               "dsytrd");

  Eigen::VectorXd w(n);
  Eigen::MatrixXd z(n, std::min<lapack_int>(n, block_size));
  std::vector<lapack_int> isuppz(2 * static_cast<std::size_t>(block_size) + 2);
  for (lapack_int start = 0; start < n; start += block_size) {
    const lapack_int il = start + 1;
    const lapack_int iu = std::min<lapack_int>(n, start + block_size);
    const lapack_int nzc = iu - il + 1;
    // dstemr overwrites its tridiagonal input.
    Eigen::VectorXd dd = d, ee(n);
    ee.head(n - 1) = e.head(n - 1);
    lapack_int m = 0;
    lapack_logical tryrac = 1;
    lapack_check(LAPACKE_dstemr(LAPACK_COL_MAJOR, 'V', 'I', n, dd.data(),
                                ee.data(), 0.0, 0.0, il, iu, &m, w.data(),
                                z.data(), n, nzc, isuppz.data(), &tryrac),
                 "dstemr");
    if (m != nzc) throw NumericsError("dstemr returned an unexpected state count");
    lapack_check(LAPACKE_dormtr(LAPACK_COL_MAJOR, 'L', 'L', 'N', n, m, a.data(),
                                n, tau.data(), z.data(), n),
                 "dormtr");
    visit(w.head(m), z.leftCols(m), static_cast<std::size_t>(start));
  }
}

namespace {

/// Repeatedly factorizes H - sigma*I over changing shifts, reusing the
/// symbolic analysis. Inertia comes from the LDL^T pivot signs.
class ShiftSolver {
 public:
  explicit ShiftSolver(const SparseSymMatrix& h)
      : base_(h.to_sparse()), work_(base_), scale_(std::max(1.0, h.norm_bound())) {
    const auto n = base_.outerSize();
    diag_pos_.resize(static_cast<std::size_t>(n), -1);
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index k = base_.outerIndexPtr()[j]; k < base_.outerIndexPtr()[j + 1]; ++k) {
        if (base_.innerIndexPtr()[k] == j) diag_pos_[static_cast<std::size_t>(j)] = k;
      }
      if (diag_pos_[static_cast<std::size_t>(j)] < 0)
        throw NumericsError("ShiftSolver: missing structural diagonal entry");
    }
    ldlt_.analyzePattern(base_);
  }

  /// Factorize at the shift (nudged deterministically on pivot breakdown).
  /// Returns the count of eigenvalues below the shift actually used.
  long factorize(double sigma) {
    const double step = 1e-9 * scale_;
    for (int attempt = 0; attempt < 8; ++attempt) {
      const double s = sigma + step * attempt * (attempt % 2 ? 1 : -1);
      set_shift(s);
      ldlt_.factorize(work_);
      if (ldlt_.info() != Eigen::Success) continue;
      const auto& dvec = ldlt_.vectorD();
      if ((dvec.array().abs() < 1e-13 * scale_).any() || !dvec.allFinite()) continue;
      shift_ = s;
      return (dvec.array() < 0.0).count();
    }
    throw NumericsError("LDL^T factorization kept hitting tiny pivots near shift " +
                        std::to_string(sigma));
  }

  double shift() const { return shift_; }

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const { return ldlt_.solve(b); }

 private:
  void set_shift(double s) {
    std::memcpy(work_.valuePtr(), base_.valuePtr(),
                sizeof(double) * static_cast<std::size_t>(base_.nonZeros()));
    for (auto k : diag_pos_) work_.valuePtr()[k] -= s;
  }

  Eigen::SparseMatrix<double> base_, work_;
  std::vector<Eigen::Index> diag_pos_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
  double scale_ = 1.0;
  double shift_ = 0.0;
};

struct RitzCandidate {
  double energy;
  Eigen::VectorXd vector;
};

}  // namespace

long eigenvalue_count_below(const SparseSymMatrix& h, double e) {
  ShiftSolver solver(h);
  return solver.factorize(e);
}

EigenSet diagonalize_window(const SparseSymMatrix& h, double lo, double hi,
                            const WindowOptions& opts) {
  if (!(lo < hi)) throw std::invalid_argument("diagonalize_window: require lo < hi");
  const auto dim = static_cast<Eigen::Index>(h.dim());

  ShiftSolver solver(h);
  const long expected = solver.factorize(hi) - solver.factorize(lo);
  if (expected == 0) return {Eigen::VectorXd(0), Eigen::MatrixXd(dim, 0)};
  if (expected > opts.max_states)
    throw NumericsError("diagonalize_window: " + std::to_string(expected) +
                        " states in window exceed max_states");

  const double norm_b = std::max(1.0, h.norm_bound());
  const double res_tol = opts.residual_tol > 0 ? opts.residual_tol : 1e-8 * norm_b;
  solver.factorize(0.5 * (lo + hi));

  std::mt19937_64 rng(opts.seed ^ (h.dim() * 0x9e3779b97f4a7c15ull));
  auto random_unit = [&] {
    std::normal_distribution<double> gauss;
    Eigen::VectorXd v(dim);
    for (Eigen::Index i = 0; i < dim; ++i) v[i] = gauss(rng);
    return v;
  };

  const int m_cap = static_cast<int>(std::min<long>(
      dim, opts.max_iterations > 0 ? opts.max_iterations : 4 * expected + 120));

  std::vector<RitzCandidate> accepted;
  long total_iters = 0;
  double best_unconverged = std::numeric_limits<double>::infinity();

  auto orthogonalize_against_accepted = [&](Eigen::VectorXd& v) {
    for (const auto& a : accepted) v -= a.vector.dot(v) * a.vector;
  };

  for (int restart = 0; restart <= opts.max_restarts; ++restart) {
    Eigen::MatrixXd basis(dim, std::min(m_cap, 256));
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(m_cap);
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(m_cap);

    Eigen::VectorXd v = random_unit();
    orthogonalize_against_accepted(v);
    if (v.norm() < 1e-8) continue;
    v.normalize();
    basis.col(0) = v;

    int m = 0;
    bool subspace_exhausted = false;
    long stable_count = -1;

    auto extract = [&](int mm) {
      // Ritz extraction from the tridiagonal section, then explicit
      // residual checks in the original operator.
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tsolver;
      tsolver.computeFromTridiagonal(alpha.head(mm), beta.head(mm - 1));
      const auto& theta = tsolver.eigenvalues();
      const auto& s = tsolver.eigenvectors();
      for (Eigen::Index i = 0; i < theta.size(); ++i) {
        if (std::abs(theta[i]) < 1e-14) continue;
        const double energy = solver.shift() + 1.0 / theta[i];
        if (energy < lo || energy > hi) continue;
        Eigen::VectorXd y = basis.leftCols(mm) * s.col(i);
        for (const auto& a : accepted) y -= a.vector.dot(y) * a.vector;
        const double ny = y.norm();
        if (ny < 1e-6) continue;  // already represented
        y /= ny;
        const double residual = (h.apply(y) - energy * y).norm();
        if (residual <= res_tol) {
          accepted.push_back({energy, std::move(y)});
        } else {
          best_unconverged = std::min(best_unconverged, residual / norm_b);
        }
      }
    };

    while (m < m_cap && static_cast<long>(accepted.size()) < expected) {
      if (m == basis.cols()) {
        basis.conservativeResize(Eigen::NoChange,
                                 std::min<Eigen::Index>(m_cap, basis.cols() + 256));
      }
      Eigen::VectorXd w = solver.solve(basis.col(m));
      ++total_iters;
      orthogonalize_against_accepted(w);
      alpha[m] = basis.col(m).dot(w);
      w -= alpha[m] * basis.col(m);
      if (m > 0) w -= beta[m - 1] * basis.col(m - 1);
      // Two passes of full reorthogonalization keep the basis clean.
      for (int pass = 0; pass < 2; ++pass)
        w -= basis.leftCols(m + 1) * (basis.leftCols(m + 1).transpose() * w);
      const double b = w.norm();
      ++m;
      if (b < 1e-12) {
        subspace_exhausted = true;
        break;
      }
      beta[m - 1] = b;
      if (m < m_cap) {
        if (m == basis.cols())
          basis.conservativeResize(Eigen::NoChange,
                                   std::min<Eigen::Index>(m_cap, basis.cols() + 256));
        basis.col(m) = w / b;
      }

      // Cheap convergence monitor: count stabilized in-window Ritz values.
      if (m >= 2 && (m % 32 == 0 || m == m_cap)) {
        Eigen::VectorXd dd = alpha.head(m), ee = beta.head(m - 1);
        if (LAPACKE_dsterf(m, dd.data(), ee.data()) == 0) {
          long in_window = 0;
          for (int i = 0; i < m; ++i) {
            if (std::abs(dd[i]) < 1e-14) continue;
            const double energy = solver.shift() + 1.0 / dd[i];
            if (energy >= lo && energy <= hi) ++in_window;
          }
          const long needed = expected - static_cast<long>(accepted.size());
          if (in_window >= needed && in_window == stable_count) extract(m);
          stable_count = in_window;
        }
      }
    }
    if (static_cast<long>(accepted.size()) < expected && m >= 2) extract(m);
    if (static_cast<long>(accepted.size()) == expected) break;
    if (subspace_exhausted && restart == opts.max_restarts) break;
  }

  if (static_cast<long>(accepted.size()) != expected)
    throw NumericsError("diagonalize_window: converged " +
                            std::to_string(accepted.size()) + " of " +
                            std::to_string(expected) + " states in window",
                        total_iters, best_unconverged);

  std::sort(accepted.begin(), accepted.end(),
            [](const RitzCandidate& a, const RitzCandidate& b) {
              return a.energy < b.energy;
            });
  EigenSet out;
  out.values.resize(expected);
  out.vectors.resize(dim, expected);
  for (long i = 0; i < expected; ++i) {
    out.values[i] = accepted[static_cast<std::size_t>(i)].energy;
    out.vectors.col(i) = accepted[static_cast<std::size_t>(i)].vector;
  }
  return out;
}

EigenSetCheck verify_eigenset(const SparseSymMatrix& h, const EigenSet& set) {
  EigenSetCheck check;
  if (set.size() == 0) return check;
  Eigen::MatrixXd gram = set.vectors.transpose() * set.vectors;
  gram.diagonal().array() -= 1.0;
  check.orthonormality = gram.cwiseAbs().maxCoeff();
  const double norm_b = std::max(1.0, h.norm_bound());
  double worst = 0;
  for (Eigen::Index i = 0; i < set.size(); ++i) {
    const double r = (h.apply(Eigen::VectorXd(set.vectors.col(i))) -
                      set.values[i] * set.vectors.col(i))
                         .norm();
    worst = std::max(worst, r);
  }
  check.relative_residual = worst / norm_b;
  return check;
}

namespace {

template <typename Vec>
Eigen::VectorXd pdf_impl(const Vec& v, const PairBasis& basis) {
  if (static_cast<std::size_t>(v.size()) != basis.dimension())
    throw ConfigError("pdf_of_state: vector does not match basis dimension");
  const double norm = v.norm();
  if (std::abs(norm - 1.0) > 1e-8)
    throw std::invalid_argument("pdf_of_state: state is not normalized");
  Eigen::VectorXd p = Eigen::VectorXd::Zero(basis.lattice_size());
  const int n = basis.lattice_size();
  std::size_t idx = 0;
  for (int l = 0; l < n; ++l) {
    for (int m = l; m < n; ++m, ++idx) {
      const double w = std::norm(v[static_cast<Eigen::Index>(idx)]);
      if (l == m) {
        p[l] += w;
      } else {
        p[l] += 0.5 * w;
        p[m] += 0.5 * w;
      }
    }
  }
  return p;
}

}  // namespace

Eigen::VectorXd pdf_of_state(const Eigen::VectorXd& v, const PairBasis& basis) {
  return pdf_impl(v, basis);
}

Eigen::VectorXd pdf_of_state(const Eigen::VectorXcd& v, const PairBasis& basis) {
  return pdf_impl(v, basis);
}

Eigen::VectorXd sp_pdf_of_state(const Eigen::VectorXd& v) {
  return v.array().square();
}

double participation_number(const Eigen::VectorXd& pdf) {
  const double s = pdf.array().square().sum();
  if (s <= 0.0) throw std::domain_error("participation_number: empty PDF");
  return 1.0 / s;
}

int MinibandSet::window_of(double energy) const {
  for (std::size_t i = 0; i < windows.size(); ++i)
    if (energy >= windows[i].lo && energy <= windows[i].hi)
      return static_cast<int>(i);
  return -1;
}

std::optional<MinibandSet> classify_minibands(const std::vector<double>& evals,
                                              int n_bands,
                                              const std::string& prefix) {
  const auto n = evals.size();
  if (n_bands < 2 || n < static_cast<std::size_t>(2 * n_bands)) return std::nullopt;

  std::vector<double> spacing(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) spacing[i] = evals[i + 1] - evals[i];
  std::vector<double> sorted = spacing;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<long>(n / 2) - 1,
                   sorted.end());
  const double median = sorted[n / 2 - 1];
  const double threshold = 10.0 * median;

  std::vector<std::size_t> gaps;
  for (std::size_t i = 0; i + 1 < n; ++i)
    if (spacing[i] > threshold && spacing[i] > 0.0) gaps.push_back(i);
  if (gaps.size() < static_cast<std::size_t>(n_bands - 1)) return std::nullopt;

  // Keep the widest n_bands-1 gaps as band separators.
  std::sort(gaps.begin(), gaps.end(), [&](std::size_t a, std::size_t b) {
    return spacing[a] > spacing[b];
  });
  gaps.resize(static_cast<std::size_t>(n_bands - 1));
  std::sort(gaps.begin(), gaps.end());

  MinibandSet set;
  set.label.assign(n, 0);
  std::size_t first = 0;
  for (int b = 0; b < n_bands; ++b) {
    const std::size_t last =
        b + 1 < n_bands ? gaps[static_cast<std::size_t>(b)] : n - 1;
    MinibandWindow win;
    win.name = prefix + std::to_string(b + 1);
    win.lo = b == 0 ? evals.front() : 0.5 * (evals[first - 1] + evals[first]);
    win.hi = b + 1 == n_bands ? evals.back() : 0.5 * (evals[last] + evals[last + 1]);
    win.count = static_cast<long>(last - first + 1);
    double sum = 0;
    for (std::size_t i = first; i <= last; ++i) {
      sum += evals[i];
      set.label[i] = b;
    }
    win.center = sum / static_cast<double>(win.count);
    set.windows.push_back(win);
    first = last + 1;
  }
  return set;
}

std::optional<MinibandSet> classify_sp_minibands(const std::vector<double>& evals) {
  return classify_minibands(evals, 3, "SP");
}

std::vector<double> product_rule_centers(const MinibandSet& sp_bands) {
  const double c1 = sp_bands.windows.at(0).center;
  const double c2 = sp_bands.windows.at(1).center;
  const double c3 = sp_bands.windows.at(2).center;
  // TP3 gathers both SP2+SP2 and SP1+SP3.
  return {2 * c1, c1 + c2, 0.5 * ((c2 + c2) + (c1 + c3)), c2 + c3, 2 * c3};
}

std::optional<MinibandSet> classify_tp_minibands(const std::vector<double>& evals,
                                                 const MinibandSet* sp_bands) {
  auto set = classify_minibands(evals, 5, "TP");
  if (!set || !sp_bands) return set;
  const auto predicted = product_rule_centers(*sp_bands);
  double min_spacing = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < predicted.size(); ++i)
    min_spacing = std::min(min_spacing, predicted[i + 1] - predicted[i]);
  for (std::size_t i = 0; i < predicted.size(); ++i)
    if (std::abs(set->windows[i].center - predicted[i]) > 0.5 * min_spacing)
      return std::nullopt;  // detected bands do not fit the product rule
  return set;
}

std::vector<SweepPoint> max_participation_sweep(const ModelParams& base,
                                                const std::vector<double>& u_grid,
                                                int threads) {
  base.validate();
  const PairBasis basis(base.lattice_size);
  std::vector<SweepPoint> out(u_grid.size());
  DenseLimits limits;

  parallel_for_index(u_grid.size(), threads, [&](std::size_t k) {
    ModelParams params = base;
    params.interaction = u_grid[k];
    const SparseSymMatrix h = build_tp_hamiltonian(params, basis);
    SweepPoint point{u_grid[k], 0.0, 0.0};
    auto scan_block = [&](const Eigen::VectorXd& vals, const Eigen::MatrixXd& vecs,
                          std::size_t) {
      for (Eigen::Index i = 0; i < vals.size(); ++i) {
        const double p = participation_number(
            pdf_of_state(Eigen::VectorXd(vecs.col(i)), basis));
        if (p > point.p_max) {
          point.p_max = p;
          point.energy_at_max = vals[i];
        }
      }
    };
    if (h.dim() <= limits.syevr_max) {
      const EigenSet set = diagonalize(h, limits);
      scan_block(set.values, set.vectors, 0);
    } else {
      for_each_eigenpair_block(h, 512, scan_block);
    }
    out[k] = point;
  });
  return out;
}

double localization_length_fit(const Eigen::VectorXd& pdf) {
  Eigen::Index peak = 0;
  pdf.maxCoeff(&peak);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  long count = 0;
  for (Eigen::Index j = 0; j < pdf.size(); ++j) {
    const double d = std::abs(static_cast<double>(j - peak));
    if (d <= 2.0 || pdf[j] < 1e-14) continue;
    const double y = std::log(pdf[j]);
    sx += d;
    sy += y;
    sxx += d * d;
    sxy += d * y;
    ++count;
  }
  if (count < 4) return std::numeric_limits<double>::quiet_NaN();
  const double denom = count * sxx - sx * sx;
  if (denom <= 0) return std::numeric_limits<double>::quiet_NaN();
  const double slope = (count * sxy - sx * sy) / denom;
  if (slope >= 0) return std::numeric_limits<double>::quiet_NaN();
  return -2.0 / slope;
}

double single_particle_localization_length(double lambda) {
  if (lambda <= 2.0)
    throw std::domain_error("localization length is defined for lambda > 2");
  return 1.0 / std::log(lambda / 2.0);
}

}  // namespace tipsim
