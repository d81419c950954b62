#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tipsim/model.hpp"

namespace tipsim {

/// Eigenvalues (ascending) with orthonormal eigenvectors as columns.
struct EigenSet {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;

  Eigen::Index size() const { return values.size(); }
};

/// Dense-path dimension limits, tuned for a modest-memory machine. The
/// selection depends only on the dimension so repeated runs take the same
/// code path.
struct DenseLimits {
  std::size_t eigen_max = 2000;    // Eigen::SelfAdjointEigenSolver
  std::size_t syevr_max = 12000;   // LAPACK dsyevr, two dense matrices
  std::size_t stream_max = 22000;  // dsytrd + blockwise dstemr/dormtr
};

/// All eigenpairs, ascending. Throws NumericsError when the dimension
/// exceeds the dense limits; use diagonalize_window or streaming instead.
EigenSet diagonalize(const SparseSymMatrix& h, const DenseLimits& limits = {});

struct WindowOptions {
  int max_states = 400;     // refuse windows denser than this
  int max_iterations = 0;   // 0: 4*expected + 120
  int max_restarts = 4;
  double residual_tol = 0;  // 0: 1e-8 * ||H|| (Gershgorin bound)
  std::uint64_t seed = 0x6b43a9b1u;
};

/// All eigenpairs with eigenvalue in [lo, hi] via shift-invert Lanczos.
/// Completeness is established against the LDL^T inertia count and every
/// returned pair passes an explicit residual check.
EigenSet diagonalize_window(const SparseSymMatrix& h, double lo, double hi,
                            const WindowOptions& opts = {});

/// Number of eigenvalues strictly below e (Sylvester inertia of H - e*I).
long eigenvalue_count_below(const SparseSymMatrix& h, double e);

/// Full eigenvalue spectrum without eigenvectors, via band reduction.
/// Memory scales with dim * bandwidth, so this reaches far beyond the
/// dense-path limits.
std::vector<double> all_eigenvalues(const SparseSymMatrix& h);

/// Streams eigenpairs in ascending blocks of at most block_size states:
/// tridiagonalize once, then compute/back-transform eigenvector blocks.
/// Visit receives (values, vectors, index of first state).
void for_each_eigenpair_block(
    const SparseSymMatrix& h, int block_size,
    const std::function<void(const Eigen::VectorXd&, const Eigen::MatrixXd&,
                             std::size_t)>& visit);

/// Largest deviation from orthonormality and the largest relative residual
/// ||Hv - Ev|| / ||H||; used by tests and the window solver.
struct EigenSetCheck {
  double orthonormality = 0;
  double relative_residual = 0;
};
EigenSetCheck verify_eigenset(const SparseSymMatrix& h, const EigenSet& set);

/// Per-site probability density of a normalized two-boson state:
/// p_l = (sum_{k>=l} L_{l,k}^2 + sum_{m<=l} L_{m,l}^2) / 2.
Eigen::VectorXd pdf_of_state(const Eigen::VectorXd& v, const PairBasis& basis);
Eigen::VectorXd pdf_of_state(const Eigen::VectorXcd& v, const PairBasis& basis);

/// Single-particle PDF, |amplitude|^2 per site.
Eigen::VectorXd sp_pdf_of_state(const Eigen::VectorXd& v);

/// Inverse summed squared PDF, 1 / sum_l p_l^2. Counts occupied sites:
/// 1 for a delta distribution, N for a uniform one.
double participation_number(const Eigen::VectorXd& pdf);

struct MinibandWindow {
  std::string name;
  double lo = 0, hi = 0;  // window edges (gap midpoints at the interior)
  double center = 0;      // mean energy of member states
  long count = 0;
};

struct MinibandSet {
  std::vector<MinibandWindow> windows;  // ascending in energy
  std::vector<int> label;               // per state, index into windows

  int window_of(double energy) const;  // -1 if outside every window
};

/// Clusters an ascending spectrum into n_bands gap-separated minibands.
/// Gaps must exceed 10x the median level spacing; when more qualify, the
/// n_bands-1 widest are kept. Returns nullopt when the spectrum does not
/// split (e.g. lambda <= 2).
std::optional<MinibandSet> classify_minibands(const std::vector<double>& evals,
                                              int n_bands,
                                              const std::string& prefix);

/// Three single-particle minibands SP1..SP3.
std::optional<MinibandSet> classify_sp_minibands(const std::vector<double>& evals);

/// Five two-particle minibands TP1..TP5. When the single-particle bands are
/// supplied, the detected centers are validated against the product-rule
/// sums (TP1 = SP1+SP1, ...).
std::optional<MinibandSet> classify_tp_minibands(
    const std::vector<double>& evals, const MinibandSet* sp_bands = nullptr);

/// Expected two-particle band centers from the product rule, ascending.
std::vector<double> product_rule_centers(const MinibandSet& sp_bands);

struct SweepPoint {
  double u = 0;
  double p_max = 0;
  double energy_at_max = 0;
};

/// Largest participation number over all eigenstates, for each interaction
/// value in u_grid. Deterministic for fixed parameters.
std::vector<SweepPoint> max_participation_sweep(const ModelParams& base,
                                                const std::vector<double>& u_grid,
                                                int threads = 1);

/// Exponential decay length fitted to a PDF: linear regression of log p
/// against distance from the peak, skipping the 5 sites nearest the peak
/// and any p below 1e-14. Returns NaN when fewer than 4 points remain.
double localization_length_fit(const Eigen::VectorXd& pdf);

/// 1 / ln(lambda/2), defined for lambda > 2.
double single_particle_localization_length(double lambda);

}  // namespace tipsim
