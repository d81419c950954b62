#pragma once

#include <complex>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "tipsim/errors.hpp"

namespace tipsim {

enum class Boundary { Open, Periodic };

std::string to_string(Boundary b);
Boundary boundary_from_string(const std::string& s);

/// (sqrt(5)-1)/2, the incommensurability used throughout.
double golden_mean();

/// Physical and numerical parameters of the two-boson quasiperiodic chain.
/// Hopping amplitude is 1 and hbar is 1; lambda, U and times are read in
/// these units.
struct ModelParams {
  int lattice_size = 0;                        // N
  double potential_strength = 0.0;             // lambda
  double interaction = 0.0;                    // U
  double phase = 0.0;                          // beta
  double incommensurability = golden_mean();   // alpha
  Boundary boundary = Boundary::Open;

  /// Throws std::invalid_argument unless N >= 2, lambda >= 0,
  /// alpha in (0,1) and beta in [0, 2*pi).
  void validate() const;
};

/// Onsite energy lambda*cos(beta + 2*pi*alpha*j). Sites are 0-based.
double potential_at(const ModelParams& params, int site);

/// Bijection between ordered site pairs (l, m), l <= m, and the basis
/// indices 0..N(N+1)/2-1, laid out row-major in l.
class PairBasis {
 public:
  explicit PairBasis(int lattice_size);

  int lattice_size() const { return n_; }
  std::size_t dimension() const { return dim_; }

  std::size_t index_of(int l, int m) const;
  std::pair<int, int> site_pair(std::size_t index) const;

 private:
  int n_ = 0;
  std::size_t dim_ = 0;
  std::vector<std::size_t> row_offset_;  // index of (l, l) for each l
};

struct Triplet {
  std::size_t row = 0;
  std::size_t col = 0;  // row <= col
  double value = 0.0;
};

/// Real symmetric sparse matrix stored as its upper triangle, with a
/// full-pattern CSR copy for fast matrix-vector products.
class SparseSymMatrix {
 public:
  /// Triplets must be row-major sorted, unique, with row <= col < dim and
  /// finite values.
  SparseSymMatrix(std::size_t dim, std::vector<Triplet> upper);

  std::size_t dim() const { return dim_; }
  const std::vector<Triplet>& upper() const { return upper_; }
  std::size_t max_row_nonzeros() const;

  /// Inclusive bounds on the spectrum from Gershgorin discs.
  std::pair<double, double> gershgorin_bounds() const;
  /// Cheap operator-norm bound: max(|lo|, |hi|) of the Gershgorin interval.
  double norm_bound() const;

  /// Largest |col - row| over stored entries.
  std::size_t bandwidth() const;

  Eigen::MatrixXd to_dense() const;
  Eigen::SparseMatrix<double> to_sparse() const;  // full pattern

  void apply(const double* x, double* y) const;
  void apply(const std::complex<double>* x, std::complex<double>* y) const;
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
  Eigen::VectorXcd apply(const Eigen::VectorXcd& x) const;

  /// y = 2*((A - center)/halfwidth)*x - z, the Chebyshev recurrence step on
  /// the spectrum rescaled to [-1, 1].
  void apply_scaled_recurrence(const std::complex<double>* x,
                               const std::complex<double>* z,
                               std::complex<double>* y, double center,
                               double halfwidth) const;

 private:
  std::size_t dim_ = 0;
  std::vector<Triplet> upper_;
  // full-pattern CSR
  std::vector<std::size_t> row_ptr_;
  std::vector<int> col_;
  std::vector<double> val_;

  void build_csr();
};

/// Single-particle Hamiltonian: tridiagonal with unit hopping and the
/// quasiperiodic potential on the diagonal (corner elements iff periodic).
SparseSymMatrix build_sp_hamiltonian(const ModelParams& params);

/// Two-boson Hamiltonian in the ordered pair basis. Diagonal carries
/// eps_l + eps_m + U*delta_lm; hopping is 1 between distinct ordered pairs
/// and sqrt(2) between a doubly occupied site and its neighbours.
SparseSymMatrix build_tp_hamiltonian(const ModelParams& params,
                                     const PairBasis& basis);

}  // namespace tipsim
