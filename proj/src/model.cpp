#include "tipsim/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace tipsim {

std::string to_string(Boundary b) {
  return b == Boundary::Open ? "open" : "periodic";
}

Boundary boundary_from_string(const std::string& s) {
  if (s == "open") return Boundary::Open;
  if (s == "periodic") return Boundary::Periodic;
  throw ConfigError("unknown boundary rule '" + s + "' (expected open|periodic)");
}

double golden_mean() { return (std::sqrt(5.0) - 1.0) / 2.0; }

void ModelParams::validate() const {
  if (lattice_size < 2) throw std::invalid_argument("lattice_size must be >= 2");
  if (!(potential_strength >= 0.0))
    throw std::invalid_argument("potential_strength must be >= 0");
  if (!(incommensurability > 0.0 && incommensurability < 1.0))
    throw std::invalid_argument("incommensurability must lie in (0,1)");
  if (!(phase >= 0.0 && phase < 2.0 * std::numbers::pi))
    throw std::invalid_argument("phase must lie in [0, 2*pi)");
  if (!std::isfinite(interaction))
    throw std::invalid_argument("interaction must be finite");
}

double potential_at(const ModelParams& params, int site) {
  if (site < 0 || site >= params.lattice_size)
    throw std::out_of_range("potential_at: site out of range");
  return params.potential_strength *
         std::cos(params.phase +
                  2.0 * std::numbers::pi * params.incommensurability * site);
}

PairBasis::PairBasis(int lattice_size) : n_(lattice_size) {
  if (n_ < 1) throw std::invalid_argument("PairBasis: lattice_size must be >= 1");
  const auto n = static_cast<std::size_t>(n_);
  dim_ = n * (n + 1) / 2;
  row_offset_.resize(n + 1);
  std::size_t off = 0;
  for (std::size_t l = 0; l <= n; ++l) {
    row_offset_[l] = off;
    off += n - l;
  }
}

std::size_t PairBasis::index_of(int l, int m) const {
  if (l < 0 || m < l || m >= n_)
    throw std::out_of_range("PairBasis::index_of: require 0 <= l <= m < N");
  return row_offset_[static_cast<std::size_t>(l)] +
         static_cast<std::size_t>(m - l);
}

std::pair<int, int> PairBasis::site_pair(std::size_t index) const {
  if (index >= dim_) throw std::out_of_range("PairBasis::site_pair: index out of range");
  auto it = std::upper_bound(row_offset_.begin(), row_offset_.end(), index);
  const int l = static_cast<int>(std::distance(row_offset_.begin(), it)) - 1;
  const int m = l + static_cast<int>(index - row_offset_[static_cast<std::size_t>(l)]);
  return {l, m};
}

SparseSymMatrix::SparseSymMatrix(std::size_t dim, std::vector<Triplet> upper)
    : dim_(dim), upper_(std::move(upper)) {
  const Triplet* prev = nullptr;
  for (const auto& t : upper_) {
    if (t.row > t.col || t.col >= dim_)
      throw std::invalid_argument("SparseSymMatrix: entries must satisfy row <= col < dim");
    if (!std::isfinite(t.value))
      throw std::invalid_argument("SparseSymMatrix: non-finite entry");
    if (prev && (t.row < prev->row || (t.row == prev->row && t.col <= prev->col)))
      throw std::invalid_argument("SparseSymMatrix: triplets must be row-major sorted and unique");
    prev = &t;
  }
  build_csr();
}

void SparseSymMatrix::build_csr() {
  std::vector<std::size_t> count(dim_ + 1, 0);
  for (const auto& t : upper_) {
    ++count[t.row + 1];
    if (t.row != t.col) ++count[t.col + 1];
  }
  row_ptr_.assign(dim_ + 1, 0);
  for (std::size_t i = 0; i < dim_; ++i) row_ptr_[i + 1] = row_ptr_[i] + count[i + 1];
  col_.resize(row_ptr_[dim_]);
  val_.resize(row_ptr_[dim_]);
  std::vector<std::size_t> fill(row_ptr_.begin(), row_ptr_.end() - 1);
  // Upper triplets are row-major sorted, so rows get their in-row entries in
  // ascending column order and the mirrored entries afterwards.
  for (const auto& t : upper_) {
    col_[fill[t.row]] = static_cast<int>(t.col);
    val_[fill[t.row]++] = t.value;
  }
  for (const auto& t : upper_) {
    if (t.row == t.col) continue;
    col_[fill[t.col]] = static_cast<int>(t.row);
    val_[fill[t.col]++] = t.value;
  }
}

std::size_t SparseSymMatrix::max_row_nonzeros() const {
  std::size_t best = 0;
  for (std::size_t i = 0; i < dim_; ++i)
    best = std::max(best, row_ptr_[i + 1] - row_ptr_[i]);
  return best;
}

std::pair<double, double> SparseSymMatrix::gershgorin_bounds() const {
  std::vector<double> center(dim_, 0.0), radius(dim_, 0.0);
  for (const auto& t : upper_) {
    if (t.row == t.col) {
      center[t.row] = t.value;
    } else {
      radius[t.row] += std::abs(t.value);
      radius[t.col] += std::abs(t.value);
    }
  }
  double lo = center[0] - radius[0], hi = center[0] + radius[0];
  for (std::size_t i = 1; i < dim_; ++i) {
    lo = std::min(lo, center[i] - radius[i]);
    hi = std::max(hi, center[i] + radius[i]);
  }
  return {lo, hi};
}

double SparseSymMatrix::norm_bound() const {
  auto [lo, hi] = gershgorin_bounds();
  return std::max(std::abs(lo), std::abs(hi));
}

std::size_t SparseSymMatrix::bandwidth() const {
  std::size_t b = 0;
  for (const auto& t : upper_) b = std::max(b, t.col - t.row);
  return b;
}

Eigen::MatrixXd SparseSymMatrix::to_dense() const {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim_),
                                            static_cast<Eigen::Index>(dim_));
  for (const auto& t : upper_) {
    a(static_cast<Eigen::Index>(t.row), static_cast<Eigen::Index>(t.col)) = t.value;
    a(static_cast<Eigen::Index>(t.col), static_cast<Eigen::Index>(t.row)) = t.value;
  }
  return a;
}

Eigen::SparseMatrix<double> SparseSymMatrix::to_sparse() const {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(2 * upper_.size());
  for (const auto& t : upper_) {
    trips.emplace_back(static_cast<int>(t.row), static_cast<int>(t.col), t.value);
    if (t.row != t.col)
      trips.emplace_back(static_cast<int>(t.col), static_cast<int>(t.row), t.value);
  }
  Eigen::SparseMatrix<double> s(static_cast<Eigen::Index>(dim_),
                                static_cast<Eigen::Index>(dim_));
  s.setFromTriplets(trips.begin(), trips.end());
  s.makeCompressed();
  return s;
}

void SparseSymMatrix::apply(const double* x, double* y) const {
  for (std::size_t i = 0; i < dim_; ++i) {
    double acc = 0.0;
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
      acc += val_[k] * x[col_[k]];
    y[i] = acc;
  }
}

void SparseSymMatrix::apply(const std::complex<double>* x,
                            std::complex<double>* y) const {
  for (std::size_t i = 0; i < dim_; ++i) {
    std::complex<double> acc = 0.0;
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
      acc += val_[k] * x[col_[k]];
    y[i] = acc;
  }
}

Eigen::VectorXd SparseSymMatrix::apply(const Eigen::VectorXd& x) const {
  Eigen::VectorXd y(x.size());
  apply(x.data(), y.data());
  return y;
}

Eigen::VectorXcd SparseSymMatrix::apply(const Eigen::VectorXcd& x) const {
  Eigen::VectorXcd y(x.size());
  apply(x.data(), y.data());
  return y;
}

void SparseSymMatrix::apply_scaled_recurrence(const std::complex<double>* x,
                                              const std::complex<double>* z,
                                              std::complex<double>* y,
                                              double center,
                                              double halfwidth) const {
  const double s = 2.0 / halfwidth;
  const double c = 2.0 * center / halfwidth;
  for (std::size_t i = 0; i < dim_; ++i) {
    std::complex<double> acc = 0.0;
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
      acc += val_[k] * x[col_[k]];
    y[i] = s * acc - c * x[i] - z[i];
  }
}

SparseSymMatrix build_sp_hamiltonian(const ModelParams& params) {
  params.validate();
  const int n = params.lattice_size;
  std::vector<Triplet> trips;
  trips.reserve(static_cast<std::size_t>(2 * n));
  for (int j = 0; j < n; ++j) {
    const auto row = static_cast<std::size_t>(j);
    trips.push_back({row, row, potential_at(params, j)});
    if (j + 1 < n) trips.push_back({row, row + 1, 1.0});
    // Corner element closes the ring; for n == 2 the neighbour bond already
    // connects the two sites.
    if (params.boundary == Boundary::Periodic && j == 0 && n > 2)
      trips.push_back({0, static_cast<std::size_t>(n - 1), 1.0});
  }
  std::sort(trips.begin(), trips.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  return SparseSymMatrix(static_cast<std::size_t>(n), std::move(trips));
}

SparseSymMatrix build_tp_hamiltonian(const ModelParams& params,
                                     const PairBasis& basis) {
  params.validate();
  if (basis.lattice_size() != params.lattice_size)
    throw ConfigError("build_tp_hamiltonian: basis size does not match params");
  const int n = params.lattice_size;
  const bool periodic = params.boundary == Boundary::Periodic;

  std::vector<double> eps(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) eps[static_cast<std::size_t>(j)] = potential_at(params, j);

  const double sqrt2 = std::sqrt(2.0);
  std::vector<Triplet> trips;
  trips.reserve(basis.dimension() * 3);

  // One boson hops from site a to site b; the other sits at site c. The
  // amplitude picks up sqrt(2) whenever source or target is doubly occupied.
  auto hop_target = [&](int b, int c) {
    return b <= c ? std::make_pair(b, c) : std::make_pair(c, b);
  };

  for (std::size_t idx = 0; idx < basis.dimension(); ++idx) {
    const auto [l, m] = basis.site_pair(idx);
    const double diag =
        eps[static_cast<std::size_t>(l)] + eps[static_cast<std::size_t>(m)] +
        (l == m ? params.interaction : 0.0);
    trips.push_back({idx, idx, diag});

    auto add_hop = [&](int from, int other, int to) {
      if (to < 0 || to >= n) {
        if (!periodic || n <= 2) return;
        to = (to + n) % n;
      }
      const auto [a, b] = hop_target(to, other);
      const std::size_t jdx = basis.index_of(a, b);
      if (jdx <= idx) return;  // upper triangle only; mirror is implied
      double amp = 1.0;
      if (from == other) amp *= sqrt2;  // leaving a doubly occupied site
      if (a == b) amp *= sqrt2;         // landing on a doubly occupied site
      trips.push_back({idx, jdx, amp});
    };

    if (l == m) {
      add_hop(l, l, l - 1);
      add_hop(l, l, l + 1);
    } else {
      add_hop(l, m, l - 1);
      add_hop(l, m, l + 1);
      add_hop(m, l, m - 1);
      add_hop(m, l, m + 1);
    }
  }

  std::sort(trips.begin(), trips.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  return SparseSymMatrix(basis.dimension(), std::move(trips));
}

}  // namespace tipsim
