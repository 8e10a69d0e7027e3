#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <ostream>
#include <stdexcept>
#include <vector>

namespace downscale {

// Symmetric sparse matrix stored as its lower triangle (column-major,
// compressed, sorted row indices). Precision matrices, FEM matrices and
// projector-style blocks all flow through Eigen; this wrapper pins the
// canonical storage contract used for export and equality checks.
class SparseSymmetricMatrix {
 public:
  SparseSymmetricMatrix() = default;

  // Accepts either a full symmetric matrix or a lower-triangular one.
  explicit SparseSymmetricMatrix(const Eigen::SparseMatrix<double>& m) {
    if (m.rows() != m.cols())
      throw std::invalid_argument("SparseSymmetricMatrix: matrix not square");
    lower_ = m.triangularView<Eigen::Lower>();
    lower_.prune(0.0);
    lower_.makeCompressed();
  }

  static SparseSymmetricMatrix fromTriplets(
      Eigen::Index n, const std::vector<Eigen::Triplet<double>>& trips) {
    Eigen::SparseMatrix<double> m(n, n);
    m.setFromTriplets(trips.begin(), trips.end());
    return SparseSymmetricMatrix(m);
  }

  Eigen::Index dim() const { return lower_.rows(); }
  Eigen::Index nonZerosLower() const { return lower_.nonZeros(); }

  const Eigen::SparseMatrix<double>& lower() const { return lower_; }

  // Full symmetric expansion.
  Eigen::SparseMatrix<double> full() const {
    Eigen::SparseMatrix<double> f =
        lower_.selfadjointView<Eigen::Lower>();
    f.makeCompressed();
    return f;
  }

  Eigen::MatrixXd dense() const { return Eigen::MatrixXd(full()); }

  double coeff(Eigen::Index i, Eigen::Index j) const {
    return i >= j ? lower_.coeff(i, j) : lower_.coeff(j, i);
  }

  SparseSymmetricMatrix scaled(double c) const {
    SparseSymmetricMatrix out;
    out.lower_ = c * lower_;
    out.lower_.makeCompressed();
    return out;
  }

  // MatrixMarket-style coordinate export, 1-based, lower triangle only.
  void writeMatrixMarket(std::ostream& os) const;

 private:
  Eigen::SparseMatrix<double> lower_;
};

// Kronecker product A (x) B for symmetric sparse inputs; block ordering is
// A-major, i.e. output index = a_index * dim(B) + b_index.
SparseSymmetricMatrix kronecker(const SparseSymmetricMatrix& a,
                                const SparseSymmetricMatrix& b);

}  // namespace downscale
