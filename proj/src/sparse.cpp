#include "downscale/sparse.hpp"

#include <iomanip>

namespace downscale {

void SparseSymmetricMatrix::writeMatrixMarket(std::ostream& os) const {
  os << "%%MatrixMarket matrix coordinate real symmetric\n";
  os << lower_.rows() << " " << lower_.cols() << " " << lower_.nonZeros()
     << "\n";
  os << std::setprecision(17);
  for (int k = 0; k < lower_.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(lower_, k); it; ++it)
      os << it.row() + 1 << " " << it.col() + 1 << " " << it.value() << "\n";
}

SparseSymmetricMatrix kronecker(const SparseSymmetricMatrix& a,
                                const SparseSymmetricMatrix& b) {
  const Eigen::SparseMatrix<double> af = a.full();
  const Eigen::SparseMatrix<double> bf = b.full();
  const Eigen::Index nb = bf.rows();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<size_t>(af.nonZeros()) *
                static_cast<size_t>(bf.nonZeros()));
  for (int ka = 0; ka < af.outerSize(); ++ka)
    for (Eigen::SparseMatrix<double>::InnerIterator ia(af, ka); ia; ++ia)
      for (int kb = 0; kb < bf.outerSize(); ++kb)
        for (Eigen::SparseMatrix<double>::InnerIterator ib(bf, kb); ib; ++ib)
          trips.emplace_back(ia.row() * nb + ib.row(),
                             ia.col() * nb + ib.col(),
                             ia.value() * ib.value());
  return SparseSymmetricMatrix::fromTriplets(af.rows() * nb, trips);
}

}  // namespace downscale
