#include "deblur/factors.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace deblur {

double series_ser_db(const FactorPair& fp,
                     const std::vector<MatrixXcd>& reference, int H, int W) {
  if (static_cast<int>(reference.size()) != fp.n_frames())
    throw std::invalid_argument("series_ser_db: frame count mismatch");
  double ref2 = 0.0, err2 = 0.0;
  for (int i = 0; i < fp.n_frames(); ++i) {
    const MatrixXd refm = reference[i].cwiseAbs();
    const MatrixXd recm = fp.frame(i, H, W).cwiseAbs();
    ref2 += refm.squaredNorm();
    err2 += (refm - recm).squaredNorm();
  }
  if (ref2 == 0.0) throw std::invalid_argument("series_ser_db: zero reference");
  if (err2 == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(ref2 / err2);
}

}  // namespace deblur
