#pragma once

#include "deblur/fourier.hpp"

#include <vector>

namespace deblur {

// Bilinear factors of the Casorati matrix X = U * V^T.
// U columns are complex spatial basis images (flattened, p = x*H + y),
// V columns are their real time courses.
struct FactorPair {
  MatrixXcd U;  // N_pix x r
  MatrixXd V;   // n_f x r

  int rank() const { return static_cast<int>(U.cols()); }
  int n_frames() const { return static_cast<int>(V.rows()); }

  MatrixXcd frame(int i, int H, int W) const {
    VectorXcd x = U * V.row(i).transpose();
    return Eigen::Map<const MatrixXcd>(x.data(), H, W);
  }
};

// Mean SER (dB) of the factor synthesis against a reference series of
// magnitude frames; convenience used by traces and reports.
double series_ser_db(const FactorPair& fp,
                     const std::vector<MatrixXcd>& reference, int H, int W);

}  // namespace deblur
