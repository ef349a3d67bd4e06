#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace deblur::metrics {

using Eigen::MatrixXd;

enum class HfenMode { Ratio, Db };

// SER = 20*log10(||ref|| / ||ref - rec||); identical inputs -> +inf
double ser(const MatrixXd& rec, const MatrixXd& ref);

// PSNR = 20*log10(max(ref) / ||ref - rec||)
double psnr(const MatrixXd& rec, const MatrixXd& ref);

// High-frequency error norm via a zero-sum 15x15 LoG kernel (sigma = 1.5).
// Ratio mode: ||LoG(ref) - LoG(rec)|| / ||LoG(ref)||; Db mode: 20*log10 of it.
double hfen(const MatrixXd& rec, const MatrixXd& ref,
            HfenMode mode = HfenMode::Ratio);

// SSIM with an 11x11 Gaussian window (sigma = 1.5), C1 = (0.01 L)^2,
// C2 = (0.03 L)^2, averaged over valid window centers.
double ssim(const MatrixXd& rec, const MatrixXd& ref, double dynamic_range);

MatrixXd log_kernel(int size, double sigma);
MatrixXd gaussian_kernel(int size, double sigma);

// valid-region ("same" size, zero padded) 2-D correlation
MatrixXd filter_same(const MatrixXd& img, const MatrixXd& kernel);

struct MetricReport {
  std::string metric;
  std::string mode;  // e.g. "ratio" / "db" / ""
  std::vector<double> per_frame;
  double mean = 0.0;
  double stddev = 0.0;
};

MetricReport aggregate(const std::string& metric, const std::string& mode,
                       std::vector<double> per_frame);

}  // namespace deblur::metrics
