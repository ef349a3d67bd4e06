#include "deblur/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace deblur::metrics {

namespace {

void check_shapes(const MatrixXd& a, const MatrixXd& b, const char* who) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(who) + ": shape mismatch");
}

}  // namespace

double ser(const MatrixXd& rec, const MatrixXd& ref) {
  check_shapes(rec, ref, "ser");
  const double nref = ref.norm();
  if (nref == 0.0) throw std::invalid_argument("ser: zero reference norm");
  const double nerr = (ref - rec).norm();
  if (nerr == 0.0) return std::numeric_limits<double>::infinity();
  return 20.0 * std::log10(nref / nerr);
}

double psnr(const MatrixXd& rec, const MatrixXd& ref) {
  check_shapes(rec, ref, "psnr");
  const double peak = ref.maxCoeff();
  if (ref.norm() == 0.0) throw std::invalid_argument("psnr: zero reference");
  const double nerr = (ref - rec).norm();
  if (nerr == 0.0) return std::numeric_limits<double>::infinity();
  return 20.0 * std::log10(peak / nerr);
}

MatrixXd gaussian_kernel(int size, double sigma) {
  MatrixXd k(size, size);
  const int half = size / 2;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double dy = y - half, dx = x - half;
      k(y, x) = std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma));
    }
  return k / k.sum();
}

MatrixXd log_kernel(int size, double sigma) {
  MatrixXd k(size, size);
  const int half = size / 2;
  const double s2 = sigma * sigma;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double dy = y - half, dx = x - half;
      const double r2 = dy * dy + dx * dx;
      k(y, x) = (r2 - 2.0 * s2) / (s2 * s2) * std::exp(-r2 / (2.0 * s2));
    }
  // normalize to zero sum so constants are annihilated
  k.array() -= k.mean();
  return k;
}

MatrixXd filter_same(const MatrixXd& img, const MatrixXd& kernel) {
  const int H = static_cast<int>(img.rows()), W = static_cast<int>(img.cols());
  const int kh = static_cast<int>(kernel.rows()), kw = static_cast<int>(kernel.cols());
  const int hy = kh / 2, hx = kw / 2;
  MatrixXd out = MatrixXd::Zero(H, W);
  for (int x = 0; x < W; ++x)
    for (int y = 0; y < H; ++y) {
      double acc = 0.0;
      const int dy0 = std::max(0, hy - y), dy1 = std::min(kh, H + hy - y);
      const int dx0 = std::max(0, hx - x), dx1 = std::min(kw, W + hx - x);
      for (int dx = dx0; dx < dx1; ++dx)
        for (int dy = dy0; dy < dy1; ++dy)
          acc += kernel(dy, dx) * img(y + dy - hy, x + dx - hx);
      out(y, x) = acc;
    }
  return out;
}

double hfen(const MatrixXd& rec, const MatrixXd& ref, HfenMode mode) {
  check_shapes(rec, ref, "hfen");
  if (ref.rows() < 15 || ref.cols() < 15)
    throw std::invalid_argument("hfen: images must be at least 15x15");
  static const MatrixXd kernel = log_kernel(15, 1.5);
  const MatrixXd fr = filter_same(ref, kernel);
  const double nref = fr.norm();
  if (nref == 0.0) throw std::invalid_argument("hfen: ||LoG(ref)|| is zero");
  const double ratio = (fr - filter_same(rec, kernel)).norm() / nref;
  if (mode == HfenMode::Ratio) return ratio;
  if (ratio == 0.0) return -std::numeric_limits<double>::infinity();
  return 20.0 * std::log10(ratio);
}

double ssim(const MatrixXd& rec, const MatrixXd& ref, double dynamic_range) {
  check_shapes(rec, ref, "ssim");
  if (dynamic_range <= 0.0)
    throw std::invalid_argument("ssim: degenerate dynamic range");
  const int win = 11;
  static const MatrixXd w = gaussian_kernel(win, 1.5);
  const int H = static_cast<int>(ref.rows()), W = static_cast<int>(ref.cols());
  if (H < win || W < win)
    throw std::invalid_argument("ssim: images smaller than the window");
  const double c1 = (0.01 * dynamic_range) * (0.01 * dynamic_range);
  const double c2 = (0.03 * dynamic_range) * (0.03 * dynamic_range);

  double acc = 0.0;
  long count = 0;
  for (int x0 = 0; x0 + win <= W; ++x0)
    for (int y0 = 0; y0 + win <= H; ++y0) {
      const auto a = ref.block(y0, x0, win, win).array();
      const auto b = rec.block(y0, x0, win, win).array();
      const double mu_a = (w.array() * a).sum();
      const double mu_b = (w.array() * b).sum();
      const double var_a = (w.array() * a * a).sum() - mu_a * mu_a;
      const double var_b = (w.array() * b * b).sum() - mu_b * mu_b;
      const double cov = (w.array() * a * b).sum() - mu_a * mu_b;
      acc += ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
             ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
      ++count;
    }
  return acc / count;
}

MetricReport aggregate(const std::string& metric, const std::string& mode,
                       std::vector<double> per_frame) {
  MetricReport rep;
  rep.metric = metric;
  rep.mode = mode;
  rep.per_frame = std::move(per_frame);
  const auto n = static_cast<double>(rep.per_frame.size());
  if (n == 0) return rep;
  double s = 0.0;
  for (double v : rep.per_frame) s += v;
  rep.mean = s / n;
  double sq = 0.0;
  for (double v : rep.per_frame) sq += (v - rep.mean) * (v - rep.mean);
  rep.stddev = std::sqrt(sq / n);
  return rep;
}

}  // namespace deblur::metrics
