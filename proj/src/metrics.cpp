#include "mdf/metrics.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <ostream>

namespace mdf {

double psnr(const Image& reference, const Image& test, double peak) {
  if (shape_of(reference) != shape_of(test))
    throw ShapeError("psnr: shapes " + to_string(shape_of(reference)) + " and " + to_string(shape_of(test)) + " differ");
  if (!(peak > 0)) throw MetricError("psnr: peak must be positive");
  if (reference.size() == 0) throw ShapeError("psnr: empty images");
  const double mse = (reference - test).square().mean();
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

Eigen::Array<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> fft2(const Image& img) {
  using Complex = std::complex<double>;
  Eigen::FFT<double> fft;
  Eigen::Array<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> out(img.rows(), img.cols());
  std::vector<double> row_in(static_cast<std::size_t>(img.cols()));
  std::vector<Complex> row_out;
  for (Eigen::Index i = 0; i < img.rows(); ++i) {
    for (Eigen::Index j = 0; j < img.cols(); ++j) row_in[static_cast<std::size_t>(j)] = img(i, j);
    fft.fwd(row_out, row_in);
    for (Eigen::Index j = 0; j < img.cols(); ++j) out(i, j) = row_out[static_cast<std::size_t>(j)];
  }
  std::vector<Complex> col_in(static_cast<std::size_t>(img.rows())), col_out;
  for (Eigen::Index j = 0; j < img.cols(); ++j) {
    for (Eigen::Index i = 0; i < img.rows(); ++i) col_in[static_cast<std::size_t>(i)] = out(i, j);
    fft.fwd(col_out, col_in);
    for (Eigen::Index i = 0; i < img.rows(); ++i) out(i, j) = col_out[static_cast<std::size_t>(i)];
  }
  return out;
}

double frc_threshold_value(FrcThreshold kind, long ring_count) {
  const double root = std::sqrt(static_cast<double>(std::max(1L, ring_count)));
  switch (kind) {
    case FrcThreshold::HalfBit: return (0.2071 + 1.9102 / root) / (1.2071 + 0.9102 / root);
    case FrcThreshold::OneBit: return (0.5 + 2.4142 / root) / (1.5 + 1.4142 / root);
    case FrcThreshold::Fixed1_7: return 1.0 / 7.0;
  }
  return 0.0;
}

FrcCurve frc(const Image& a, const Image& b, FrcThreshold kind) {
  if (shape_of(a) != shape_of(b)) throw ShapeError("frc: image shapes differ");
  if (a.rows() != a.cols()) throw ShapeError("frc: images must be square, got " + to_string(shape_of(a)));
  if (a.rows() < 4) throw ShapeError("frc: images too small");
  const Eigen::Index n = a.rows();
  const auto fa = fft2(a);
  const auto fb = fft2(b);
  const Eigen::Index rings = n / 2;
  std::vector<double> cross(static_cast<std::size_t>(rings + 1), 0.0), pa(cross), pb(cross);
  std::vector<long> count(static_cast<std::size_t>(rings + 1), 0);

  auto signed_index = [n](Eigen::Index k) { return k <= n / 2 ? k : k - n; };
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double ky = double(signed_index(i)), kx = double(signed_index(j));
      const auto ring = static_cast<Eigen::Index>(std::lround(std::sqrt(kx * kx + ky * ky)));
      if (ring < 1 || ring > rings) continue;
      const auto r = static_cast<std::size_t>(ring);
      cross[r] += (fa(i, j) * std::conj(fb(i, j))).real();
      pa[r] += std::norm(fa(i, j));
      pb[r] += std::norm(fb(i, j));
      ++count[r];
    }

  FrcCurve curve;
  curve.ring_width = 1.0 / double(n);
  for (Eigen::Index ring = 1; ring <= rings; ++ring) {
    const auto r = static_cast<std::size_t>(ring);
    const double denom = std::sqrt(pa[r] * pb[r]);
    curve.ring_frequencies.push_back(double(ring) / double(n));
    curve.correlations.push_back(denom > 0 ? cross[r] / denom : 0.0);
    curve.threshold.push_back(frc_threshold_value(kind, count[r]));
    curve.ring_counts.push_back(count[r]);
  }
  for (std::size_t k = 0; k < curve.correlations.size(); ++k) {
    const double gap = curve.correlations[k] - curve.threshold[k];
    if (gap >= 0) continue;
    if (k == 0) {
      curve.crossing_frequency = curve.ring_frequencies[0];
    } else {
      // linear interpolation of (correlation - threshold) between the bracketing rings
      const double prev = curve.correlations[k - 1] - curve.threshold[k - 1];
      const double t = prev / (prev - gap);
      curve.crossing_frequency = curve.ring_frequencies[k - 1] + t * curve.ring_width;
    }
    break;
  }
  return curve;
}

void write_frc_csv(std::ostream& out, const FrcCurve& curve) {
  out << "frequency,correlation,threshold\n";
  out.precision(17);
  for (std::size_t k = 0; k < curve.ring_frequencies.size(); ++k)
    out << curve.ring_frequencies[k] << ',' << curve.correlations[k] << ',' << curve.threshold[k] << '\n';
}

double speedup(const SpeedupInput& in) {
  auto positive = [](const PixelDims& d) { return d.height > 0 && d.width > 0; };
  if (!positive(in.lr_pixels) || !positive(in.hr_recon_pixels))
    throw MetricError("speedup: LR and reconstruction dimensions must be positive");
  if (in.hr_train_pixels.height < 0 || in.hr_train_pixels.width < 0)
    throw MetricError("speedup: training dimensions must be non-negative");
  return double(in.hr_recon_pixels.pixels()) / double(in.lr_pixels.pixels() + in.hr_train_pixels.pixels());
}

}  // namespace mdf
