#pragma once

// Image quality and acquisition metrics: PSNR, Fourier ring correlation, speed-up.

#include "mdf/core.hpp"

#include <complex>
#include <iosfwd>
#include <limits>
#include <optional>
#include <vector>

namespace mdf {

// 10 log10(peak^2 / MSE); +infinity when the images are identical.
double psnr(const Image& reference, const Image& test, double peak = 1.0);

enum class FrcThreshold { HalfBit, OneBit, Fixed1_7 };

struct FrcCurve {
  std::vector<double> ring_frequencies;  // cycles per pixel, in (0, 0.5]
  std::vector<double> correlations;
  std::vector<double> threshold;
  std::vector<long> ring_counts;         // Fourier bins per ring
  std::optional<double> crossing_frequency;  // cycles per pixel; empty if never below threshold
  double ring_width = 0.0;               // cycles per pixel

  // Crossing expressed as a fraction of the Nyquist frequency (0.5 cycles/pixel).
  std::optional<double> crossing_nyquist_fraction() const {
    if (!crossing_frequency) return std::nullopt;
    return *crossing_frequency / 0.5;
  }
};

// Rings are integer radii in frequency bins (rounded), DC excluded, out to N/2.
FrcCurve frc(const Image& a, const Image& b, FrcThreshold kind = FrcThreshold::HalfBit);

double frc_threshold_value(FrcThreshold kind, long ring_count);

// columns: frequency, correlation, threshold
void write_frc_csv(std::ostream& out, const FrcCurve& curve);

// 2-D DFT of a real image, row-major, size h x w.
Eigen::Array<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> fft2(const Image& img);

struct PixelDims {
  long height = 0;
  long width = 0;
  long pixels() const { return height * width; }
};

struct SpeedupInput {
  PixelDims lr_pixels;
  PixelDims hr_train_pixels;
  PixelDims hr_recon_pixels;
};

// HR reconstruction pixels / (acquired LR pixels + HR training pixels).
double speedup(const SpeedupInput& in);

}  // namespace mdf
