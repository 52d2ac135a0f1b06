#include "mdf/agents.hpp"

#include "parallel.hpp"

#include <cmath>
#include <vector>

namespace mdf {

namespace {

// Half-sample symmetric reflection: ... b a | a b c ... c | c b ...
// Any symmetric filter applied with this extension preserves the image mean.
Eigen::Index reflect(Eigen::Index i, Eigen::Index n) {
  const Eigen::Index period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

Eigen::Index clamp_index(Eigen::Index i, Eigen::Index n) { return i < 0 ? 0 : (i >= n ? n - 1 : i); }

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma)));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (int t = -radius; t <= radius; ++t) {
    const double v = std::exp(-0.5 * t * t / (sigma * sigma));
    k[static_cast<std::size_t>(t + radius)] = v;
    total += v;
  }
  for (auto& v : k) v /= total;
  return k;
}

}  // namespace

Image gaussian_denoise(const Image& x, double sigma_blur) {
  if (!(sigma_blur > 0)) throw ConfigError("gaussian_denoise: sigma_blur must be positive");
  const auto kernel = gaussian_kernel(sigma_blur);
  const auto radius = static_cast<Eigen::Index>(kernel.size() / 2);
  const Eigen::Index h = x.rows(), w = x.cols();

  Image tmp(h, w);
  for (Eigen::Index i = 0; i < h; ++i)
    for (Eigen::Index j = 0; j < w; ++j) {
      double acc = 0.0;
      for (Eigen::Index t = -radius; t <= radius; ++t)
        acc += kernel[static_cast<std::size_t>(t + radius)] * x(i, reflect(j + t, w));
      tmp(i, j) = acc;
    }
  Image out(h, w);
  for (Eigen::Index i = 0; i < h; ++i)
    for (Eigen::Index j = 0; j < w; ++j) {
      double acc = 0.0;
      for (Eigen::Index t = -radius; t <= radius; ++t)
        acc += kernel[static_cast<std::size_t>(t + radius)] * tmp(reflect(i + t, h), j);
      out(i, j) = acc;
    }
  return out;
}

Image nlm_denoise(const Image& x, const NlmParams& p) {
  if (p.patch_radius < 1 || p.search_radius < 1) throw ConfigError("nlm_denoise: radii must be >= 1");
  if (!(p.bandwidth_h > 0)) throw ConfigError("nlm_denoise: bandwidth must be positive");
  const Eigen::Index h = x.rows(), w = x.cols();
  const Eigen::Index pr = p.patch_radius, sr = p.search_radius;
  if (2 * pr + 1 > h || 2 * pr + 1 > w)
    throw ShapeError("nlm_denoise: image " + to_string(shape_of(x)) + " smaller than patch window");
  const double inv_h2 = 1.0 / (p.bandwidth_h * p.bandwidth_h);

  // Patches read edge-replicated pixels; the search window is cut at the image border.
  Image padded(h + 2 * pr, w + 2 * pr);
  for (Eigen::Index i = 0; i < padded.rows(); ++i)
    for (Eigen::Index j = 0; j < padded.cols(); ++j) padded(i, j) = x(clamp_index(i - pr, h), clamp_index(j - pr, w));

  Image out(h, w);
  detail::parallel_for(h, [&](std::ptrdiff_t i) {
    for (Eigen::Index j = 0; j < w; ++j) {
      const auto ref = padded.block(i, j, 2 * pr + 1, 2 * pr + 1);
      double wsum = 0.0, acc = 0.0;
      for (Eigen::Index qi = std::max<Eigen::Index>(0, i - sr); qi <= std::min(h - 1, i + sr); ++qi)
        for (Eigen::Index qj = std::max<Eigen::Index>(0, j - sr); qj <= std::min(w - 1, j + sr); ++qj) {
          const double d2 = (ref - padded.block(qi, qj, 2 * pr + 1, 2 * pr + 1)).square().sum();
          const double wt = std::exp(-d2 * inv_h2);
          wsum += wt;
          acc += wt * x(qi, qj);
        }
      out(i, j) = acc / wsum;  // self weight is 1, so wsum >= 1
    }
  });
  return out;
}

namespace {

// Forward differences with a zero last difference (Neumann boundary).
void gradient(const Image& u, Image& gx, Image& gy) {
  const Eigen::Index h = u.rows(), w = u.cols();
  gx.setZero(h, w);
  gy.setZero(h, w);
  if (w > 1) gx.leftCols(w - 1) = u.rightCols(w - 1) - u.leftCols(w - 1);
  if (h > 1) gy.topRows(h - 1) = u.bottomRows(h - 1) - u.topRows(h - 1);
}

// Negative adjoint of gradient().
Image divergence(const Image& px, const Image& py) {
  const Eigen::Index h = px.rows(), w = px.cols();
  Image d = Image::Zero(h, w);
  if (w > 1) {
    d.leftCols(w - 1) += px.leftCols(w - 1);
    d.rightCols(w - 1) -= px.leftCols(w - 1);
  }
  if (h > 1) {
    d.topRows(h - 1) += py.topRows(h - 1);
    d.bottomRows(h - 1) -= py.topRows(h - 1);
  }
  return d;
}

}  // namespace

double total_variation(const Image& x) {
  Image gx, gy;
  gradient(x, gx, gy);
  return (gx.square() + gy.square()).sqrt().sum();
}

Image tv_denoise(const Image& x, double weight, int inner_iters) {
  if (!(weight > 0)) throw ConfigError("tv_denoise: weight must be positive");
  if (inner_iters < 1) throw ConfigError("tv_denoise: inner_iters must be >= 1");
  const Eigen::Index h = x.rows(), w = x.cols();

  // Fast gradient projection on the dual: u = x + weight * div(p), |p_ij| <= 1,
  // step 1 / (8 weight) since |div|^2 <= 8.
  Image px = Image::Zero(h, w), py = Image::Zero(h, w);
  Image rx = px, ry = py;
  Image gx, gy;
  double t = 1.0;
  const double step = 1.0 / (8.0 * weight);
  for (int k = 0; k < inner_iters; ++k) {
    const Image u = x + weight * divergence(rx, ry);
    gradient(u, gx, gy);
    Image nx = rx + step * gx;
    Image ny = ry + step * gy;
    const Image norm = (nx.square() + ny.square()).sqrt().max(1.0);
    nx /= norm;
    ny /= norm;
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double beta = (t - 1.0) / t_next;
    rx = nx + beta * (nx - px);
    ry = ny + beta * (ny - py);
    px = std::move(nx);
    py = std::move(ny);
    t = t_next;
  }
  return x + weight * divergence(px, py);
}

}  // namespace mdf
