#include "mdf/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <set>

namespace mdf {

PhantomKind parse_phantom_kind(const std::string& name) {
  if (name == "rods") return PhantomKind::Rods;
  if (name == "crystals") return PhantomKind::Crystals;
  if (name == "texture") return PhantomKind::Texture;
  throw ConfigError("unknown phantom kind '" + name + "' (expected rods, crystals or texture)");
}

std::string to_string(PhantomKind k) {
  switch (k) {
    case PhantomKind::Rods: return "rods";
    case PhantomKind::Crystals: return "crystals";
    case PhantomKind::Texture: return "texture";
  }
  return "?";
}

namespace {

double segment_distance(double px, double py, double ax, double ay, double bx, double by) {
  const double dx = bx - ax, dy = by - ay;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((px - ax) * dx + (py - ay) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(px - (ax + t * dx), py - (ay + t * dy));
}

Image rods(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double background = 0.1;
  Image img = Image::Constant(n, n, background);
  const int count = std::max(4, n * n / 600);
  for (int r = 0; r < count; ++r) {
    const double cx = unit(rng) * n, cy = unit(rng) * n;
    const double angle = unit(rng) * std::numbers::pi;
    const double half_len = (0.05 + 0.12 * unit(rng)) * n;
    const double half_width = 0.8 + 1.7 * unit(rng);
    const double level = 0.55 + 0.4 * unit(rng);
    const double ax = cx - half_len * std::cos(angle), ay = cy - half_len * std::sin(angle);
    const double bx = cx + half_len * std::cos(angle), by = cy + half_len * std::sin(angle);
    const int x0 = std::max(0, int(std::floor(std::min(ax, bx) - half_width - 1)));
    const int x1 = std::min(n - 1, int(std::ceil(std::max(ax, bx) + half_width + 1)));
    const int y0 = std::max(0, int(std::floor(std::min(ay, by) - half_width - 1)));
    const int y1 = std::min(n - 1, int(std::ceil(std::max(ay, by) + half_width + 1)));
    for (int i = y0; i <= y1; ++i)
      for (int j = x0; j <= x1; ++j) {
        // coverage ramps linearly across one pixel at the rod edge
        const double d = segment_distance(j + 0.5, i + 0.5, ax, ay, bx, by);
        const double cover = std::clamp(half_width + 0.5 - d, 0.0, 1.0);
        if (cover > 0) img(i, j) = std::max(img(i, j), background + cover * (level - background));
      }
  }
  return img;
}

// Rasterised cells can leave slivers joined to their cell only diagonally. Any 4-connected
// constant region below min_size takes the most common level along its border; repeat.
void absorb_small_regions(Image& img, int min_size) {
  const int h = int(img.rows()), w = int(img.cols());
  const int di[] = {1, -1, 0, 0}, dj[] = {0, 0, 1, -1};
  for (bool changed = true; changed;) {
    changed = false;
    Eigen::ArrayXXi seen = Eigen::ArrayXXi::Zero(h, w);
    for (int i0 = 0; i0 < h; ++i0)
      for (int j0 = 0; j0 < w; ++j0) {
        if (seen(i0, j0)) continue;
        const double v = img(i0, j0);
        std::vector<std::pair<int, int>> region{{i0, j0}};
        seen(i0, j0) = 1;
        std::map<double, int> border;
        for (std::size_t k = 0; k < region.size(); ++k) {
          const auto [i, j] = region[k];
          for (int d = 0; d < 4; ++d) {
            const int a = i + di[d], b = j + dj[d];
            if (a < 0 || b < 0 || a >= h || b >= w) continue;
            if (img(a, b) != v) {
              ++border[img(a, b)];
            } else if (!seen(a, b)) {
              seen(a, b) = 1;
              region.push_back({a, b});
            }
          }
        }
        if (int(region.size()) >= min_size || border.empty()) continue;
        const auto best = std::max_element(border.begin(), border.end(),
                                           [](const auto& x, const auto& y) { return x.second < y.second; });
        for (const auto& [i, j] : region) img(i, j) = best->first;
        changed = true;
      }
  }
}

Image crystals(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int cells = std::max(4, n * n / 1024);
  for (;;) {
    std::vector<double> sx(cells), sy(cells), level(cells);
    for (int c = 0; c < cells; ++c) {
      sx[c] = unit(rng) * n;
      sy[c] = unit(rng) * n;
      level[c] = 0.1 + 0.8 * unit(rng);
    }
    std::vector<int> area(cells, 0);
    Eigen::ArrayXXi label(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (int c = 0; c < cells; ++c) {
          const double d = (i + 0.5 - sy[c]) * (i + 0.5 - sy[c]) + (j + 0.5 - sx[c]) * (j + 0.5 - sx[c]);
          if (d < best_d) best_d = d, best = c;
        }
        label(i, j) = best;
        ++area[best];
      }
    std::set<double> distinct;
    bool ok = true;
    for (int c = 0; c < cells; ++c) {
      if (area[c] == 0) continue;
      if (area[c] < 16) ok = false;
      distinct.insert(level[c]);
    }
    if (!ok || distinct.size() < 2) continue;
    Image img(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) img(i, j) = level[label(i, j)];
    absorb_small_regions(img, 16);
    if ((img == img(0, 0)).all()) continue;
    return img;
  }
}

Image texture(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Image noise(n, n);
  for (Eigen::Index k = 0; k < noise.size(); ++k) noise.data()[k] = normal(rng);
  Image smooth = gaussian_denoise(noise, 2.0);
  const double lo = smooth.minCoeff(), hi = smooth.maxCoeff();
  return 0.05 + 0.9 * (smooth - lo) / (hi - lo);
}

}  // namespace

Image make_phantom(PhantomKind kind, int size, std::uint64_t seed) {
  if (size <= 0 || size % 8 != 0) throw ConfigError("phantom size must be a positive multiple of 8");
  std::mt19937_64 rng(seed);
  switch (kind) {
    case PhantomKind::Rods: return rods(size, rng);
    case PhantomKind::Crystals: return crystals(size, rng);
    case PhantomKind::Texture: return texture(size, rng);
  }
  throw ConfigError("unknown phantom kind");
}

Image simulate_lr(const Image& hr, int factor, double sigma_w, std::uint64_t seed) {
  if (!(sigma_w >= 0)) throw ConfigError("sigma_w must be non-negative");
  Image lr = block_average(hr, factor);
  if (sigma_w > 0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, sigma_w);
    for (Eigen::Index k = 0; k < lr.size(); ++k) lr.data()[k] += noise(rng);
  }
  return lr;
}

}  // namespace mdf
