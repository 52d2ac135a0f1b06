#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "mdf/agents.hpp"
#include "oracles.hpp"

using namespace mdf;

TEST_CASE("NoiseParams") {
  const NoiseParams p = NoiseParams::balanced(0.01, 4);
  CHECK(p.gain(4) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(p.r(4) > 0);
  CHECK(p.r(4) < 1);
  CHECK_THROWS_AS(NoiseParams(0.0, 1.0), ConfigError);
  CHECK_THROWS_AS(NoiseParams(1.0, -1.0), ConfigError);
}

TEST_CASE("data_fidelity_apply examples") {
  const NoiseParams unit(1.0, 1.0);
  const Image x = oracle::random_image(8, 8, 1);
  CHECK(oracle::max_abs_diff(data_fidelity_apply(x, block_average(x, 2), 2, unit), x) < 1e-15);

  Image y(1, 1);
  y << 1.0;
  const Image out = data_fidelity_apply(Image::Zero(2, 2).eval(), y, 2, unit);
  CHECK(oracle::max_abs_diff(out, Image::Constant(2, 2, 0.2)) < 1e-15);
  // the same value from the projected-gradient oracle of the constrained objective
  const Vector pg = oracle::constrained_projected_gradient(Vector::Zero(4), oracle::flatten(y), oracle::block_sum_matrix(2, 2, 2),
                                                   2, 1.0, 1.0);
  CHECK((pg.array() - 0.2).abs().maxCoeff() < 1e-8);

  Image z(1, 1);
  z << 0.0;
  CHECK((data_fidelity_apply(Image::Constant(2, 2, -1.0).eval(), z, 2, unit) == 0.0).all());

  CHECK_THROWS_AS(data_fidelity_apply(Image::Zero(4, 4).eval(), Image::Zero(3, 2).eval(), 2, unit), ShapeError);
  CHECK_THROWS_AS(data_fidelity_apply(Image::Zero(5, 4).eval(), Image::Zero(2, 2).eval(), 2, unit), ShapeError);
}

TEST_CASE("data_fidelity_apply agrees with the constrained minimiser when the bound is inactive") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Image x = oracle::random_image(8, 8, s, 0.5, 1.0);
    const Image y = oracle::random_image(4, 4, 50 + s);
    const NoiseParams p(0.1, 0.3);
    const Vector pg = oracle::constrained_projected_gradient(oracle::flatten(x), oracle::flatten(y),
                                                     oracle::block_sum_matrix(8, 8, 2), 2, p.sigma_w, p.sigma_lambda);
    CHECK(oracle::max_abs_diff(data_fidelity_apply(x, y, 2, p), oracle::unflatten(pg, 8, 8)) < 1e-8);
  }
}

TEST_CASE("unclipped data-fidelity map is a proximal map with two equivalent forms") {
  const int L = 2;
  const NoiseParams p(0.2, 0.3);
  const Image y = oracle::random_image(2, 3, 7);
  auto linear = [&](const Image& x) { return backprojected_update(x, Image::Zero(2, 3).eval(), L, p, BlockReplicator{L}, false); };
  const Matrix J = materialize(linear, {4, 6});
  CHECK((J - J.transpose()).cwiseAbs().maxCoeff() < 1e-14);
  const Vector eig = Eigen::SelfAdjointEigenSolver<Matrix>(J).eigenvalues();
  CHECK(eig.minCoeff() > 0);
  CHECK(eig.maxCoeff() <= 1 + 1e-12);

  // rescaled parameterisation: f = (s2/2)|y' - A x|^2, y' = L^2 y
  const double s2 = p.resolvent_sigma2(L);
  const Matrix A = oracle::block_sum_matrix(4, 6, L);
  const Matrix W = s2 * A.transpose() * A;
  const Vector yp = double(L * L) * oracle::flatten(y);
  const Matrix I = Matrix::Identity(24, 24);
  const double r = 1.0 / (1.0 + s2 * L * L);
  const Matrix resolvent = (I + W).inverse();
  CHECK((resolvent - (I - r * W)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((resolvent - J).cwiseAbs().maxCoeff() < 1e-10);
  const Vector offset = resolvent * (s2 * A.transpose() * yp);
  const Image x = oracle::random_image(4, 6, 8, 0.5, 1.0);
  const Image full = backprojected_update(x, y, L, p, BlockReplicator{L}, false);
  CHECK((oracle::flatten(full) - (J * oracle::flatten(x) + offset)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("rap_apply examples") {
  const NoiseParams p = NoiseParams::balanced(0.05, 2);
  const Image x = oracle::random_image(8, 8, 11);
  const Image y = oracle::random_image(4, 4, 12);
  CHECK(oracle::max_abs_diff(rap_apply(x, y, 2, p, BlockReplicator{2}), data_fidelity_apply(x, y, 2, p)) == 0.0);
  CHECK(oracle::max_abs_diff(rap_apply(x, block_average(x, 2), 2, p, BicubicUpsampler(2)), x) < 1e-15);

  const Matrix B = materialize([](const Image& z) { return bicubic_upsample(z, 2); }, {4, 4});
  const Matrix A = oracle::block_sum_matrix(8, 8, 2);
  const Vector expect =
      (oracle::flatten(x) + p.gain(2) * B * (oracle::flatten(y) - A * oracle::flatten(x) / 4.0)).cwiseMax(0.0);
  CHECK((oracle::flatten(rap_apply(x, y, 2, p, BicubicUpsampler(2))) - expect).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("gaussian_denoise") {
  CHECK(oracle::max_abs_diff(gaussian_denoise(Image::Constant(9, 7, 0.3), 1.5), Image::Constant(9, 7, 0.3)) < 1e-15);

  const double sigma = 1.2;
  Image impulse = Image::Zero(21, 21);
  impulse(10, 10) = 1.0;
  const Image out = gaussian_denoise(impulse, sigma);
  CHECK(out.sum() == doctest::Approx(1.0).epsilon(1e-14));
  const int radius = int(std::ceil(4 * sigma));
  std::vector<double> g(2 * radius + 1);
  double total = 0;
  for (int t = -radius; t <= radius; ++t) total += g[t + radius] = std::exp(-t * t / (2 * sigma * sigma));
  double worst = 0;
  for (int i = 0; i < 21; ++i)
    for (int j = 0; j < 21; ++j) {
      const int di = i - 10, dj = j - 10;
      const double expect =
          (std::abs(di) <= radius && std::abs(dj) <= radius) ? g[di + radius] * g[dj + radius] / (total * total) : 0.0;
      worst = std::max(worst, std::abs(out(i, j) - expect));
    }
  CHECK(worst < 1e-15);

  const Image r = oracle::random_image(17, 23, 4);
  CHECK(std::abs(gaussian_denoise(r, 2.5).mean() - r.mean()) < 1e-8);
  CHECK_THROWS_AS(gaussian_denoise(r, 0.0), ConfigError);
}

namespace {

// Quadratic-time reference: edge-replicated patches, search window cut at the border.
Image naive_nlm(const Image& x, int pr, int sr, double h) {
  const int H = int(x.rows()), W = int(x.cols());
  auto at = [&](int i, int j) { return x(std::clamp(i, 0, H - 1), std::clamp(j, 0, W - 1)); };
  Image out(H, W);
  for (int i = 0; i < H; ++i)
    for (int j = 0; j < W; ++j) {
      double wsum = 0, acc = 0;
      for (int qi = std::max(0, i - sr); qi <= std::min(H - 1, i + sr); ++qi)
        for (int qj = std::max(0, j - sr); qj <= std::min(W - 1, j + sr); ++qj) {
          double d2 = 0;
          for (int a = -pr; a <= pr; ++a)
            for (int b = -pr; b <= pr; ++b) {
              const double d = at(i + a, j + b) - at(qi + a, qj + b);
              d2 += d * d;
            }
          const double wt = std::exp(-d2 / (h * h));
          wsum += wt;
          acc += wt * x(qi, qj);
        }
      out(i, j) = acc / wsum;
    }
  return out;
}

}  // namespace

TEST_CASE("nlm_denoise") {
  NlmParams p;
  CHECK(oracle::max_abs_diff(nlm_denoise(Image::Constant(10, 10, 0.6), p), Image::Constant(10, 10, 0.6)) < 1e-15);

  Image step = Image::Zero(10, 10);
  step.rightCols(5) = 1.0;
  p.bandwidth_h = 1e-3;
  CHECK(oracle::max_abs_diff(nlm_denoise(step, p), step) < 1e-12);

  const Image r = oracle::random_image(8, 8, 21);
  const Image fast = nlm_denoise(r, {1, 2, 0.3});
  CHECK(oracle::max_abs_diff(fast, naive_nlm(r, 1, 2, 0.3)) < 1e-14);

  CHECK_THROWS_AS(nlm_denoise(Image::Zero(2, 8).eval(), {1, 2, 0.1}), ShapeError);
  CHECK_THROWS_AS(nlm_denoise(r, {0, 2, 0.1}), ConfigError);
}

TEST_CASE("tv_denoise") {
  CHECK(oracle::max_abs_diff(tv_denoise(Image::Constant(12, 12, 0.4), 0.1, 50), Image::Constant(12, 12, 0.4)) < 1e-12);
  const Image r = oracle::random_image(16, 16, 31);
  CHECK(oracle::max_abs_diff(tv_denoise(r, 1e-9, 50), r) < 1e-6);

  // energy |u - x|^2 / 2 + w TV(u) never exceeds its value at u = x
  for (double w : {0.02, 0.1, 0.5}) {
    const Image u = tv_denoise(r, w, 100);
    const double e_out = 0.5 * (u - r).square().sum() + w * total_variation(u);
    CHECK(e_out <= w * total_variation(r));
  }

  // columns 0..c-1 at a, c..n-1 at b: TV = rows |b - a|; the prox moves each side by w / width
  const int rows = 16, cols = 32, c = 12;
  const double a = 0.2, b = 0.8, w = 0.6;
  Image step(rows, cols);
  step.leftCols(c) = a;
  step.rightCols(cols - c) = b;
  const Image u = tv_denoise(step, w, 2000);
  const double expect_height = (b - a) - w * (1.0 / c + 1.0 / (cols - c));
  const double height = u(rows / 2, cols - 1) - u(rows / 2, 0);
  CHECK(std::abs(height - expect_height) <= 0.02 * expect_height);
  CHECK(u(0, 0) == doctest::Approx(a + w / c).epsilon(0.02));
}

TEST_CASE("agents") {
  const Image y = oracle::random_image(4, 4, 41);
  const Agent f = make_data_fidelity_agent(y, 2, NoiseParams::balanced(0.1, 2));
  CHECK(f.kind == AgentKind::DataFidelity);
  const Image x = oracle::random_image(8, 8, 42);
  CHECK(oracle::max_abs_diff(f(x), f(x)) == 0.0);
  CHECK(shape_of(f(x)) == shape_of(x));

  const Agent rap = make_rap_agent(y, 2, NoiseParams::balanced(0.1, 2));
  CHECK(rap.kind == AgentKind::Rap);
  CHECK(to_string(rap.kind) == "rap");

  DenoiserSpec spec;
  spec.variant = GaussianPrior{1.0};
  const Agent g = make_prior_agent(spec);
  CHECK(g.name == "gaussian");
  CHECK(oracle::max_abs_diff(g(x), gaussian_denoise(x, 1.0)) == 0.0);

  for (auto v : std::vector<decltype(spec.variant)>{GaussianPrior{0.8}, NlmPrior{}, TvPrior{}, IdentityPrior{}}) {
    spec.variant = v;
    const Agent d = make_prior_agent(spec);
    CHECK(oracle::max_abs_diff(d(Image::Constant(12, 12, 0.55)), Image::Constant(12, 12, 0.55)) < 1e-12);
  }

  spec.variant = TvPrior{-1.0, 10};
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec.variant = NlmPrior{{0, 3, 0.1}};
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec.variant = TvPrior{};
  spec.sigma_n = 0.0;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
}
