#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "mdf/linops.hpp"
#include "oracles.hpp"

using namespace mdf;

TEST_CASE("block_sum small cases and errors") {
  Image x(2, 2);
  x << 1, 2, 3, 4;
  CHECK(block_sum(x, 2)(0, 0) == 10.0);
  CHECK(oracle::max_abs_diff(block_sum(x, 1), x) == 0.0);
  CHECK_THROWS_AS(block_sum(Image::Zero(3, 4).eval(), 2), ShapeError);
  CHECK_THROWS_AS(block_sum(x, 0), Error);
}

TEST_CASE("block_sum matches the explicit matrix") {
  const Image x = oracle::random_image(12, 8, 3);
  const Matrix A = oracle::block_sum_matrix(12, 8, 4);
  const Vector expect = A * oracle::flatten(x);
  CHECK((oracle::flatten(block_sum(x, 4)) - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("block_replicate examples") {
  Image z(1, 1);
  z << 2;
  const Image r = block_replicate(z, 2);
  CHECK(r.rows() == 2);
  CHECK((r == 2.0).all());
  const Image w = oracle::random_image(3, 3, 5);
  CHECK(oracle::max_abs_diff(block_replicate(w, 1), w) == 0.0);
  CHECK(oracle::max_abs_diff(block_sum(block_replicate(w, 2), 2), 4.0 * w) == 0.0);
}

TEST_CASE("A A^T = L^2 I exactly and adjointness") {
  for (int L : {2, 3, 4, 8}) {
    const Image z = oracle::random_image(5, 3, L);
    CHECK(oracle::max_abs_diff(block_sum(block_replicate(z, L), L), double(L * L) * z) < 1e-12);
    const Image x = oracle::random_image(5 * L, 3 * L, 100 + L, -1, 1);
    const double lhs = (block_sum(x, L) * z).sum();
    const double rhs = (x * block_replicate(z, L)).sum();
    CHECK(std::abs(lhs - rhs) < 1e-10);
  }
}

TEST_CASE("block_average examples") {
  Image x(2, 2);
  x << 1, 2, 3, 5;
  CHECK(block_average(x, 2)(0, 0) == doctest::Approx(2.75).epsilon(1e-15));
  const Image c = Image::Constant(8, 8, 0.37);
  CHECK(oracle::max_abs_diff(block_average(c, 4), Image::Constant(2, 2, 0.37)) < 1e-15);
  const Image r = oracle::random_image(16, 16, 9);
  Image expect(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      double s = 0;
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) s += r(4 * i + a, 4 * j + b);
      expect(i, j) = s / 16.0;
    }
  CHECK(oracle::max_abs_diff(block_average(r, 4), expect) < 1e-14);
}

TEST_CASE("BlockOperator enforces its grid") {
  BlockOperator op(2, {4, 6});
  CHECK(op.lr_shape() == Shape{2, 3});
  CHECK_THROWS_AS(op.sum(Image::Zero(4, 4).eval()), ShapeError);
  CHECK_THROWS_AS(BlockOperator(4, {6, 8}), ShapeError);
}

TEST_CASE("cubic kernel") {
  CHECK(cubic_kernel(0.0, -0.5) == 1.0);
  CHECK(cubic_kernel(1.0, -0.5) == doctest::Approx(0.0));
  CHECK(cubic_kernel(2.0, -0.5) == 0.0);
  // partition of unity at an arbitrary offset
  const double t = 0.3;
  double s = 0;
  for (int k = -1; k <= 2; ++k) s += cubic_kernel(t - k, -0.5);
  CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("bicubic_upsample examples") {
  const Image c = Image::Constant(5, 7, 0.42);
  CHECK(oracle::max_abs_diff(bicubic_upsample(c, 4), Image::Constant(20, 28, 0.42)) < 1e-14);
  Image z(1, 1);
  z << 2;
  CHECK(oracle::max_abs_diff(bicubic_upsample(z, 2), Image::Constant(2, 2, 2.0)) < 1e-15);

  // affine function sampled at LR centres upsamples to the same function at HR centres
  const int L = 4, h = 10, w = 12;
  auto f = [](double u, double v) { return 0.3 + 0.02 * u - 0.015 * v; };
  Image lr(h, w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) lr(i, j) = f((i + 0.5) * L - 0.5, (j + 0.5) * L - 0.5);
  const Image hr = bicubic_upsample(lr, L);
  double worst = 0;
  for (int i = 2 * L; i < (h - 2) * L; ++i)
    for (int j = 2 * L; j < (w - 2) * L; ++j) worst = std::max(worst, std::abs(hr(i, j) - f(i, j)));
  CHECK(worst < 1e-6);
}

TEST_CASE("materialize") {
  const Matrix S = materialize([](const Image& x) { return block_sum(x, 2); }, {2, 2});
  CHECK(S.rows() == 1);
  CHECK(S.cols() == 4);
  CHECK((S.array() == 1.0).all());
  const Matrix R = materialize([](const Image& z) { return block_replicate(z, 2); }, {1, 1});
  CHECK(R.rows() == 4);
  CHECK((R.array() == 1.0).all());

  const Matrix B = materialize([](const Image& z) { return bicubic_upsample(z, 2); }, {4, 4});
  CHECK(B.rows() == 64);
  CHECK(B.cols() == 16);
  CHECK((B.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-10);

  const Matrix As = materialize([](const Image& x) { return block_sum(x, 2); }, {4, 6});
  const Matrix At = materialize([](const Image& z) { return block_replicate(z, 2); }, {2, 3});
  CHECK((As - At.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((As - oracle::block_sum_matrix(4, 6, 2)).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(materialize([](const Image& x) { return x; }, {65, 2}), RefusalError);
  CHECK_THROWS_AS(materialize([](const Image& z) { return block_replicate(z, 8); }, {16, 16}), RefusalError);
}

TEST_CASE("operators work in single precision too") {
  using ImageF = ImageT<float>;
  ImageF z = ImageF::Constant(3, 3, 1.5f);
  CHECK((block_sum(block_replicate(z, 2), 2) == 6.0f).all());
  CHECK((bicubic_upsample(z, 2) - 1.5f).abs().maxCoeff() < 1e-6f);
}
