// One PASS/FAIL line per primary acceptance criterion, with its runtime.

#include "mdf/agents.hpp"
#include "mdf/linops.hpp"
#include "mdf/mace.hpp"
#include "mdf/metrics.hpp"
#include "mdf/pipeline.hpp"
#include "mdf/theory.hpp"
#include "oracles.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

using namespace mdf;
using namespace mdf::theory;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& name, double limit_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ostringstream line;
  line.precision(3);
  line << (out.ok && secs < limit_s ? "PASS" : "FAIL") << "  [" << id << "] " << name << "  (" << secs << " s";
  if (limit_s < 1e9) line << ", limit " << limit_s << " s";
  line << ")  " << out.detail;
  if (!out.ok && secs >= limit_s) line << " [over time]";
  if (!(out.ok && secs < limit_s)) ++failures;
  std::puts(line.str().c_str());
  std::fflush(stdout);
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double round2(double v) { return std::round(v * 100.0) / 100.0; }

constexpr double kNoLimit = 1e18;

ExperimentConfig scratch_config(const std::string& tag) {
  ExperimentConfig cfg;
  cfg.output_dir = std::filesystem::temp_directory_path() / "mdf_acceptance" / tag;
  return cfg;
}

}  // namespace

int main() {
  criterion(1, "A A^T = L^2 I on 200 random images, L in {2,4,8}", 5, [] {
    double worst = 0;
    for (int L : {2, 4, 8})
      for (std::uint64_t s = 0; s < 200; ++s) {
        const Image z = oracle::random_image(8 + int(s % 5), 6 + int(s % 7), 1000 * L + s, -1, 1);
        worst = std::max(worst, oracle::max_abs_diff(block_sum(block_replicate(z, L), L), double(L * L) * z));
      }
    return Outcome{worst <= 1e-10, "max |A A^T z - L^2 z| = " + num(worst)};
  });

  criterion(2, "closed-form data-fidelity update vs projected-gradient oracle, 50 instances 16x16 L=2", 30, [] {
    // balanced gain 1/2 with x in [0.5, 1], y in [0, 1]: the nonnegativity bound stays inactive
    const Matrix A = oracle::block_sum_matrix(16, 16, 2);
    double worst = 0;
    int clipped = 0;
    for (std::uint64_t s = 0; s < 50; ++s) {
      const Image x = oracle::random_image(16, 16, s, 0.5, 1.0);
      const Image y = oracle::random_image(8, 8, 500 + s);
      const NoiseParams p = NoiseParams::balanced(0.01 + 0.01 * double(s % 10), 2);
      const Image unclipped = x + p.gain(2) * block_replicate((y - block_average(x, 2)).eval(), 2);
      clipped += unclipped.minCoeff() < 0;
      const Vector pg = oracle::constrained_projected_gradient(oracle::flatten(x), oracle::flatten(y), A, 2, p.sigma_w,
                                                       p.sigma_lambda);
      worst = std::max(worst, oracle::max_abs_diff(data_fidelity_apply(x, y, 2, p), oracle::unflatten(pg, 16, 16)));
    }
    return Outcome{worst < 1e-5, "max elementwise gap = " + num(worst) + ", instances with an active bound: " +
                                     std::to_string(clipped)};
  });

  criterion(3, "(I + grad f)^-1 = I - r grad f on dense instances", 5, [] {
    double worst = 0;
    for (std::uint64_t s = 0; s < 20; ++s) {
      const Shape grid = s % 2 ? Shape{8, 8} : Shape{4, 6};
      const int L = 2;
      const double sigma2 = (0.02 + 0.2 * double(s % 5) / 5.0) / (L * L);
      worst = std::max(worst, prox_two_forms_check(make_instance(L, grid, sigma2, 0.0, s)).residual());
    }
    return Outcome{worst < 1e-10, "max residual = " + num(worst)};
  });

  criterion(4, "R~(I) = I and (I - rR grad f) = (I + R~ grad f)^-1 for |R - I| in {0.01,0.05,0.1}", 10, [] {
    const Shape grid{4, 4};
    const double ident = build_tilde_R(make_instance(2, grid, 0.2, 0.0, 1)).deviation;
    double worst = 0;
    for (double dev : {0.01, 0.05, 0.1})
      for (std::uint64_t s = 0; s < 5; ++s)
        worst = std::max(worst, build_tilde_R(make_instance(2, grid, 0.2, dev, 10 + s)).resolvent_residual);
    return Outcome{ident < 1e-10 && worst < 1e-8, "|R~(I) - I| = " + num(ident) + ", max resolvent residual = " + num(worst)};
  });

  criterion(5, "theorem 1 on 50 K=2 and 50 K=3 quadratic instances", 10, [] {
    double gap = 0, stat = 0;
    for (int K : {2, 3})
      for (std::uint64_t s = 0; s < 50; ++s) {
        const auto prob = random_theorem1_problem(K, 8, 0.02 + 0.08 * double(s % 5) / 4.0, 100 * K + s);
        const auto rep = verify_theorem1(prob.fs, prob.Rs, prob.seed);
        gap = std::max(gap, rep.solution_gap);
        stat = std::max(stat, rep.stationarity_residual);
      }
    return Outcome{gap < 1e-8 && stat < 1e-8, "max gap = " + num(gap) + ", max stationarity = " + num(stat)};
  });

  criterion(6, "theorem 2 on 25 affine instances", 10, [] {
    double worst = 0;
    for (std::uint64_t s = 0; s < 25; ++s) {
      const double dev = 0.01 + 0.09 * double(s % 5) / 4.0;
      const auto inst = make_instance(2, {4, 4}, 0.2, dev, 300 + s);
      const auto phi = MonotoneOperatorSpec::random_spd(inst.n, 0.5, 2.0, 400 + s);
      worst = std::max(worst, verify_theorem2(inst, phi).solution_gap);
    }
    return Outcome{worst < 1e-8, "max consensus gap = " + num(worst)};
  });

  criterion(7, "theorem 3: Mann iteration on 25 non-symmetric instances", 30, [] {
    double worst = 0;
    int most = 0;
    bool all = true;
    for (std::uint64_t s = 0; s < 25; ++s) {
      const auto prob = random_theorem3_problem(16, 700 + s);
      const auto rep = verify_theorem3(prob.V, prob.lambda, prob.q, prob.H);
      all = all && rep.converged && rep.iterations <= 1000;
      worst = std::max(worst, rep.trace.back());
      most = std::max(most, rep.iterations);
    }
    return Outcome{all && worst < 1e-6, "max final error = " + num(worst) + ", max iterations = " + std::to_string(most)};
  });

  criterion(8, "128x128 crystals, L=4, RAP + TV: convergence error < 0.05 within 20 iterations", 60, [] {
    auto cfg = scratch_config("c8");
    cfg.solver.max_iters = 20;
    const RunRecord rec = run_reconstruction(cfg, make_phantom(PhantomKind::Crystals, 128, 0), std::nullopt);
    const double err = rec.convergence_trace.back();
    return Outcome{err < 0.05 && rec.iterations <= 20,
                   "final error = " + num(err) + " after " + std::to_string(rec.iterations) + " iterations"};
  });

  criterion(9, "PSNR >= bicubic + 0.5 dB, crystals and rods, 10 seeds, L=4, sigma_w=0.01", kNoLimit, [] {
    double worst = 1e9;
    std::string where;
    for (auto kind : {PhantomKind::Crystals, PhantomKind::Rods})
      for (std::uint64_t s = 0; s < 10; ++s) {
        auto cfg = scratch_config("c9");
        cfg.noise_seed = s;
        const RunRecord rec = run_reconstruction(cfg, make_phantom(kind, 128, s), std::nullopt);
        const double gain = rec.metrics.at("psnr") - rec.metrics.at("psnr_bicubic");
        if (gain < worst) worst = gain, where = to_string(kind) + " seed " + std::to_string(s);
      }
    return Outcome{worst >= 0.5, "min gain = " + num(worst) + " dB (" + where + ")"};
  });

  criterion(10, "noiseless converged runs: |Psi x* - y| / |y| <= 0.05", kNoLimit, [] {
    double worst = 0;
    int converged = 0, total = 0;
    for (auto kind : {PhantomKind::Crystals, PhantomKind::Rods, PhantomKind::Texture})
      for (std::uint64_t s = 0; s < 10; ++s) {
        auto cfg = scratch_config("c10");
        cfg.sigma_w = 0.0;
        const RunRecord rec = run_reconstruction(cfg, make_phantom(kind, 128, s), std::nullopt);
        ++total;
        if (!rec.converged) continue;
        ++converged;
        worst = std::max(worst, rec.metrics.at("lr_relative_residual"));
      }
    return Outcome{converged > 0 && worst <= 0.05, "max relative residual = " + num(worst) + " over " +
                                                       std::to_string(converged) + "/" + std::to_string(total) +
                                                       " converged runs"};
  });

  criterion(11, "published speed-ups to 2 d.p.: 15.70, 40.19, 8.54, 10.05", 1, [] {
    struct Row {
      long lh, lw, th, tw, rh, rw;
      double expect;
    };
    const Row rows[] = {{2048, 1388, 1232, 1367, 10240, 6940, 15.70},
                        {2048, 1388, 1232, 1367, 16384, 11104, 40.19},
                        {7404, 7666, 5049, 9827, 29616, 30664, 8.54},
                        {1280, 755, 1280, 755, 5120, 3020, 10.05}};
    Outcome out;
    for (const auto& r : rows) {
      const double v = round2(speedup({{r.lh, r.lw}, {r.th, r.tw}, {r.rh, r.rw}}));
      const bool ok = std::abs(v - r.expect) < 1e-9;
      out.ok = out.ok && ok;
      char buf[64];
      std::snprintf(buf, sizeof buf, ok ? "%.2f " : "%.2f(!=%.2f) ", v, r.expect);
      out.detail += buf;
    }
    return out;
  });

  criterion(12, "FRC self = 1; L=4 degraded bandlimited image crosses by 0.25 + one ring", 10, [] {
    double self_gap = 0;
    for (std::uint64_t s = 0; s < 5; ++s) {
      const Image a = make_phantom(PhantomKind::Texture, 128, s);
      for (double c : frc(a, a).correlations) self_gap = std::max(self_gap, std::abs(c - 1.0));
    }
    Outcome out{self_gap < 1e-9, "max |FRC(a,a) - 1| = " + num(self_gap) + "; crossings:"};
    for (std::uint64_t s = 0; s < 5; ++s) {
      // random cosines below 0.3 cycles/pixel
      std::mt19937_64 rng(s);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      const int n = 128;
      Image hr = Image::Zero(n, n);
      for (int t = 0; t < 40; ++t) {
        const double r = 0.3 * std::sqrt(u(rng)), th = 2 * M_PI * u(rng), ph = 2 * M_PI * u(rng), amp = 0.5 + u(rng);
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j)
            hr(i, j) += amp * std::cos(2 * M_PI * (r * std::sin(th) * i + r * std::cos(th) * j) + ph);
      }
      const FrcCurve c = frc(hr, bicubic_upsample(block_average(hr, 4), 4));
      const bool ok = c.crossing_frequency && *c.crossing_frequency <= 0.25 + c.ring_width;
      out.ok = out.ok && ok;
      out.detail += " " + (c.crossing_frequency ? num(*c.crossing_frequency) : std::string("none"));
    }
    return out;
  });

  std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
