#pragma once

// MACE agents: the data-fidelity proximal update, its relaxed-adjoint (RAP) variant, and
// the prior family (Gaussian, non-local means, total variation, external process).

#include "mdf/core.hpp"
#include "mdf/linops.hpp"

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <variant>

namespace mdf {

struct NoiseParams {
  double sigma_w = 1.0;       // measurement noise std
  double sigma_lambda = 1.0;  // proximal coupling std

  NoiseParams() = default;
  NoiseParams(double sw, double sl) : sigma_w(sw), sigma_lambda(sl) { validate(); }

  // sigma_lambda = sigma_w * L, giving a step gain of exactly 1/2.
  static NoiseParams balanced(double sigma_w, int factor) { return {sigma_w, sigma_w * factor}; }

  void validate() const {
    if (!(sigma_w > 0) || !(sigma_lambda > 0)) throw ConfigError("noise parameters must be positive");
  }

  double sigma2() const { return sigma_lambda * sigma_lambda / (sigma_w * sigma_w); }
  double r(int factor) const { return 1.0 / (1.0 + sigma2() * factor * factor); }

  // sigma_lambda^2 / (sigma_lambda^2 + L^2 sigma_w^2)
  double gain(int factor) const {
    const double sl2 = sigma_lambda * sigma_lambda;
    return sl2 / (sl2 + double(factor) * factor * sigma_w * sigma_w);
  }

  // The update x + gain A^T (y - Ax/L^2) is the resolvent of grad f with
  // f(x) = (s2/2) |y' - Ax|^2 when s2 = sigma_lambda^2 / (L^4 sigma_w^2) and y' = L^2 y.
  double resolvent_sigma2(int factor) const {
    const double l2 = double(factor) * factor;
    return sigma2() / (l2 * l2);
  }
};

namespace detail {
inline void check_pair(Shape hr, Shape lr, int factor) {
  check_divisible(hr, factor);
  if (hr.height / factor != lr.height || hr.width / factor != lr.width) {
    throw ShapeError("HR " + to_string(hr) + " and LR " + to_string(lr) + " disagree for L=" + std::to_string(factor));
  }
}
}  // namespace detail

// [x + gain * B (y - A x / L^2)]_+ for an arbitrary backprojector B (anything with apply()).
template <typename Scalar, typename Backprojector>
ImageT<Scalar> backprojected_update(const ImageT<Scalar>& x, const ImageT<Scalar>& y, int factor,
                                    const NoiseParams& params, const Backprojector& back, bool clip = true) {
  detail::check_pair(shape_of(x), shape_of(y), factor);
  params.validate();
  const ImageT<Scalar> residual = y - block_average(x, factor);
  ImageT<Scalar> out = x + Scalar(params.gain(factor)) * back.apply(residual);
  if (shape_of(out) != shape_of(x)) throw ShapeError("backprojector returned " + to_string(shape_of(out)));
  if (clip) out = out.cwiseMax(Scalar(0));
  return out;
}

template <typename Scalar>
ImageT<Scalar> data_fidelity_apply(const ImageT<Scalar>& x, const ImageT<Scalar>& y, int factor,
                                   const NoiseParams& params) {
  return backprojected_update(x, y, factor, params, BlockReplicator{factor});
}

template <typename Scalar, typename Backprojector = BicubicUpsampler>
ImageT<Scalar> rap_apply(const ImageT<Scalar>& x, const ImageT<Scalar>& y, int factor, const NoiseParams& params,
                         const Backprojector& back) {
  return backprojected_update(x, y, factor, params, back);
}

// ---------------------------------------------------------------------------------------------
// Priors

Image gaussian_denoise(const Image& x, double sigma_blur);

struct NlmParams {
  int patch_radius = 1;
  int search_radius = 5;
  double bandwidth_h = 0.1;
};
Image nlm_denoise(const Image& x, const NlmParams& p);

// Approximate prox of weight * TV (isotropic, Neumann boundary) by accelerated projected
// gradient on the dual, run for exactly inner_iters iterations.
Image tv_denoise(const Image& x, double weight, int inner_iters);

// Isotropic total variation with forward differences; used for energy checks.
double total_variation(const Image& x);

struct GaussianPrior {
  double sigma_blur = 1.0;
};
struct NlmPrior {
  NlmParams params;
};
struct TvPrior {
  double weight = 0.07;
  int inner_iters = 100;
};
struct ExternalPrior {
  std::string endpoint;  // "stdio:<command line>" or "tcp:<host>:<port>"
};
struct IdentityPrior {};

struct DenoiserSpec {
  std::variant<GaussianPrior, NlmPrior, TvPrior, ExternalPrior, IdentityPrior> variant = TvPrior{};
  double sigma_n = 0.1;  // noise level the prior is tuned for

  void validate() const;
  std::string kind() const;
};

enum class AgentKind { DataFidelity, Rap, Denoiser, Generic };

std::string to_string(AgentKind k);

// A map from image space to itself taking part in the equilibrium.
struct Agent {
  AgentKind kind = AgentKind::Generic;
  std::string name;
  std::map<std::string, double> parameters;
  std::function<Image(const Image&)> map;

  Image operator()(const Image& v) const { return map(v); }
};

Agent make_identity_agent();
Agent make_data_fidelity_agent(Image y, int factor, NoiseParams params);
Agent make_rap_agent(Image y, int factor, NoiseParams params, BicubicUpsampler back);
Agent make_rap_agent(Image y, int factor, NoiseParams params);

// External priors keep one client connection for the lifetime of the agent.
Agent make_prior_agent(const DenoiserSpec& spec);

}  // namespace mdf
