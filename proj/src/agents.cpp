#include "mdf/agents.hpp"

#include "mdf/external.hpp"

#include <memory>

namespace mdf {

std::string to_string(AgentKind k) {
  switch (k) {
    case AgentKind::DataFidelity: return "data-fidelity";
    case AgentKind::Rap: return "rap";
    case AgentKind::Denoiser: return "denoiser";
    case AgentKind::Generic: return "generic";
  }
  return "unknown";
}

namespace {
template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;
}  // namespace

void DenoiserSpec::validate() const {
  if (!(sigma_n > 0)) throw ConfigError("denoiser sigma_n must be positive");
  std::visit(overloaded{
                 [](const GaussianPrior& g) {
                   if (!(g.sigma_blur > 0)) throw ConfigError("gaussian prior: sigma_blur must be positive");
                 },
                 [](const NlmPrior& n) {
                   if (n.params.patch_radius < 1 || n.params.search_radius < 1)
                     throw ConfigError("nlm prior: radii must be >= 1");
                   if (!(n.params.bandwidth_h > 0)) throw ConfigError("nlm prior: bandwidth must be positive");
                 },
                 [](const TvPrior& t) {
                   if (!(t.weight > 0)) throw ConfigError("tv prior: weight must be positive");
                   if (t.inner_iters < 1) throw ConfigError("tv prior: inner_iters must be >= 1");
                 },
                 [](const ExternalPrior& e) { EndpointDescriptor::parse(e.endpoint); },
                 [](const IdentityPrior&) {},
             },
             variant);
}

std::string DenoiserSpec::kind() const {
  return std::visit(overloaded{
                        [](const GaussianPrior&) { return std::string("gaussian"); },
                        [](const NlmPrior&) { return std::string("nlm"); },
                        [](const TvPrior&) { return std::string("tv"); },
                        [](const ExternalPrior&) { return std::string("external"); },
                        [](const IdentityPrior&) { return std::string("identity"); },
                    },
                    variant);
}

Agent make_identity_agent() {
  return {AgentKind::Generic, "identity", {}, [](const Image& v) { return v; }};
}

Agent make_data_fidelity_agent(Image y, int factor, NoiseParams params) {
  params.validate();
  Agent a;
  a.kind = AgentKind::DataFidelity;
  a.name = "data-fidelity";
  a.parameters = {{"L", factor}, {"sigma_w", params.sigma_w}, {"sigma_lambda", params.sigma_lambda}};
  a.map = [y = std::move(y), factor, params](const Image& v) { return data_fidelity_apply(v, y, factor, params); };
  return a;
}

Agent make_rap_agent(Image y, int factor, NoiseParams params, BicubicUpsampler back) {
  params.validate();
  Agent a;
  a.kind = AgentKind::Rap;
  a.name = "rap";
  a.parameters = {{"L", factor},
                  {"sigma_w", params.sigma_w},
                  {"sigma_lambda", params.sigma_lambda},
                  {"kernel_a", back.kernel_parameter()}};
  a.map = [y = std::move(y), factor, params, back](const Image& v) { return rap_apply(v, y, factor, params, back); };
  return a;
}

Agent make_rap_agent(Image y, int factor, NoiseParams params) {
  return make_rap_agent(std::move(y), factor, params, BicubicUpsampler(factor));
}

Agent make_prior_agent(const DenoiserSpec& spec) {
  spec.validate();
  Agent a;
  a.kind = AgentKind::Denoiser;
  a.name = spec.kind();
  a.parameters["sigma_n"] = spec.sigma_n;
  std::visit(overloaded{
                 [&](const GaussianPrior& g) {
                   a.parameters["sigma_blur"] = g.sigma_blur;
                   a.map = [g](const Image& v) { return gaussian_denoise(v, g.sigma_blur); };
                 },
                 [&](const NlmPrior& n) {
                   a.parameters["patch_radius"] = n.params.patch_radius;
                   a.parameters["search_radius"] = n.params.search_radius;
                   a.parameters["bandwidth_h"] = n.params.bandwidth_h;
                   a.map = [n](const Image& v) { return nlm_denoise(v, n.params); };
                 },
                 [&](const TvPrior& t) {
                   a.parameters["weight"] = t.weight;
                   a.parameters["inner_iters"] = t.inner_iters;
                   a.map = [t](const Image& v) { return tv_denoise(v, t.weight, t.inner_iters); };
                 },
                 [&](const ExternalPrior& e) {
                   auto client = std::make_shared<DenoiserClient>(e.endpoint);
                   a.map = [client](const Image& v) { return client->denoise(v); };
                 },
                 [&](const IdentityPrior&) { a.map = [](const Image& v) { return v; }; },
             },
             spec.variant);
  return a;
}

}  // namespace mdf
