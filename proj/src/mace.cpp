#include "mdf/mace.hpp"

#include "mdf/linops.hpp"

#include <cmath>
#include <future>
#include <numeric>
#include <string>

namespace mdf {

StackedState::StackedState(std::vector<Image> v, std::vector<double> weights)
    : components(std::move(v)), mu(std::move(weights)) {
  validate();
}

StackedState StackedState::replicate(const Image& x, std::vector<double> weights) {
  std::vector<Image> v(weights.size(), x);
  return {std::move(v), std::move(weights)};
}

void StackedState::validate() const {
  if (components.empty()) throw ConfigError("stacked state: no components");
  if (components.size() != mu.size()) throw ConfigError("stacked state: component and weight counts differ");
  for (const auto& c : components)
    if (shape_of(c) != shape_of(components.front())) throw ShapeError("stacked state: component shapes differ");
  double total = 0.0;
  for (double m : mu) {
    if (!(m > 0)) throw ConfigError("stacked state: weights must be positive");
    total += m;
  }
  if (std::abs(total - 1.0) > 1e-12) throw ConfigError("stacked state: weights must sum to 1");
}

std::vector<double> two_agent_weights(double forward_mu) {
  if (!(forward_mu > 0 && forward_mu < 1)) throw ConfigError("mu must lie in (0, 1)");
  return {forward_mu, 1.0 - forward_mu};
}

// v_0 + sum_i mu_i (v_i - v_0): equal to sum_i mu_i v_i since the weights sum to one, and exact
// on consensus states.
Image weighted_average(const StackedState& state) {
  const Image& base = state.components.front();
  Image acc = base;
  for (std::size_t i = 1; i < state.size(); ++i) acc += state.mu[i] * (state.components[i] - base);
  return acc;
}

StackedState stack_G(const StackedState& state) {
  StackedState out;
  out.components.assign(state.size(), weighted_average(state));
  out.mu = state.mu;
  return out;
}

StackedState apply_agents(const std::vector<Agent>& agents, const StackedState& state, bool parallel) {
  if (agents.size() != state.size()) throw ConfigError("agent count does not match stacked state");
  StackedState out;
  out.mu = state.mu;
  out.components.resize(state.size());
  auto run_one = [&](std::size_t i) {
    Image r;
    try {
      r = agents[i](state.components[i]);
    } catch (const std::exception& e) {
      throw AgentError(-1, agents[i].name, std::current_exception(), e.what());
    }
    if (shape_of(r) != state.shape())
      throw ShapeError("agent '" + agents[i].name + "' changed the image shape to " + to_string(shape_of(r)));
    return r;
  };
  if (parallel && state.size() > 1) {
    std::vector<std::future<Image>> pending;
    for (std::size_t i = 0; i < state.size(); ++i) pending.push_back(std::async(std::launch::async, run_one, i));
    for (std::size_t i = 0; i < state.size(); ++i) out.components[i] = pending[i].get();
  } else {
    for (std::size_t i = 0; i < state.size(); ++i) out.components[i] = run_one(i);
  }
  return out;
}

double convergence_error(const StackedState& state, const StackedState& f_of_v, double sigma_n) {
  if (!(sigma_n > 0)) throw ConfigError("sigma_n must be positive");
  const Image g = weighted_average(state);
  const double g_norm = std::sqrt(static_cast<double>(state.size())) * g.matrix().norm();
  if (!(g_norm > 0)) throw MetricError("convergence error undefined: consensus image has zero norm");
  double diff2 = 0.0;
  for (const auto& f : f_of_v.components) diff2 += (g - f).square().sum();
  return std::sqrt(diff2) / (sigma_n * g_norm);
}

double convergence_error(const StackedState& state, const std::vector<Agent>& agents, double sigma_n) {
  return convergence_error(state, apply_agents(agents, state), sigma_n);
}

void MaceConfig::validate() const {
  if (!(rho > 0 && rho < 1)) throw ConfigError("rho must lie in (0, 1)");
  if (max_iters < 1) throw ConfigError("max_iters must be >= 1");
  if (!(tol > 0)) throw ConfigError("tol must be positive");
  if (!(sigma_n > 0)) throw ConfigError("sigma_n must be positive");
}

SolveReport mace_solve(const std::vector<Agent>& agents, const Image& x0, const std::vector<double>& mu,
                       const MaceConfig& config) {
  config.validate();
  if (agents.size() < 2) throw ConfigError("mace_solve needs at least two agents");
  if (!all_finite(x0)) throw DivergenceError("initial image has non-finite values");
  StackedState v = StackedState::replicate(x0, mu);
  if (agents.size() != v.size()) throw ConfigError("agent count does not match weight count");

  SolveReport report;
  for (int k = 0; k < config.max_iters; ++k) {
    StackedState x;
    try {
      x = apply_agents(agents, v, config.parallel_agents);
    } catch (const AgentError& e) {
      throw e.at_iteration(k);
    }
    for (std::size_t i = 0; i < x.size(); ++i)
      if (!all_finite(x.components[i]))
        throw DivergenceError("iteration " + std::to_string(k) + ": agent '" + agents[i].name +
                              "' produced non-finite values");

    const double err = convergence_error(v, x, config.sigma_n);
    report.convergence_trace.push_back(err);
    report.iterations_run = k + 1;
    if (err < config.tol) {
      report.converged = true;
      break;
    }

    StackedState reflected = x;
    for (std::size_t i = 0; i < x.size(); ++i) reflected.components[i] = 2.0 * x.components[i] - v.components[i];
    const Image z = weighted_average(reflected);
    for (std::size_t i = 0; i < v.size(); ++i) v.components[i] += 2.0 * config.rho * (z - x.components[i]);
    for (const auto& c : v.components)
      if (!all_finite(c)) throw DivergenceError("iteration " + std::to_string(k) + ": state became non-finite");
  }
  report.final_image = weighted_average(v);
  report.final_state = std::move(v);
  return report;
}

Image initialize(const Image& y, int factor) { return bicubic_upsample(y, factor).cwiseMax(0.0); }

}  // namespace mdf
