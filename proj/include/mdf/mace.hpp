#pragma once

// Consensus equilibrium solver. For agents F_1..F_K and weights mu, find v with F(v) = G_mu(v),
// where F stacks F_i(v_i) and G_mu stacks K copies of the weighted mean sum_i mu_i v_i.
// The solve uses the relaxed Mann iteration
//   x <- F(v);  z <- G_mu(2x - v);  v <- v + 2 rho (z - x)
// and returns the consensus image x* = mean_mu(v).

#include "mdf/agents.hpp"
#include "mdf/core.hpp"

#include <cstddef>
#include <exception>
#include <string>
#include <vector>

namespace mdf {

// An agent threw during mace_solve; the original exception is kept in cause().
class AgentError : public Error {
 public:
  AgentError(int iteration, std::string agent, std::exception_ptr cause, std::string detail)
      : Error("iteration " + std::to_string(iteration) + ", agent '" + agent + "': " + detail),
        iteration_(iteration),
        agent_(std::move(agent)),
        detail_(std::move(detail)),
        cause_(std::move(cause)) {}

  AgentError at_iteration(int k) const { return {k, agent_, cause_, detail_}; }

  int iteration() const { return iteration_; }
  const std::string& agent() const { return agent_; }
  const std::exception_ptr& cause() const { return cause_; }

 private:
  int iteration_;
  std::string agent_;
  std::string detail_;
  std::exception_ptr cause_;
};

struct StackedState {
  std::vector<Image> components;
  std::vector<double> mu;

  StackedState() = default;
  StackedState(std::vector<Image> v, std::vector<double> weights);

  // K copies of x.
  static StackedState replicate(const Image& x, std::vector<double> weights);

  std::size_t size() const { return components.size(); }
  Shape shape() const { return shape_of(components.front()); }
  void validate() const;
};

// Weights (mu, 1 - mu) for the usual forward + prior pair.
std::vector<double> two_agent_weights(double forward_mu);

Image weighted_average(const StackedState& state);
StackedState stack_G(const StackedState& state);

// Stacked agent outputs F(v). The K applications are independent; they run concurrently
// when `parallel` is set.
StackedState apply_agents(const std::vector<Agent>& agents, const StackedState& state, bool parallel = false);

// |G(v) - F(v)|_2 / (sigma_n |G(v)|_2) with F(v) supplied by the caller.
double convergence_error(const StackedState& state, const StackedState& f_of_v, double sigma_n);
double convergence_error(const StackedState& state, const std::vector<Agent>& agents, double sigma_n);

struct MaceConfig {
  double rho = 0.5;
  int max_iters = 20;
  double tol = 0.05;
  double sigma_n = 0.1;
  bool parallel_agents = false;

  void validate() const;
};

struct SolveReport {
  Image final_image;
  StackedState final_state;
  int iterations_run = 0;
  std::vector<double> convergence_trace;
  bool converged = false;
};

// Iteration k evaluates x = F(v_k) and records the convergence error of v_k; if it is below
// tol the solve stops with v_k, otherwise v is updated. Agent exceptions are rethrown as
// AgentError tagged with the iteration index; non-finite iterates raise DivergenceError.
SolveReport mace_solve(const std::vector<Agent>& agents, const Image& x0, const std::vector<double>& mu,
                       const MaceConfig& config);

// Bicubic upsampling of the measurement, clipped at zero.
Image initialize(const Image& y, int factor);

}  // namespace mdf
