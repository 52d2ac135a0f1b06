#include "mdf/theory.hpp"

#include "mdf/linops.hpp"
#include "mdf/mace.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace mdf::theory {

namespace {

Matrix identity(Eigen::Index n) { return Matrix::Identity(n, n); }

Matrix random_gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> dist;
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
  return m;
}

Vector random_vector(Eigen::Index n, std::mt19937_64& rng) { return random_gaussian(n, 1, rng); }

Matrix random_orthogonal(Eigen::Index n, std::mt19937_64& rng) {
  Eigen::HouseholderQR<Matrix> qr(random_gaussian(n, n, rng));
  return qr.householderQ() * identity(n);
}

Matrix checked_inverse(const Matrix& m, const char* what) {
  Eigen::FullPivLU<Matrix> lu(m);
  if (!lu.isInvertible()) throw RefusalError(std::string(what) + " is singular");
  return lu.inverse();
}

void check_dimension(Eigen::Index n) {
  if (n < 1 || n > kMaxDimension) throw RefusalError("dimension " + std::to_string(n) + " outside [1, 64]");
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

// Solves F_i(v_i) = sum_j Omega_j v_j for affine F_i and matrix weights Omega_j.
EquilibriumSolution solve_matrix_weighted(const std::vector<AffineMap>& agents, const std::vector<Matrix>& omega) {
  const auto K = static_cast<Eigen::Index>(agents.size());
  const Eigen::Index n = agents.front().dim();
  Matrix big = Matrix::Zero(n * K, n * K);
  Vector rhs(n * K);
  for (Eigen::Index i = 0; i < K; ++i) {
    big.block(i * n, i * n, n, n) += agents[static_cast<std::size_t>(i)].linear;
    for (Eigen::Index j = 0; j < K; ++j) big.block(i * n, j * n, n, n) -= omega[static_cast<std::size_t>(j)];
    rhs.segment(i * n, n) = -agents[static_cast<std::size_t>(i)].offset;
  }
  Eigen::FullPivLU<Matrix> lu(big);
  if (!lu.isInvertible()) throw RefusalError("equilibrium system is singular");
  const Vector v = lu.solve(rhs);
  EquilibriumSolution sol;
  sol.x = Vector::Zero(n);
  for (Eigen::Index j = 0; j < K; ++j) {
    sol.v.push_back(v.segment(j * n, n));
    sol.x += omega[static_cast<std::size_t>(j)] * sol.v.back();
  }
  return sol;
}

}  // namespace

AffineMap AffineMap::identity(Eigen::Index n) { return {Matrix::Identity(n, n), Vector::Zero(n)}; }

AffineMap AffineMap::compose(const AffineMap& inner) const {
  return {linear * inner.linear, linear * inner.offset + offset};
}

double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

double min_symmetric_eigenvalue(const Matrix& m) {
  const Matrix sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

Matrix MatrixInstance::range_projector() const { return A.transpose() * A / double(factor * factor); }
Matrix MatrixInstance::null_projector() const { return identity(n) - range_projector(); }

Matrix random_matrix_with_norm(Eigen::Index n, double target, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Matrix e = random_gaussian(n, n, rng);
  return e * (target / spectral_norm(e));
}

MatrixInstance make_instance(int factor, Shape hr_shape, double sigma2, double r_deviation, std::uint64_t seed) {
  check_dimension(hr_shape.size());
  check_divisible(hr_shape, factor);
  if (!(sigma2 >= 0)) throw RefusalError("sigma2 must be non-negative");
  MatrixInstance inst;
  inst.factor = factor;
  inst.hr_shape = hr_shape;
  inst.n = hr_shape.size();
  inst.seed = seed;
  inst.A = materialize([factor](const Image& x) { return block_sum(x, factor); }, hr_shape);
  inst.R = identity(inst.n);
  if (r_deviation > 0) inst.R += random_matrix_with_norm(inst.n, r_deviation, seed ^ 0x9e3779b97f4a7c15ULL);
  inst.r_deviation = spectral_norm(inst.R - identity(inst.n));
  std::mt19937_64 rng(seed);
  inst.y = random_vector(inst.A.rows(), rng);
  inst.sigma2 = sigma2;
  inst.r = 1.0 / (1.0 + sigma2 * factor * factor);
  inst.W = sigma2 * inst.A.transpose() * inst.A;
  return inst;
}

MonotoneOperatorSpec MonotoneOperatorSpec::from(AffineMap phi) {
  const Matrix& P = phi.linear;
  if (P.rows() != P.cols() || phi.offset.size() != P.rows()) throw ShapeError("phi: inconsistent dimensions");
  if ((P - P.transpose()).norm() > 1e-12 * std::max(1.0, P.norm())) throw RefusalError("phi: P is not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(P, Eigen::EigenvaluesOnly);
  MonotoneOperatorSpec spec;
  spec.strong_m = eig.eigenvalues().minCoeff();
  spec.lipschitz_k = eig.eigenvalues().maxCoeff();
  if (!(spec.strong_m > 0)) throw RefusalError("phi: P is not positive definite (min eigenvalue " + fmt(spec.strong_m) + ")");
  spec.phi = std::move(phi);
  return spec;
}

MonotoneOperatorSpec MonotoneOperatorSpec::random_spd(Eigen::Index n, double min_eig, double max_eig,
                                                      std::uint64_t seed) {
  check_dimension(n);
  std::mt19937_64 rng(seed);
  const Matrix q = random_orthogonal(n, rng);
  std::uniform_real_distribution<double> eig(min_eig, max_eig);
  Vector lambda(n);
  for (Eigen::Index i = 0; i < n; ++i) lambda(i) = eig(rng);
  Matrix P = q * lambda.asDiagonal() * q.transpose();
  P = 0.5 * (P + P.transpose());
  return from({P, random_vector(n, rng)});
}

AffineMap resolvent(const AffineMap& phi) {
  const Eigen::Index n = phi.dim();
  if (min_symmetric_eigenvalue(phi.linear) < -1e-12) throw RefusalError("resolvent: phi is not monotone");
  const Matrix inv = checked_inverse(identity(n) + phi.linear, "I + P");
  return {inv, -inv * phi.offset};
}

AffineMap resolvent(const MonotoneOperatorSpec& spec) { return resolvent(spec.phi); }

AffineMap gradient_f(const MatrixInstance& inst) { return {inst.W, -inst.p()}; }

AffineMap standard_update(const MatrixInstance& inst) { return resolvent(gradient_f(inst)); }

AffineMap rap_update(const MatrixInstance& inst) {
  const Matrix rR = inst.r * inst.R;
  return {identity(inst.n) - rR * inst.W, rR * inst.p()};
}

TwoFormsReport prox_two_forms_check(const MatrixInstance& inst) {
  const AffineMap implicit_form = standard_update(inst);
  const AffineMap explicit_form{identity(inst.n) - inst.r * inst.W, inst.r * inst.p()};
  return {spectral_norm(implicit_form.linear - explicit_form.linear),
          (implicit_form.offset - explicit_form.offset).norm()};
}

TildeRReport build_tilde_R(const MatrixInstance& inst) {
  const double l2 = double(inst.factor) * inst.factor;
  if (!(inst.sigma2 < 1.0 / l2))
    throw RefusalError("build_tilde_R: hypothesis sigma2 < 1/L^2 violated (sigma2 = " + fmt(inst.sigma2) + ")");
  const Matrix I = identity(inst.n);
  const Matrix rWR = inst.r * inst.W * inst.R;
  const double contraction = spectral_norm(rWR);
  if (!(contraction < 1.0))
    throw RefusalError("build_tilde_R: hypothesis |rWR| < 1 violated (" + fmt(contraction) + ")");

  const Matrix range = inst.range_projector();
  const Matrix null = I - range;
  TildeRReport rep;
  rep.tilde_R = inst.r * inst.R * checked_inverse(I - rWR, "I - rWR") * range + inst.R * null;

  // (I - rR grad f) against (I + R~ grad f)^{-1}, grad f(x) = W x - p.
  const AffineMap lhs = rap_update(inst);
  const Matrix resolvent_inv = checked_inverse(I + rep.tilde_R * inst.W, "I + R~W");
  const AffineMap rhs{resolvent_inv, resolvent_inv * rep.tilde_R * inst.p()};
  rep.resolvent_residual =
      std::max(spectral_norm(lhs.linear - rhs.linear), (lhs.offset - rhs.offset).norm());
  rep.range_equation_residual = spectral_norm((rep.tilde_R * (I - rWR) - inst.r * inst.R) * range);
  rep.psd_min_eigenvalue = min_symmetric_eigenvalue(rep.tilde_R * inst.A.transpose() * inst.A);
  rep.deviation = spectral_norm(rep.tilde_R - I);
  return rep;
}

PhiRReport build_phi_R(const MatrixInstance& inst, const MonotoneOperatorSpec& phi) {
  if (phi.phi.dim() != inst.n) throw ShapeError("build_phi_R: phi dimension does not match instance");
  const TildeRReport tr = build_tilde_R(inst);
  const Matrix I = identity(inst.n);
  const Matrix tilde_inv = checked_inverse(tr.tilde_R, "R~");
  const Matrix& P = phi.phi.linear;
  const Vector& c = phi.phi.offset;

  PhiRReport rep;
  rep.monotonicity_margin = min_symmetric_eigenvalue(tilde_inv * P);
  if (!(rep.monotonicity_margin > 0))
    throw RefusalError("build_phi_R: R~^{-1} phi is not monotone (margin " + fmt(rep.monotonicity_margin) + ")");

  // (I + R~^{-1} phi)^{-1}(x) = M (x - R~^{-1} c) with M = (I + R~^{-1} P)^{-1}
  const Matrix M = checked_inverse(I + tilde_inv * P, "I + R~^{-1}P");
  const AffineMap modified{M, -M * tilde_inv * c};
  const AffineMap i_plus_phi{I + P, c};
  rep.phi_R = i_plus_phi.compose(modified);

  const AffineMap composed = resolvent(phi).compose(rep.phi_R);
  rep.composition_residual =
      std::max(spectral_norm(composed.linear - modified.linear), (composed.offset - modified.offset).norm());
  rep.lip_phi_minus_identity = spectral_norm(rep.phi_R.linear - I);
  return rep;
}

EquilibriumSolution solve_linear_equilibrium(const std::vector<AffineMap>& agents, const std::vector<double>& mu) {
  if (agents.empty() || agents.size() != mu.size()) throw RefusalError("agents and weights differ in count");
  const Eigen::Index n = agents.front().dim();
  std::vector<Matrix> omega;
  for (double m : mu) omega.push_back(m * identity(n));
  return solve_matrix_weighted(agents, omega);
}

Theorem1Problem random_theorem1_problem(int K, Eigen::Index n, double r_deviation, std::uint64_t seed) {
  check_dimension(n);
  Theorem1Problem prob;
  prob.seed = seed;
  std::mt19937_64 rng(seed);
  for (int i = 0; i < K; ++i) {
    const auto sub = rng();
    auto spd = MonotoneOperatorSpec::random_spd(n, 0.5, 2.0, sub);
    prob.fs.push_back({spd.phi.linear, random_vector(n, rng)});
    prob.Rs.push_back(identity(n) + random_matrix_with_norm(n, r_deviation, rng()));
  }
  return prob;
}

Theorem1Report verify_theorem1(const std::vector<QuadraticFunction>& fs, const std::vector<Matrix>& Rs,
                               std::uint64_t seed) {
  if (fs.size() < 2 || fs.size() != Rs.size()) throw RefusalError("theorem 1 needs K >= 2 functions and matrices");
  const Eigen::Index n = fs.front().a.size();
  check_dimension(n);
  const Matrix I = identity(n);
  Matrix r_sum = Matrix::Zero(n, n);
  for (std::size_t i = 0; i < fs.size(); ++i) {
    if (min_symmetric_eigenvalue(fs[i].Q) < -1e-12) throw RefusalError("theorem 1: f_i is not convex");
    if (min_symmetric_eigenvalue(Rs[i] * fs[i].Q) < -1e-12)
      throw RefusalError("theorem 1: R_i grad f_i is not monotone for i = " + std::to_string(i));
    r_sum += Rs[i];
  }
  const Matrix r_sum_inv = checked_inverse(r_sum, "sum of R_i");

  const auto K = fs.size();
  std::vector<AffineMap> relaxed, plain;
  std::vector<Matrix> uniform, matrix_weights;
  for (std::size_t i = 0; i < K; ++i) {
    // (I + R Q)^{-1}(v + R Q a) solves x = v - R grad f(x)
    const Matrix RQ = Rs[i] * fs[i].Q;
    const Matrix inv_r = checked_inverse(I + RQ, "I + R_i Q_i");
    relaxed.push_back({inv_r, inv_r * RQ * fs[i].a});
    const Matrix inv = checked_inverse(I + fs[i].Q, "I + Q_i");
    plain.push_back({inv, inv * fs[i].Q * fs[i].a});
    uniform.push_back(I / double(K));
    matrix_weights.push_back(r_sum_inv * Rs[i]);
  }
  const EquilibriumSolution s1 = solve_matrix_weighted(relaxed, uniform);
  const EquilibriumSolution s2 = solve_matrix_weighted(plain, matrix_weights);

  Theorem1Report rep;
  rep.seed = seed;
  rep.x_rap_average = s1.x;
  rep.x_plain_weighted = plain.front()(s2.v.front());
  rep.solution_gap = (rep.x_rap_average - rep.x_plain_weighted).norm();
  Vector stationarity = Vector::Zero(n);
  for (std::size_t i = 0; i < K; ++i) stationarity += Rs[i] * fs[i].gradient(rep.x_rap_average);
  rep.stationarity_residual = stationarity.norm();
  return rep;
}

Theorem2Report verify_theorem2(const MatrixInstance& inst, const MonotoneOperatorSpec& phi) {
  const PhiRReport pr = build_phi_R(inst, phi);
  const AffineMap H = resolvent(phi);
  const std::vector<double> half{0.5, 0.5};
  const EquilibriumSolution rap = solve_linear_equilibrium({rap_update(inst), H}, half);
  const EquilibriumSolution modified = solve_linear_equilibrium({standard_update(inst), H.compose(pr.phi_R)}, half);
  Theorem2Report rep;
  rep.seed = inst.seed;
  rep.x_rap = rap.x;
  rep.x_modified = modified.x;
  rep.solution_gap = (rap.x - modified.x).norm();
  rep.lip_phi_minus_identity = pr.lip_phi_minus_identity;
  return rep;
}

Theorem3Problem random_theorem3_problem(Eigen::Index n, std::uint64_t seed) {
  check_dimension(n);
  std::mt19937_64 rng(seed);
  Theorem3Problem prob;
  prob.seed = seed;
  prob.V = identity(n) + random_matrix_with_norm(n, 0.3, rng());
  std::uniform_real_distribution<double> eig(0.05, 1.0);
  prob.lambda.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) prob.lambda(i) = eig(rng);
  prob.q = random_vector(n, rng);
  const Matrix hatted = 0.5 * (identity(n) + random_matrix_with_norm(n, 0.9, rng()));
  prob.H = {prob.V * hatted * prob.V.inverse(), random_vector(n, rng)};
  return prob;
}

Theorem3Report verify_theorem3(const Matrix& V, const Vector& lambda, const Vector& q, const AffineMap& H,
                               const Theorem3Config& config) {
  const Eigen::Index n = lambda.size();
  check_dimension(n);
  if (V.rows() != n || V.cols() != n || q.size() != n || H.dim() != n) throw ShapeError("theorem 3: dimension mismatch");
  if ((lambda.array() <= 0).any() || (lambda.array() > 1).any())
    throw RefusalError("theorem 3: eigenvalues of W must lie in (0, 1]");
  const Matrix V_inv = checked_inverse(V, "V");
  const Matrix W = V * lambda.asDiagonal() * V_inv;

  Theorem3Report rep;
  const Matrix hatted = V_inv * W * V;
  rep.hatted_symmetry_residual = (hatted - hatted.transpose()).norm();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (hatted + hatted.transpose()), Eigen::EigenvaluesOnly);
  rep.hatted_min_eigenvalue = eig.eigenvalues().minCoeff();
  rep.hatted_max_eigenvalue = eig.eigenvalues().maxCoeff();
  if (rep.hatted_symmetry_residual > 1e-8 || rep.hatted_min_eigenvalue <= 0 || rep.hatted_max_eigenvalue > 1 + 1e-10)
    throw RefusalError("theorem 3: hatted forward map is not a symmetric map with spectrum in (0, 1]");
  rep.hatted_h_norm = spectral_norm(V_inv * H.linear * V);
  if (rep.hatted_h_norm > 1 + 1e-12)
    throw RefusalError("theorem 3: V^{-1} H V is expansive (norm " + fmt(rep.hatted_h_norm) + ")");

  auto as_agent = [n](const AffineMap& m, std::string name) {
    Agent a;
    a.name = std::move(name);
    a.map = [m, n](const Image& v) {
      const Vector out = m(Eigen::Map<const Vector>(v.data(), n));
      return from_vector(out, {n, 1});
    };
    return a;
  };
  const std::vector<Agent> agents{as_agent({W, q}, "forward"), as_agent(H, "prior")};
  MaceConfig cfg;
  cfg.rho = config.rho;
  cfg.max_iters = config.max_iters;
  cfg.tol = config.tol;
  cfg.sigma_n = 1.0;
  const Image x0 = Image::Ones(n, 1);
  const SolveReport solve = mace_solve(agents, x0, {0.5, 0.5}, cfg);
  rep.converged = solve.converged;
  rep.iterations = solve.iterations_run;
  rep.trace = solve.convergence_trace;
  rep.fixed_point = as_vector(solve.final_image);
  return rep;
}

LipschitzInverseReport lipschitz_inverse_check(const Matrix& psi) {
  check_dimension(psi.rows());
  LipschitzInverseReport rep;
  rep.alpha = spectral_norm(psi);
  if (!(rep.alpha < 1)) throw RefusalError("lipschitz_inverse_check: Lip(psi) = " + fmt(rep.alpha) + " >= 1");
  const Matrix I = identity(psi.rows());
  const Matrix inv = checked_inverse(I + psi, "I + psi");
  rep.lip_inverse = spectral_norm(inv);
  rep.bound_inverse = 1.0 / (1.0 - rep.alpha);
  rep.lip_complement = spectral_norm(I - inv);
  rep.bound_complement = rep.alpha / (1.0 - rep.alpha);
  return rep;
}

std::vector<VerificationRecord> run_verification_suite(std::uint64_t base_seed) {
  std::vector<VerificationRecord> out;
  auto add = [&](std::string check, std::uint64_t seed, std::string param, double value, double threshold) {
    out.push_back({std::move(check), seed, std::move(param), value, threshold, value < threshold});
  };
  const Shape grid{4, 4};

  for (std::uint64_t k = 0; k < 10; ++k) {
    const auto seed = base_seed + k;
    const auto inst = make_instance(2, grid, 0.05 + 0.02 * double(k), 0.0, seed);
    add("prox_two_forms", seed, "sigma2=" + fmt(inst.sigma2), prox_two_forms_check(inst).residual(), 1e-10);
  }
  {
    const auto inst = make_instance(2, grid, 0.2, 0.0, base_seed);
    add("tilde_R_identity", base_seed, "|R-I|=0", build_tilde_R(inst).deviation, 1e-10);
  }
  for (double dev : {0.01, 0.05, 0.1}) {
    const auto seed = base_seed + static_cast<std::uint64_t>(dev * 1000);
    const auto rep = build_tilde_R(make_instance(2, grid, 0.2, dev, seed));
    add("tilde_R_resolvent", seed, "|R-I|=" + fmt(dev), rep.resolvent_residual, 1e-8);
    add("tilde_R_psd", seed, "|R-I|=" + fmt(dev), -rep.psd_min_eigenvalue, 1e-10);
  }
  for (int K : {2, 3})
    for (std::uint64_t k = 0; k < 25; ++k) {
      const auto seed = base_seed + 100 * static_cast<std::uint64_t>(K) + k;
      const auto prob = random_theorem1_problem(K, 8, 0.05, seed);
      const auto rep = verify_theorem1(prob.fs, prob.Rs, seed);
      add("theorem1_gap", seed, "K=" + std::to_string(K), rep.solution_gap, 1e-8);
      add("theorem1_stationarity", seed, "K=" + std::to_string(K), rep.stationarity_residual, 1e-8);
    }
  for (std::uint64_t k = 0; k < 25; ++k) {
    const auto seed = base_seed + 500 + k;
    const double dev = 0.01 + 0.09 * double(k % 5) / 4.0;
    const auto inst = make_instance(2, grid, 0.2, dev, seed);
    const auto phi = MonotoneOperatorSpec::random_spd(inst.n, 0.5, 2.0, seed + 1);
    add("theorem2_gap", seed, "|R-I|=" + fmt(dev), verify_theorem2(inst, phi).solution_gap, 1e-8);
  }
  for (std::uint64_t k = 0; k < 25; ++k) {
    const auto seed = base_seed + 700 + k;
    const auto prob = random_theorem3_problem(16, seed);
    const auto rep = verify_theorem3(prob.V, prob.lambda, prob.q, prob.H);
    add("theorem3_final_error", seed, "iters=" + std::to_string(rep.iterations), rep.trace.back(), 1e-6);
  }
  for (double alpha : {0.2, 0.5, 0.8}) {
    const auto seed = base_seed + 900 + static_cast<std::uint64_t>(alpha * 10);
    const auto rep = lipschitz_inverse_check(random_matrix_with_norm(8, alpha, seed));
    add("lipschitz_inverse_slack", seed, "alpha=" + fmt(alpha),
        std::max(rep.lip_inverse - rep.bound_inverse, rep.lip_complement - rep.bound_complement), 1e-12);
  }
  return out;
}

}  // namespace mdf::theory
