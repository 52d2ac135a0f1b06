#pragma once

// Dense-matrix certification of the relaxed-adjoint equivalence and convergence results.
//
// Everything here works with affine maps x -> Px + c on small dimensions (n <= 64) so every
// resolvent is a linear solve and every Lipschitz constant a spectral norm. Each check
// asserts its hypotheses numerically first and throws RefusalError when one fails.

#include "mdf/core.hpp"

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

namespace mdf::theory {

inline constexpr Eigen::Index kMaxDimension = 64;

struct AffineMap {
  Matrix linear;
  Vector offset;

  static AffineMap identity(Eigen::Index n);
  Eigen::Index dim() const { return linear.rows(); }
  Vector operator()(const Vector& x) const { return linear * x + offset; }
  // (*this) o (inner)
  AffineMap compose(const AffineMap& inner) const;
};

double spectral_norm(const Matrix& m);
// Smallest eigenvalue of the symmetric part (m + m^T) / 2.
double min_symmetric_eigenvalue(const Matrix& m);

// Block-sum data term on a tiny image grid plus a matrix R near the identity.
struct MatrixInstance {
  int factor = 2;
  Shape hr_shape;
  Eigen::Index n = 0;
  Matrix A;  // M x n block-sum matrix
  Matrix R;  // n x n
  Vector y;  // measurement in the f = (sigma2/2)|y - Ax|^2 parameterization
  double sigma2 = 0.0;
  double r = 1.0;  // 1 / (1 + sigma2 L^2)
  Matrix W;        // sigma2 A^T A
  double r_deviation = 0.0;  // |R - I|_2 as constructed
  std::uint64_t seed = 0;

  Vector p() const { return sigma2 * A.transpose() * y; }  // grad f(x) = W x - p
  Matrix range_projector() const;                          // onto range(A^T)
  Matrix null_projector() const;                           // onto null(A)
};

// Random instance with |R - I|_2 == r_deviation exactly. R = I when r_deviation == 0.
MatrixInstance make_instance(int factor, Shape hr_shape, double sigma2, double r_deviation, std::uint64_t seed);

// Random n x n matrix E scaled so |E|_2 == target.
Matrix random_matrix_with_norm(Eigen::Index n, double target, std::uint64_t seed);

// phi(x) = P x + c with P symmetric positive definite.
struct MonotoneOperatorSpec {
  AffineMap phi;
  double lipschitz_k = 0.0;
  double strong_m = 0.0;

  static MonotoneOperatorSpec from(AffineMap phi);
  static MonotoneOperatorSpec random_spd(Eigen::Index n, double min_eig, double max_eig, std::uint64_t seed);
};

// (I + phi)^{-1}: x -> (I + P)^{-1}(x - c). Refuses when P is not monotone.
AffineMap resolvent(const MonotoneOperatorSpec& spec);
AffineMap resolvent(const AffineMap& phi);

// | (I + grad f)^{-1} - (I - r grad f) | over linear parts and offsets.
struct TwoFormsReport {
  double linear_residual = 0.0;
  double offset_residual = 0.0;
  double residual() const { return std::max(linear_residual, offset_residual); }
};
TwoFormsReport prox_two_forms_check(const MatrixInstance& inst);

struct TildeRReport {
  Matrix tilde_R;
  double resolvent_residual = 0.0;   // (I - rR grad f) vs (I + R~ grad f)^{-1}
  double range_equation_residual = 0.0;  // |(R~(I - rWR) - rR) P_range|
  double psd_min_eigenvalue = 0.0;   // of the symmetric part of R~ A^T A
  double deviation = 0.0;            // |R~ - I|_2
};
// Requires sigma2 < 1/L^2 and |r W R| < 1.
TildeRReport build_tilde_R(const MatrixInstance& inst);

struct PhiRReport {
  AffineMap phi_R;
  double composition_residual = 0.0;  // (I+phi)^{-1} o Phi_R vs (I + R~^{-1} phi)^{-1}
  double lip_phi_minus_identity = 0.0;
  double monotonicity_margin = 0.0;   // min eig of sym(R~^{-1} P)
};
PhiRReport build_phi_R(const MatrixInstance& inst, const MonotoneOperatorSpec& phi);

// Agents built from an instance.
AffineMap gradient_f(const MatrixInstance& inst);  // x -> W x - p
AffineMap standard_update(const MatrixInstance& inst);  // (I + grad f)^{-1}
AffineMap rap_update(const MatrixInstance& inst);       // x - r R grad f(x)

// Consensus x* of affine agents F_i with weights mu, from the linear system F_i(v_i) = mean_mu(v).
struct EquilibriumSolution {
  std::vector<Vector> v;
  Vector x;
};
EquilibriumSolution solve_linear_equilibrium(const std::vector<AffineMap>& agents, const std::vector<double>& mu);

struct QuadraticFunction {  // f(x) = 1/2 (x - a)^T Q (x - a)
  Matrix Q;
  Vector a;
  Vector gradient(const Vector& x) const { return Q * (x - a); }
};

struct Theorem1Report {
  Vector x_rap_average;      // consensus of (F^R, G)
  Vector x_plain_weighted;   // consensus of (F, G^R)
  double solution_gap = 0.0;
  double stationarity_residual = 0.0;  // |sum_i R_i grad f_i(x*)|
  std::uint64_t seed = 0;
};
Theorem1Report verify_theorem1(const std::vector<QuadraticFunction>& fs, const std::vector<Matrix>& Rs,
                               std::uint64_t seed = 0);

// K quadratics with SPD Hessians (eigenvalues in [0.5, 2]) and R_i with |R_i - I|_2 = r_deviation.
struct Theorem1Problem {
  std::vector<QuadraticFunction> fs;
  std::vector<Matrix> Rs;
  std::uint64_t seed = 0;
};
Theorem1Problem random_theorem1_problem(int K, Eigen::Index n, double r_deviation, std::uint64_t seed);

struct Theorem2Report {
  Vector x_rap;       // (RAP update, H), mu = 1/2
  Vector x_modified;  // (standard update, H o Phi_R), mu = 1/2
  double solution_gap = 0.0;
  double lip_phi_minus_identity = 0.0;
  std::uint64_t seed = 0;
};
Theorem2Report verify_theorem2(const MatrixInstance& inst, const MonotoneOperatorSpec& phi);

struct Theorem3Config {
  double rho = 0.5;
  int max_iters = 1000;
  double tol = 1e-6;
};
struct Theorem3Report {
  bool converged = false;
  int iterations = 0;
  std::vector<double> trace;
  double hatted_symmetry_residual = 0.0;  // |Lambda - Lambda^T| of V^{-1} W V
  double hatted_min_eigenvalue = 0.0;
  double hatted_max_eigenvalue = 0.0;
  double hatted_h_norm = 0.0;             // |V^{-1} S V|_2
  Vector fixed_point;
};
// F(x) = W x + q with W = V Lambda V^{-1}; H affine.
Theorem3Report verify_theorem3(const Matrix& V, const Vector& lambda, const Vector& q, const AffineMap& H,
                               const Theorem3Config& config = {});

// W = V diag(lambda) V^{-1} with V = I + E (|E|_2 = 0.3, non-symmetric), lambda uniform in
// [0.05, 1]; H(x) = S x + h with V^{-1} S V = (I + N)/2, |N|_2 = 0.9.
struct Theorem3Problem {
  Matrix V;
  Vector lambda;
  Vector q;
  AffineMap H;
  std::uint64_t seed = 0;
};
Theorem3Problem random_theorem3_problem(Eigen::Index n, std::uint64_t seed);

struct LipschitzInverseReport {
  double alpha = 0.0;
  double lip_inverse = 0.0;        // |(I + psi)^{-1}|
  double bound_inverse = 0.0;      // 1 / (1 - alpha)
  double lip_complement = 0.0;     // |I - (I + psi)^{-1}|
  double bound_complement = 0.0;   // alpha / (1 - alpha)
  bool holds() const { return lip_inverse <= bound_inverse + 1e-12 && lip_complement <= bound_complement + 1e-12; }
};
LipschitzInverseReport lipschitz_inverse_check(const Matrix& psi);

// One row of a verification run, as written to the verify-theory CSV.
struct VerificationRecord {
  std::string check;
  std::uint64_t seed = 0;
  std::string parameter;
  double value = 0.0;
  double threshold = 0.0;
  bool passed = false;
};

// The full suite used by the CLI: fixed seeds, acceptance-sized instance families.
std::vector<VerificationRecord> run_verification_suite(std::uint64_t base_seed = 1);

}  // namespace mdf::theory
