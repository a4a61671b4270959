#pragma once

#include "pnp/core.hpp"
#include "pnp/operators.hpp"
#include "pnp/priors.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>

namespace pnp {

class SolverError : public Error
{
public:
  SolverError(std::string const &what, SolverTrace trace = {})
    : Error(what)
    , trace_{std::move(trace)}
  {
  }
  [[nodiscard]] SolverTrace const &trace() const { return trace_; }

private:
  SolverTrace trace_;
};

class DivergenceError : public SolverError
{
public:
  using SolverError::SolverError;
};

/* Polynomial preconditioners in the normalized operator B = A^H A / lambda_max,
 * whose spectrum lies in [0, 1]:
 *   identity   P = Id
 *   f1         P = 2 - alpha B
 *   chebyshev  P = 4 - 10/3 B */
struct Preconditioner
{
  enum class Kind
  {
    identity,
    f1,
    chebyshev
  };

  Kind kind = Kind::identity;
  double alpha = 1.0;
  double lambda_max = 1.0;
};

Preconditioner::Kind parse_preconditioner_kind(std::string const &name);
std::string to_string(Preconditioner::Kind kind);

ComplexImage apply_preconditioner(Preconditioner const &p, ForwardModel const &model, ComplexImage const &v);
// <a, P b>
cplx weighted_inner_product(ComplexImage const &a, ComplexImage const &b, Preconditioner const &p,
                            ForwardModel const &model);

// P(lambda) for a scalar eigenvalue of B.
double preconditioner_polynomial(Preconditioner::Kind kind, double alpha, double lambda);
// max over the grid of |1 - P(lambda) lambda|
double spectral_radius_scan(Preconditioner::Kind kind, double alpha, std::span<double const> grid);

struct CgResult
{
  ComplexImage solution;
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

// CG for a Hermitian positive-definite operator in the standard inner product.
// Throws SolverError on nonpositive curvature.
CgResult conjugate_gradient(LinearMap const &op, ComplexImage const &rhs, ComplexImage x0, double tol, int max_iter);

/* argmin_u gamma f(u) + 1/2 ||x - u||_P^2, i.e. the solution of
 *   (gamma A^H A + P) u = gamma A^H y + P x
 * by CG, warm-started from `start` (x when absent). */
CgResult prox_f_metric(DataTerm const &data, ComplexImage const &x, double gamma, Preconditioner const &p, double tol,
                       int max_iter, ComplexImage const *start = nullptr);
CgResult prox_f_metric(ForwardModel const &model, MulticoilKSpace const &y, ComplexImage const &x, double gamma,
                       Preconditioner const &p, double tol, int max_iter);

// sigma_k = sigma0 xi^k, xi = (sigma_min / sigma0)^(1 / (K - 1)); gamma_k = lambda sigma_k.
struct AnnealingSchedule
{
  double sigma0 = 1.0;
  double sigma_min = 0.1;
  int iterations = 100;
  double lambda = 1.0;

  void validate() const;
  [[nodiscard]] double ratio() const;
  [[nodiscard]] double sigma(int k) const;
  [[nodiscard]] double gamma(int k) const { return lambda * sigma(k); }
};

enum class Algorithm
{
  pnp_pgd,
  pnp_hqs,
  fista_wavelet,
  ista_wavelet,
  adjoint
};

Algorithm parse_algorithm(std::string const &name);
std::string to_string(Algorithm a);

enum class Initialization
{
  adjoint,
  zero
};

struct SolverConfig
{
  Algorithm algorithm = Algorithm::pnp_hqs;
  Preconditioner::Kind preconditioner = Preconditioner::Kind::identity;
  double alpha = 1.0;
  DenoiserSpec denoiser;
  // Step sizes are expressed for the normalized operator: the effective gamma is
  // gamma / lambda_max.
  std::optional<AnnealingSchedule> schedule;
  double gamma = 1.0;
  double sigma = 0.0;
  // FISTA / ISTA regularization weight on the Haar detail coefficients.
  double lambda_reg = 0.0;
  double cg_tol = 1e-6;
  int cg_max_iter = 50;
  int iterations = 100;
  // Stop when ||x_{k+1} - x_k|| <= max(stop_abs, stop_rel ||x_k||).
  double stop_rel = 1e-9;
  double stop_abs = 0.0;
  Initialization init = Initialization::adjoint;
  int power_iterations = 50;
  std::uint64_t power_seed = 0;
  // Overrides the power-iteration estimate when set.
  std::optional<double> lambda_max;

  void validate() const;
};

struct IterateMetrics
{
  std::optional<double> psnr;
  std::optional<double> ssim;
};

using Monitor = std::function<IterateMetrics(ComplexImage const &)>;

struct SolveResult
{
  ComplexImage x;
  // Last data-consistency iterate (u_K); equals x for algorithms without one.
  ComplexImage u;
  SolverTrace trace;
  double lambda_max = 0.0;
  bool stopped_early = false;
};

// Density-compensated adjoint divided by sum_l |S_l|^2, then scaled by the
// complex factor that best fits the measured data.
ComplexImage zero_filled_adjoint(ForwardModel const &model, MulticoilKSpace const &y);

// The denoiser argument, when given, replaces the one built from cfg.denoiser.
SolveResult pnp_pgd(ForwardModel const &model, MulticoilKSpace const &y, SolverConfig const &cfg,
                    Denoiser *denoiser = nullptr, Monitor const &monitor = {});
SolveResult pnp_hqs(ForwardModel const &model, MulticoilKSpace const &y, SolverConfig const &cfg,
                    Denoiser *denoiser = nullptr, Monitor const &monitor = {});
// Monotone FISTA on f + lambda_reg ||W_detail x||_1 with step 1 / lambda_max.
// Algorithm::ista_wavelet runs the same iteration without momentum.
SolveResult fista_wavelet(ForwardModel const &model, MulticoilKSpace const &y, SolverConfig const &cfg,
                          Monitor const &monitor = {});
// Dispatch on cfg.algorithm.
SolveResult solve(ForwardModel const &model, MulticoilKSpace const &y, SolverConfig const &cfg,
                  Denoiser *denoiser = nullptr, Monitor const &monitor = {});

double wavelet_l1(ComplexImage const &x, int levels);

/* Fixed-point checks for D = prox_g, P = Id, fixed gamma:
 *   PGD x*            x = prox_g(x - gamma df(x))          (minimizer of gamma f + g)
 *   HQS u*            gamma df(u) + u - prox_g(u) = 0      (critical point of gamma f + env g)
 *   HQS x*            x = prox_g(prox_{gamma f}(x))        (critical point of env(gamma f) + g) */
struct Prop1Problem
{
  ForwardModel const *model = nullptr;
  MulticoilKSpace const *y = nullptr;
  std::function<ComplexImage(ComplexImage const &)> prox_g;
};

struct Prop1Report
{
  enum class Status
  {
    pass,
    fail,
    inconclusive
  };

  ComplexImage pgd_x;
  ComplexImage hqs_x;
  ComplexImage hqs_u;
  int pgd_iterations = 0;
  int hqs_iterations = 0;
  bool pgd_stationary = false;
  bool hqs_stationary = false;
  double pgd_residual = 0.0;
  double hqs_u_residual = 0.0;
  double hqs_x_residual = 0.0;
  // The envelope optimality condition evaluated on the x-sequence limit.
  double hqs_x_envelope_residual = 0.0;
  Status status = Status::inconclusive;

  [[nodiscard]] std::string summary() const;
};

Prop1Report verify_proposition1(Prop1Problem const &problem, double gamma, double tol = 1e-8, int max_iter = 100000,
                                double stationarity = 1e-12);

// 1x1 image, one k-space sample at DC, unit coil: f(x) = 1/2 |x - target|^2.
struct ScalarToy
{
  std::unique_ptr<ForwardModel> model;
  MulticoilKSpace y;
  [[nodiscard]] Prop1Problem problem(std::function<ComplexImage(ComplexImage const &)> prox_g) const;
};

ScalarToy make_scalar_toy(double target);

struct GridMinimum
{
  double argmin = 0.0;
  double value = 0.0;
};

// Exhaustive search on lo, lo + step, ..., hi.
GridMinimum grid_minimize(std::function<double(double)> const &fn, double lo, double hi, double step);

struct VerifyCheck
{
  std::string name;
  bool pass = false;
  std::string detail;
};

/* The checks behind `pnp verify`: fixed points on the scalar toy
 * (f = 1/2 (x - 2)^2, g = |.|, gamma = 1) against grid-search oracles, and the
 * spectral-radius ordering chebyshev < f1 < identity on [0.3, 1]. */
std::vector<VerifyCheck> verification_suite();

} // namespace pnp
