#include "pnp/solve.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/core.h>

namespace pnp {

Preconditioner::Kind parse_preconditioner_kind(std::string const &name)
{
  if (name == "identity" || name == "id") {
    return Preconditioner::Kind::identity;
  }
  if (name == "f1") {
    return Preconditioner::Kind::f1;
  }
  if (name == "chebyshev" || name == "cheb") {
    return Preconditioner::Kind::chebyshev;
  }
  throw InvalidArgument(fmt::format("unknown preconditioner '{}'", name));
}

std::string to_string(Preconditioner::Kind kind)
{
  switch (kind) {
  case Preconditioner::Kind::identity:
    return "identity";
  case Preconditioner::Kind::f1:
    return "f1";
  case Preconditioner::Kind::chebyshev:
    return "chebyshev";
  }
  return "unknown";
}

double preconditioner_polynomial(Preconditioner::Kind kind, double alpha, double lambda)
{
  switch (kind) {
  case Preconditioner::Kind::identity:
    return 1.0;
  case Preconditioner::Kind::f1:
    return 2.0 - alpha * lambda;
  case Preconditioner::Kind::chebyshev:
    return 4.0 - (10.0 / 3.0) * lambda;
  }
  return 1.0;
}

double spectral_radius_scan(Preconditioner::Kind kind, double alpha, std::span<double const> grid)
{
  if (grid.empty()) {
    throw InvalidArgument("spectral_radius_scan: empty grid");
  }
  double worst = 0.0;
  for (double lambda : grid) {
    worst = std::max(worst, std::abs(1.0 - preconditioner_polynomial(kind, alpha, lambda) * lambda));
  }
  return worst;
}

ComplexImage apply_preconditioner(Preconditioner const &p, ForwardModel const &model, ComplexImage const &v)
{
  model.check_image(v, "apply_preconditioner");
  if (p.kind == Preconditioner::Kind::identity) {
    return v;
  }
  if (!(p.lambda_max > 0.0)) {
    throw InvalidArgument("apply_preconditioner: lambda_max must be positive");
  }
  double const c0 = p.kind == Preconditioner::Kind::f1 ? 2.0 : 4.0;
  double const c1 = p.kind == Preconditioner::Kind::f1 ? p.alpha : 10.0 / 3.0;
  ComplexImage out = model.normal(v);
  out *= -c1 / p.lambda_max;
  axpy(c0, v, out);
  return out;
}

cplx weighted_inner_product(ComplexImage const &a, ComplexImage const &b, Preconditioner const &p,
                            ForwardModel const &model)
{
  return weighted_inner_product(a, b, [&](ComplexImage const &v) { return apply_preconditioner(p, model, v); });
}

CgResult conjugate_gradient(LinearMap const &op, ComplexImage const &rhs, ComplexImage x0, double tol, int max_iter)
{
  require_same_shape(rhs, x0, "conjugate_gradient");
  CgResult res;
  double const bnorm = image_norm(rhs);
  if (bnorm == 0.0) {
    res.solution = ComplexImage(rhs.shape());
    res.converged = true;
    return res;
  }
  ComplexImage x = std::move(x0);
  ComplexImage r = rhs - op(x);
  ComplexImage p = r;
  double rs = std::pow(image_norm(r), 2);
  res.relative_residual = std::sqrt(rs) / bnorm;
  if (res.relative_residual <= tol) {
    res.solution = std::move(x);
    res.converged = true;
    return res;
  }
  for (int it = 1; it <= max_iter; ++it) {
    ComplexImage ap = op(p);
    double const curv = inner_product(p, ap).real();
    if (!(curv > 0.0)) {
      throw SolverError(fmt::format("conjugate_gradient: nonpositive curvature {} at iteration {}", curv, it));
    }
    double const alpha = rs / curv;
    axpy(alpha, p, x);
    axpy(-alpha, ap, r);
    double const rs_new = std::pow(image_norm(r), 2);
    res.iterations = it;
    res.relative_residual = std::sqrt(rs_new) / bnorm;
    if (res.relative_residual <= tol) {
      res.converged = true;
      break;
    }
    double const beta = rs_new / rs;
    rs = rs_new;
    p *= beta;
    p += r;
  }
  res.solution = std::move(x);
  return res;
}

CgResult prox_f_metric(DataTerm const &data, ComplexImage const &x, double gamma, Preconditioner const &p, double tol,
                       int max_iter, ComplexImage const *start)
{
  if (!(gamma > 0.0)) {
    throw InvalidArgument("prox_f_metric: gamma must be positive");
  }
  auto const &model = data.model();
  model.check_image(x, "prox_f_metric");
  ComplexImage rhs = apply_preconditioner(p, model, x);
  axpy(gamma, data.adjoint_data(), rhs);
  LinearMap op;
  if (p.kind == Preconditioner::Kind::identity) {
    op = [&](ComplexImage const &v) {
      ComplexImage out = model.normal(v);
      out *= gamma;
      out += v;
      return out;
    };
  } else {
    // gamma A^H A + c0 - c1 A^H A / lambda_max folds into one normal-operator call.
    double const c0 = p.kind == Preconditioner::Kind::f1 ? 2.0 : 4.0;
    double const c1 = p.kind == Preconditioner::Kind::f1 ? p.alpha : 10.0 / 3.0;
    double const coeff = gamma - c1 / p.lambda_max;
    op = [&model, c0, coeff](ComplexImage const &v) {
      ComplexImage out = model.normal(v);
      out *= coeff;
      axpy(c0, v, out);
      return out;
    };
  }
  return conjugate_gradient(op, rhs, start ? *start : x, tol, max_iter);
}

CgResult prox_f_metric(ForwardModel const &model, MulticoilKSpace const &y, ComplexImage const &x, double gamma,
                       Preconditioner const &p, double tol, int max_iter)
{
  DataTerm data(model, y);
  return prox_f_metric(data, x, gamma, p, tol, max_iter);
}

void AnnealingSchedule::validate() const
{
  if (iterations < 1) {
    throw InvalidArgument("AnnealingSchedule: iterations must be >= 1");
  }
  if (!(sigma0 > 0.0) || !(sigma_min > 0.0) || !(lambda > 0.0)) {
    throw InvalidArgument("AnnealingSchedule: sigma0, sigma_min and lambda must be positive");
  }
  if (iterations > 1 && !(sigma_min < sigma0)) {
    throw InvalidArgument("AnnealingSchedule: sigma_min must be below sigma0");
  }
}

double AnnealingSchedule::ratio() const
{
  if (iterations < 2) {
    return 1.0;
  }
  return std::pow(sigma_min / sigma0, 1.0 / static_cast<double>(iterations - 1));
}

double AnnealingSchedule::sigma(int k) const
{
  if (k <= 0) {
    return sigma0;
  }
  if (k >= iterations - 1) {
    return sigma_min;
  }
  return sigma0 * std::pow(ratio(), static_cast<double>(k));
}

Algorithm parse_algorithm(std::string const &name)
{
  if (name == "pnp_pgd") {
    return Algorithm::pnp_pgd;
  }
  if (name == "pnp_hqs") {
    return Algorithm::pnp_hqs;
  }
  if (name == "fista_wavelet") {
    return Algorithm::fista_wavelet;
  }
  if (name == "ista_wavelet") {
    return Algorithm::ista_wavelet;
  }
  if (name == "adjoint" || name == "zero_filled") {
    return Algorithm::adjoint;
  }
  throw InvalidArgument(fmt::format("unknown algorithm '{}'", name));
}

std::string to_string(Algorithm a)
{
  switch (a) {
  case Algorithm::pnp_pgd:
    return "pnp_pgd";
  case Algorithm::pnp_hqs:
    return "pnp_hqs";
  case Algorithm::fista_wavelet:
    return "fista_wavelet";
  case Algorithm::ista_wavelet:
    return "ista_wavelet";
  case Algorithm::adjoint:
    return "adjoint";
  }
  return "unknown";
}

void SolverConfig::validate() const
{
  if (iterations < 1) {
    throw InvalidArgument("SolverConfig: iterations must be >= 1");
  }
  if (!(cg_tol > 0.0) || cg_max_iter < 1) {
    throw InvalidArgument("SolverConfig: inner tolerance must be positive and max iterations >= 1");
  }
  if (!(gamma > 0.0) || !(sigma >= 0.0)) {
    throw InvalidArgument("SolverConfig: requires gamma > 0 and sigma >= 0");
  }
  if ((algorithm == Algorithm::fista_wavelet || algorithm == Algorithm::ista_wavelet) && !(lambda_reg >= 0.0)) {
    throw InvalidArgument("SolverConfig: lambda_reg must be nonnegative");
  }
  if (schedule) {
    schedule->validate();
  }
}

ComplexImage zero_filled_adjoint(ForwardModel const &model, MulticoilKSpace const &y)
{
  model.check_kspace(y, "zero_filled_adjoint");
  auto w = model.trajectory().density_weights();
  MulticoilKSpace wy = y;
  for (auto &c : wy.coils) {
    for (std::size_t m = 0; m < c.size(); ++m) {
      c[m] *= w[m];
    }
  }
  ComplexImage x = model.adjoint(wy);
  auto const ss = model.smaps().sum_of_squares();
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = ss[i] > 0.0 ? x[i] / ss[i] : cplx{0.0, 0.0};
  }
  // Least-squares scale against the measured data: c = <A x, y> / ||A x||^2.
  auto const ax = model.forward(x);
  cplx num{0.0, 0.0};
  double den = 0.0;
  for (std::size_t l = 0; l < ax.coil_count(); ++l) {
    for (std::size_t m = 0; m < ax.coils[l].size(); ++m) {
      num += std::conj(ax.coils[l][m]) * y.coils[l][m];
      den += std::norm(ax.coils[l][m]);
    }
  }
  if (den > 0.0) {
    x *= num / den;
  }
  return x;
}

namespace {

struct Setup
{
  double lambda_max;
  Preconditioner precond;
  ComplexImage x0;
  std::unique_ptr<Denoiser> owned;
  Denoiser *denoiser;
};

Setup prepare(ForwardModel const &model, MulticoilKSpace const &y, SolverConfig const &cfg, Denoiser *denoiser,
              bool needs_denoiser)
{
  cfg.validate();
  model.check_kspace(y, "solver");
  double const lambda = cfg.lambda_max ? *cfg.lambda_max
                                       : estimate_operator_norm(model, cfg.power_iterations, cfg.power_seed).lambda_max;
  if (!(lambda > 0.0)) {
    throw SolverError("solver: operator norm estimate is not positive");
  }
  Setup s{lambda, Preconditioner{cfg.preconditioner, cfg.alpha, lambda}, ComplexImage(model.shape()), nullptr, denoiser};
  if (cfg.init == Initialization::adjoint) {
    s.x0 = zero_filled_adjoint(model, y);
  }
  if (needs_denoiser && !s.denoiser) {
    s.owned = make_denoiser(cfg.denoiser);
    s.denoiser = s.owned.get();
  }
  return s;
}

bool should_stop(SolverConfig const &cfg, double dx, double xnorm)
{
  return dx <= std::max(cfg.stop_abs, cfg.stop_rel * xnorm);
}

// Effective (gamma_k, sigma_k), gamma divided by lambda_max.
std::pair<double, double> parameters(SolverConfig const &cfg, int k, double lambda_max)
{
  if (cfg.schedule) {
    return {cfg.schedule->gamma(k) / lambda_max, cfg.schedule->sigma(k)};
  }
  return {cfg.gamma / lambda_max, cfg.sigma};
}

int iteration_count(SolverConfig const &cfg) { return cfg.schedule ? cfg.schedule->iterations : cfg.iterations; }

TraceEntry make_entry(int k, double gamma, double sigma, double fidelity, double dx)
{
  TraceEntry e;
  e.k = k;
  e.gamma = gamma;
  e.sigma = sigma;
  e.fidelity = fidelity;
  e.iterate_change = dx;
  return e;
}

void record(SolverTrace &trace, TraceEntry entry, ComplexImage const &x, Monitor const &monitor)
{
  if (monitor) {
    auto m = monitor(x);
    entry.psnr = m.psnr;
    entry.ssim = m.ssim;
  }
  trace.push(entry);
}

void check_finite(ComplexImage const &x, int k, SolverTrace const &trace, char const *who)
{
  if (!x.all_finite()) {
    throw DivergenceError(fmt::format("{}: non-finite iterate at iteration {}", who, k), trace);
  }
}

} // namespace

SolveResult pnp_pgd(ForwardModel const &model, MulticoilKSpace const &y, SolverConfig const &cfg, Denoiser *denoiser,
                    Monitor const &monitor)
{
  auto s = prepare(model, y, cfg, denoiser, true);
  DataTerm data(model, y);
  SolveResult res{s.x0, s.x0, {}, s.lambda_max, false};
  ComplexImage &x = res.x;
  ComplexImage normal_x = model.normal(x);
  int const iters = iteration_count(cfg);
  for (int k = 0; k < iters; ++k) {
    auto const [gamma, sigma] = parameters(cfg, k, s.lambda_max);
    ComplexImage step = apply_preconditioner(s.precond, model, normal_x - data.adjoint_data());
    ComplexImage u = x;
    axpy(-gamma, step, u);
    ComplexImage xn = s.denoiser->denoise(u, sigma);
    check_finite(xn, k, res.trace, "pnp_pgd");
    double const dx = image_norm(xn - x);
    double const xnorm = image_norm(x);
    normal_x = model.normal(xn);
    x = std::move(xn);
    res.u = std::move(u);
    record(res.trace, make_entry(k, gamma, sigma, data.value(x, normal_x), dx), x, monitor);
    if (should_stop(cfg, dx, xnorm)) {
      res.stopped_early = k + 1 < iters;
      break;
    }
  }
  return res;
}

SolveResult pnp_hqs(ForwardModel const &model, MulticoilKSpace const &y, SolverConfig const &cfg, Denoiser *denoiser,
                    Monitor const &monitor)
{
  auto s = prepare(model, y, cfg, denoiser, true);
  DataTerm data(model, y);
  SolveResult res{s.x0, s.x0, {}, s.lambda_max, false};
  ComplexImage &x = res.x;
  int const iters = iteration_count(cfg);
  for (int k = 0; k < iters; ++k) {
    auto const [gamma, sigma] = parameters(cfg, k, s.lambda_max);
    CgResult cg;
    try {
      cg = prox_f_metric(data, x, gamma, s.precond, cfg.cg_tol, cfg.cg_max_iter);
    } catch (SolverError const &e) {
      throw SolverError(fmt::format("pnp_hqs: iteration {}: {}", k, e.what()), res.trace);
    }
    ComplexImage xn = s.denoiser->denoise(cg.solution, sigma);
    check_finite(xn, k, res.trace, "pnp_hqs");
    double const dx = image_norm(xn - x);
    double const xnorm = image_norm(x);
    x = std::move(xn);
    res.u = std::move(cg.solution);
    TraceEntry e = make_entry(k, gamma, sigma, data.value(x), dx);
    e.inner_iterations = cg.iterations;
    e.inner_converged = cg.converged;
    record(res.trace, e, x, monitor);
    if (should_stop(cfg, dx, xnorm)) {
      res.stopped_early = k + 1 < iters;
      break;
    }
  }
  return res;
}

double wavelet_l1(ComplexImage const &x, int levels)
{
  auto const w = haar_forward(x, levels);
  double s = 0.0;
  for (std::size_t r = 0; r < w.height(); ++r) {
    for (std::size_t c = 0; c < w.width(); ++c) {
      if (!in_approximation_band(r, c, w.shape(), levels)) {
        s += std::abs(w(r, c));
      }
    }
  }
  return s;
}

SolveResult fista_wavelet(ForwardModel const &model, MulticoilKSpace const &y, SolverConfig const &cfg,
                          Monitor const &monitor)
{
  auto s = prepare(model, y, cfg, nullptr, false);
  bool const accelerate = cfg.algorithm != Algorithm::ista_wavelet;
  int const levels = cfg.denoiser.levels;
  check_haar_shape(model.shape(), levels);
  DataTerm data(model, y);
  double const gamma = cfg.gamma / s.lambda_max;
  double const thr = gamma * cfg.lambda_reg;
  WaveletDenoiser prox(levels, 1.0);
  auto objective = [&](ComplexImage const &v, ComplexImage const &nv) {
    return data.value(v, nv) + cfg.lambda_reg * wavelet_l1(v, levels);
  };

  SolveResult res{s.x0, s.x0, {}, s.lambda_max, false};
  ComplexImage &x = res.x;
  ComplexImage nx = model.normal(x);
  double fx = objective(x, nx);
  ComplexImage z = x;
  ComplexImage nz = nx;
  double t = 1.0;
  for (int k = 0; k < cfg.iterations; ++k) {
    ComplexImage v = z;
    axpy(-gamma, nz - data.adjoint_data(), v);
    v = prox.denoise(v, thr);
    check_finite(v, k, res.trace, "fista_wavelet");
    ComplexImage nv = model.normal(v);
    double const fv = objective(v, nv);
    ComplexImage const x_prev = x;
    // Monotone variant: keep the previous iterate when the prox step did not descend.
    if (fv <= fx) {
      x = v;
      nx = nv;
      fx = fv;
    }
    double const dx = image_norm(x - x_prev);
    double const xnorm = image_norm(x_prev);
    if (accelerate) {
      double const t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      z = x;
      axpy(t / t_next, v - x, z);
      axpy((t - 1.0) / t_next, x - x_prev, z);
      nz = model.normal(z);
      t = t_next;
    } else {
      z = x;
      nz = nx;
    }
    res.u = std::move(v);
    TraceEntry e = make_entry(k, gamma, thr, data.value(x, nx), dx);
    e.objective = fx;
    record(res.trace, e, x, monitor);
    if (dx > 0.0 && should_stop(cfg, dx, xnorm)) {
      res.stopped_early = k + 1 < cfg.iterations;
      break;
    }
  }
  return res;
}

SolveResult solve(ForwardModel const &model, MulticoilKSpace const &y, SolverConfig const &cfg, Denoiser *denoiser,
                  Monitor const &monitor)
{
  switch (cfg.algorithm) {
  case Algorithm::pnp_pgd:
    return pnp_pgd(model, y, cfg, denoiser, monitor);
  case Algorithm::pnp_hqs:
    return pnp_hqs(model, y, cfg, denoiser, monitor);
  case Algorithm::fista_wavelet:
  case Algorithm::ista_wavelet:
    return fista_wavelet(model, y, cfg, monitor);
  case Algorithm::adjoint: {
    cfg.validate();
    SolveResult res;
    res.x = zero_filled_adjoint(model, y);
    res.u = res.x;
    DataTerm data(model, y);
    record(res.trace, make_entry(0, 1.0, 0.0, data.value(res.x), 0.0), res.x, monitor);
    return res;
  }
  }
  throw InvalidArgument("solve: bad algorithm");
}

} // namespace pnp
