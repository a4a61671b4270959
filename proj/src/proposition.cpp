#include "pnp/solve.hpp"

#include <array>
#include <cmath>
#include <limits>

#include <fmt/core.h>

namespace pnp {

std::string Prop1Report::summary() const
{
  char const *s = status == Status::pass ? "pass" : status == Status::fail ? "fail" : "inconclusive";
  return fmt::format("{}: pgd residual {:.3e} ({} its{}), hqs u residual {:.3e}, hqs x residual {:.3e} ({} its{}), "
                     "envelope condition on x {:.3e}",
                     s, pgd_residual, pgd_iterations, pgd_stationary ? "" : ", not stationary", hqs_u_residual,
                     hqs_x_residual, hqs_iterations, hqs_stationary ? "" : ", not stationary", hqs_x_envelope_residual);
}

Prop1Report verify_proposition1(Prop1Problem const &problem, double gamma, double tol, int max_iter,
                                double stationarity)
{
  if (!problem.model || !problem.y || !problem.prox_g) {
    throw InvalidArgument("verify_proposition1: incomplete problem");
  }
  if (!(gamma > 0.0)) {
    throw InvalidArgument("verify_proposition1: gamma must be positive");
  }
  auto const &model = *problem.model;
  DataTerm data(model, *problem.y);
  auto const &prox_g = problem.prox_g;
  Preconditioner const id{};
  int const cg_iters = static_cast<int>(10 * model.shape().size() + 100);
  auto prox_gf = [&](ComplexImage const &x) { return prox_f_metric(data, x, gamma, id, 1e-15, cg_iters).solution; };
  auto grad_step = [&](ComplexImage const &x) {
    ComplexImage v = x;
    axpy(-gamma, data.gradient(x), v);
    return v;
  };

  Prop1Report rep;
  ComplexImage x(model.shape());
  for (int k = 0; k < max_iter; ++k) {
    ComplexImage xn = prox_g(grad_step(x));
    double const dx = image_norm(xn - x);
    x = std::move(xn);
    rep.pgd_iterations = k + 1;
    if (dx <= stationarity) {
      rep.pgd_stationary = true;
      break;
    }
  }
  rep.pgd_x = x;
  rep.pgd_residual = image_norm(x - prox_g(grad_step(x)));

  x = ComplexImage(model.shape());
  ComplexImage u = x;
  for (int k = 0; k < max_iter; ++k) {
    u = prox_gf(x);
    ComplexImage xn = prox_g(u);
    double const dx = image_norm(xn - x);
    x = std::move(xn);
    rep.hqs_iterations = k + 1;
    if (dx <= stationarity) {
      rep.hqs_stationary = true;
      break;
    }
  }
  rep.hqs_x = x;
  rep.hqs_u = u;

  auto envelope_residual = [&](ComplexImage const &v) {
    // gamma df(v) + (v - prox_g(v))
    ComplexImage r = data.gradient(v);
    r *= gamma;
    r += v - prox_g(v);
    return image_norm(r);
  };
  rep.hqs_u_residual = envelope_residual(u);
  rep.hqs_x_envelope_residual = envelope_residual(x);
  rep.hqs_x_residual = image_norm(x - prox_g(prox_gf(x)));

  if (!rep.pgd_stationary || !rep.hqs_stationary) {
    rep.status = Prop1Report::Status::inconclusive;
  } else if (rep.pgd_residual <= tol && rep.hqs_u_residual <= tol && rep.hqs_x_residual <= tol) {
    rep.status = Prop1Report::Status::pass;
  } else {
    rep.status = Prop1Report::Status::fail;
  }
  return rep;
}

GridMinimum grid_minimize(std::function<double(double)> const &fn, double lo, double hi, double step)
{
  if (!(step > 0.0) || !(hi >= lo)) {
    throw InvalidArgument("grid_minimize: need step > 0 and hi >= lo");
  }
  auto const n = static_cast<long>(std::floor((hi - lo) / step + 0.5));
  GridMinimum best{lo, std::numeric_limits<double>::infinity()};
  for (long i = 0; i <= n; ++i) {
    double const x = lo + static_cast<double>(i) * step;
    double const v = fn(x);
    if (v < best.value) {
      best = {x, v};
    }
  }
  return best;
}

Prop1Problem ScalarToy::problem(std::function<ComplexImage(ComplexImage const &)> prox_g) const
{
  return Prop1Problem{model.get(), &y, std::move(prox_g)};
}

ScalarToy make_scalar_toy(double target)
{
  Shape const s{1, 1};
  SensitivityMaps maps({ComplexImage(s, cplx{1.0, 0.0})}, Mask(s, true));
  ScalarToy toy;
  toy.model = std::make_unique<ForwardModel>(Trajectory({KPoint{0.0, 0.0}}), std::move(maps));
  toy.y = MulticoilKSpace({KSpaceSamples{cplx{target, 0.0}}});
  return toy;
}

std::vector<VerifyCheck> verification_suite()
{
  std::vector<VerifyCheck> out;
  double const gamma = 1.0;
  double const tol = 1e-8;
  double const step = 1e-4;
  auto const toy = make_scalar_toy(2.0);
  auto prox_abs = [](double t) {
    return [t](ComplexImage const &v) {
      ComplexImage r = v;
      for (auto &z : r.data()) {
        z = soft_threshold(z, t);
      }
      return r;
    };
  };
  auto const rep = verify_proposition1(toy.problem(prox_abs(gamma)), gamma, tol);

  auto huber = [](double u) { return std::abs(u) <= 1.0 ? 0.5 * u * u : std::abs(u) - 0.5; };
  // gamma f + g, gamma f + env g, env(gamma f) + g; env of 1/2 (x - 2)^2 at scale 1 is 1/4 (x - 2)^2.
  auto const pgd_oracle = grid_minimize([&](double x) { return gamma * 0.5 * (x - 2) * (x - 2) + std::abs(x); }, -5, 5, step);
  auto const u_oracle = grid_minimize([&](double u) { return gamma * 0.5 * (u - 2) * (u - 2) + huber(u); }, -5, 5, step);
  auto const x_oracle = grid_minimize([&](double x) { return 0.25 * (x - 2) * (x - 2) / gamma + std::abs(x); }, -5, 5, step);

  auto point = [](ComplexImage const &v) { return v[0]; };
  auto add = [&](std::string name, cplx got, double oracle, double residual) {
    bool const ok = rep.status != Prop1Report::Status::inconclusive && std::abs(got - oracle) <= step &&
                    residual <= tol;
    out.push_back({std::move(name), ok,
                   fmt::format("fixed point {:.12g}{:+.3g}i, grid oracle {:.6g}, residual {:.3e}", got.real(),
                               got.imag(), oracle, residual)});
  };
  add("pgd fixed point", point(rep.pgd_x), pgd_oracle.argmin, rep.pgd_residual);
  add("hqs u fixed point", point(rep.hqs_u), u_oracle.argmin, rep.hqs_u_residual);
  add("hqs x fixed point", point(rep.hqs_x), x_oracle.argmin, rep.hqs_x_residual);

  std::vector<double> grid;
  for (int i = 30; i <= 100; ++i) {
    grid.push_back(i / 100.0);
  }
  double const r_id = spectral_radius_scan(Preconditioner::Kind::identity, 1.0, grid);
  double const r_f1 = spectral_radius_scan(Preconditioner::Kind::f1, 1.0, grid);
  double const r_ch = spectral_radius_scan(Preconditioner::Kind::chebyshev, 1.0, grid);
  out.push_back({"spectral radius ordering", r_ch < r_f1 && r_f1 < r_id,
                 fmt::format("chebyshev {:.6f} < f1 {:.6f} < identity {:.6f}", r_ch, r_f1, r_id)});
  return out;
}

} // namespace pnp
