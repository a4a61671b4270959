#pragma once

#include "pnp/core.hpp"

#include <cstdint>
#include <memory>

namespace pnp {

/* Non-uniform DFT by direct summation, unitary scaling:
 *   F x [m] = 1/sqrt(H W) * sum_p x[p] exp(-2 pi i (kx_m col_p + ky_m row_p))
 * with centered indices col_p in {-W/2, ..., W/2 - 1} (likewise rows).
 * The adjoint is the exact conjugate transpose. */
KSpaceSamples ndft_forward(ComplexImage const &img, Trajectory const &traj);
ComplexImage ndft_adjoint(std::span<cplx const> samples, Trajectory const &traj, Shape shape);

class ToeplitzKernel;

/* A = [F S_1; ...; F S_L]. Besides the direct forward/adjoint pair the model
 * keeps the Toeplitz embedding of F^H F, so normal(x) = A^H A x costs a few
 * zero-padded FFTs instead of two NDFTs. */
class ForwardModel
{
public:
  ForwardModel(Trajectory trajectory, SensitivityMaps smaps);

  [[nodiscard]] Shape shape() const { return smaps_.shape(); }
  [[nodiscard]] std::size_t coil_count() const { return smaps_.coil_count(); }
  [[nodiscard]] std::size_t sample_count() const { return trajectory_.size(); }
  [[nodiscard]] Trajectory const &trajectory() const { return trajectory_; }
  [[nodiscard]] SensitivityMaps const &smaps() const { return smaps_; }

  [[nodiscard]] MulticoilKSpace forward(ComplexImage const &x) const;
  // sum_l conj(S_l) F^H y_l
  [[nodiscard]] ComplexImage adjoint(MulticoilKSpace const &y) const;
  // A^H A x through the Toeplitz embedding; agrees with adjoint(forward(x)) to rounding.
  [[nodiscard]] ComplexImage normal(ComplexImage const &x) const;

  void check_image(ComplexImage const &x, char const *what) const;
  void check_kspace(MulticoilKSpace const &y, char const *what) const;

private:
  Trajectory trajectory_;
  SensitivityMaps smaps_;
  std::shared_ptr<ToeplitzKernel const> toeplitz_;
};

// Same as ForwardModel::forward; kept as a free function to mirror the model equation.
MulticoilKSpace forward(ForwardModel const &model, ComplexImage const &x);

// f(x) = 1/2 sum_l ||F S_l x - y_l||^2 evaluated directly.
double fidelity(ForwardModel const &model, ComplexImage const &x, MulticoilKSpace const &y);

struct GradientResult
{
  ComplexImage gradient;
  double fidelity = 0.0;
};

// Gradient of f over (re, im) pairs, packed as a complex image: A^H (A x - y).
GradientResult grad_f(ForwardModel const &model, ComplexImage const &x, MulticoilKSpace const &y);

/* The data term with A^H y and ||y||^2 cached, so that solvers only ever call
 * the normal operator:
 *   f(x)  = 1/2 <x, A^H A x> - Re <x, A^H y> + 1/2 ||y||^2
 *   df(x) = A^H A x - A^H y */
class DataTerm
{
public:
  DataTerm(ForwardModel const &model, MulticoilKSpace const &y);

  [[nodiscard]] ForwardModel const &model() const { return *model_; }
  [[nodiscard]] ComplexImage const &adjoint_data() const { return aty_; }
  [[nodiscard]] double data_energy() const { return y_energy_; }

  [[nodiscard]] ComplexImage gradient(ComplexImage const &x) const;
  [[nodiscard]] double value(ComplexImage const &x) const;
  // Value from a precomputed A^H A x.
  [[nodiscard]] double value(ComplexImage const &x, ComplexImage const &normal_x) const;

private:
  ForwardModel const *model_;
  ComplexImage aty_;
  double y_energy_ = 0.0;
};

struct OperatorNormEstimate
{
  double lambda_max = 0.0;
  // |r_k - r_{k-1}| / r_k for the last two Rayleigh quotients.
  double relative_change = 0.0;
  std::vector<double> rayleigh_quotients;
};

// Power iteration on A^H A from a seeded Gaussian start.
OperatorNormEstimate estimate_operator_norm(ForwardModel const &model, int iters, std::uint64_t seed);

} // namespace pnp
