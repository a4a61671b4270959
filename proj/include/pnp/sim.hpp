#pragma once

#include "pnp/core.hpp"
#include "pnp/operators.hpp"

#include <cstdint>
#include <optional>

namespace pnp {

struct AcquisitionConfig
{
  Shape shape{64, 64};
  std::size_t coils = 4;
  double acceleration = 4.0;
  std::size_t shots = 16;
  // Relative noise variance: nu = noise_scale * max_p sum_l |S_l x|^2.
  double noise_scale = 1e-4;
  std::uint64_t seed = 0;

  // round(H W / AF); throws if AF < 1.
  [[nodiscard]] std::size_t sample_count() const;
};

struct Phantom
{
  ComplexImage image;
  Mask roi;
};

// Shepp-Logan style piecewise-constant magnitude in [0, 1] times a smooth
// quadratic phase. The seed perturbs the small-feature intensities and the phase.
Phantom make_phantom(Shape shape, std::uint64_t seed);

// Gaussian lobes on a ring around the field of view, each with its own phase
// ramp. Masked to `roi` (whole image when absent), then scaled so that
// max_p sum_l |S_l|^2 = 1.
SensitivityMaps make_coil_maps(Shape shape, std::size_t coils, std::uint64_t seed, std::optional<Mask> roi = {});

// Archimedean interleaves with radius linear in sample index.
Trajectory make_spiral(Shape shape, std::size_t shots, std::size_t samples_per_shot);
// Splits `total_samples` over the shots; the first total % shots shots get one extra sample.
Trajectory make_spiral_total(Shape shape, std::size_t shots, std::size_t total_samples);
Trajectory make_spiral(AcquisitionConfig const &cfg);

// Noise drawn per (seed, coil, sample), so the result does not depend on evaluation order.
MulticoilKSpace acquire(AcquisitionConfig const &cfg, ComplexImage const &x, SensitivityMaps const &smaps,
                        Trajectory const &traj);

// Standard complex normal pair for a key; exposed for tests.
cplx keyed_complex_normal(std::uint64_t seed, std::uint64_t coil, std::uint64_t sample);

class EstimationError : public Error
{
public:
  using Error::Error;
};

struct SmapEstimationOptions
{
  double window = 20.0;
  // Used when no support mask is given: keep pixels with rss > threshold * max rss.
  double threshold = 0.05;
  std::optional<Mask> support;
};

SensitivityMaps estimate_smaps(MulticoilKSpace const &y, Trajectory const &traj, Shape shape,
                               SmapEstimationOptions const &opts = {});

// Normalized Gaussian low-pass (truncated at 3 sigma, renormalized at the borders).
ComplexImage gaussian_lowpass(ComplexImage const &img, double sigma);

ComplexImage virtual_coil_combine(std::span<ComplexImage const> coil_images);
ComplexImage root_sum_of_squares(std::span<ComplexImage const> coil_images);

} // namespace pnp
