#include "pnp/priors.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <fmt/core.h>

namespace pnp {

cplx soft_threshold(cplx z, double tau)
{
  double const a = std::abs(z);
  if (a <= tau || a == 0.0) {
    return {0.0, 0.0};
  }
  return z * (1.0 - tau / a);
}

void check_haar_shape(Shape shape, int levels)
{
  if (levels < 1) {
    throw InvalidArgument("Haar: levels must be >= 1");
  }
  std::size_t const block = std::size_t{1} << levels;
  if (shape.height % block != 0 || shape.width % block != 0) {
    throw InvalidArgument(fmt::format("Haar: shape {} not divisible by 2^{}", to_string(shape), levels));
  }
}

namespace {

constexpr double inv_sqrt2 = 1.0 / std::numbers::sqrt2;

// One analysis (or synthesis) step on the top-left h x w block.
void haar_step(ComplexImage &img, std::size_t h, std::size_t w, bool inverse)
{
  std::vector<cplx> tmp(std::max(h, w));
  auto rows = [&] {
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t c = 0; c < w / 2; ++c) {
        if (inverse) {
          cplx const a = img(r, c);
          cplx const d = img(r, c + w / 2);
          tmp[2 * c] = (a + d) * inv_sqrt2;
          tmp[2 * c + 1] = (a - d) * inv_sqrt2;
        } else {
          cplx const x0 = img(r, 2 * c);
          cplx const x1 = img(r, 2 * c + 1);
          tmp[c] = (x0 + x1) * inv_sqrt2;
          tmp[c + w / 2] = (x0 - x1) * inv_sqrt2;
        }
      }
      for (std::size_t c = 0; c < w; ++c) {
        img(r, c) = tmp[c];
      }
    }
  };
  auto cols = [&] {
    for (std::size_t c = 0; c < w; ++c) {
      for (std::size_t r = 0; r < h / 2; ++r) {
        if (inverse) {
          cplx const a = img(r, c);
          cplx const d = img(r + h / 2, c);
          tmp[2 * r] = (a + d) * inv_sqrt2;
          tmp[2 * r + 1] = (a - d) * inv_sqrt2;
        } else {
          cplx const x0 = img(2 * r, c);
          cplx const x1 = img(2 * r + 1, c);
          tmp[r] = (x0 + x1) * inv_sqrt2;
          tmp[r + h / 2] = (x0 - x1) * inv_sqrt2;
        }
      }
      for (std::size_t r = 0; r < h; ++r) {
        img(r, c) = tmp[r];
      }
    }
  };
  if (inverse) {
    cols();
    rows();
  } else {
    rows();
    cols();
  }
}

} // namespace

ComplexImage haar_forward(ComplexImage const &img, int levels)
{
  check_haar_shape(img.shape(), levels);
  ComplexImage out = img;
  for (int j = 0; j < levels; ++j) {
    haar_step(out, img.height() >> j, img.width() >> j, false);
  }
  return out;
}

ComplexImage haar_inverse(ComplexImage const &coeffs, int levels)
{
  check_haar_shape(coeffs.shape(), levels);
  ComplexImage out = coeffs;
  for (int j = levels - 1; j >= 0; --j) {
    haar_step(out, coeffs.height() >> j, coeffs.width() >> j, true);
  }
  return out;
}

bool in_approximation_band(std::size_t row, std::size_t col, Shape shape, int levels)
{
  return row < (shape.height >> levels) && col < (shape.width >> levels);
}

ComplexImage IdentityDenoiser::denoise(ComplexImage const &u, double) { return u; }

WaveletDenoiser::WaveletDenoiser(int levels, double tau_gain)
  : levels_{levels}
  , tau_gain_{tau_gain}
{
  if (levels < 1) {
    throw InvalidArgument("WaveletDenoiser: levels must be >= 1");
  }
  if (!(tau_gain >= 0.0)) {
    throw InvalidArgument("WaveletDenoiser: tau_gain must be nonnegative");
  }
}

ComplexImage WaveletDenoiser::denoise(ComplexImage const &u, double sigma)
{
  if (!(sigma >= 0.0)) {
    throw InvalidArgument("denoise: sigma must be nonnegative");
  }
  check_haar_shape(u.shape(), levels_);
  if (sigma == 0.0) {
    return u;
  }
  double const tau = tau_gain_ * sigma;
  ComplexImage w = haar_forward(u, levels_);
  for (std::size_t r = 0; r < w.height(); ++r) {
    for (std::size_t c = 0; c < w.width(); ++c) {
      if (!in_approximation_band(r, c, w.shape(), levels_)) {
        w(r, c) = soft_threshold(w(r, c), tau);
      }
    }
  }
  return haar_inverse(w, levels_);
}

FunctionDenoiser::FunctionDenoiser(Fn fn, std::string name)
  : fn_{std::move(fn)}
  , name_{std::move(name)}
{
}

DenoiserSpec::Kind parse_denoiser_kind(std::string const &name)
{
  if (name == "identity") {
    return DenoiserSpec::Kind::identity;
  }
  if (name == "wavelet" || name == "wavelet_soft_threshold") {
    return DenoiserSpec::Kind::wavelet_soft_threshold;
  }
  if (name == "external") {
    return DenoiserSpec::Kind::external;
  }
  throw InvalidArgument(fmt::format("unknown denoiser kind '{}'", name));
}

std::string to_string(DenoiserSpec::Kind kind)
{
  switch (kind) {
  case DenoiserSpec::Kind::identity:
    return "identity";
  case DenoiserSpec::Kind::wavelet_soft_threshold:
    return "wavelet_soft_threshold";
  case DenoiserSpec::Kind::external:
    return "external";
  }
  return "unknown";
}

std::unique_ptr<Denoiser> make_denoiser(DenoiserSpec const &spec)
{
  switch (spec.kind) {
  case DenoiserSpec::Kind::identity:
    return std::make_unique<IdentityDenoiser>();
  case DenoiserSpec::Kind::wavelet_soft_threshold:
    return std::make_unique<WaveletDenoiser>(spec.levels, spec.tau_gain);
  case DenoiserSpec::Kind::external:
    return std::make_unique<ExternalDenoiser>(spec.executable, spec.working_dir);
  }
  throw InvalidArgument("make_denoiser: bad kind");
}

ComplexImage denoise(DenoiserSpec const &spec, ComplexImage const &u, double sigma)
{
  if (!(sigma >= 0.0)) {
    throw InvalidArgument("denoise: sigma must be nonnegative");
  }
  return make_denoiser(spec)->denoise(u, sigma);
}

double zero_sigma_deviation(Denoiser &d, Shape shape, std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  ComplexImage probe(shape);
  for (std::size_t i = 0; i < probe.size(); ++i) {
    probe[i] = {g(rng), g(rng)};
  }
  auto out = d.denoise(probe, 0.0);
  require_same_shape(out, probe, "zero_sigma_deviation");
  double dev = 0.0;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    dev = std::max(dev, std::abs(out[i] - probe[i]));
  }
  return dev;
}

} // namespace pnp
