#include "pnp/sim.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include <fmt/core.h>

namespace pnp {

namespace {

constexpr double pi = std::numbers::pi;

struct Ellipse
{
  double intensity;
  double a; // half-axis along x
  double b; // half-axis along y
  double x0;
  double y0;
  double phi_deg;
};

// Modified Shepp-Logan, with the inner intensities raised so that every pixel
// inside the skull stays strictly positive.
constexpr std::array<Ellipse, 10> shepp_logan{{
  {1.00, 0.6900, 0.9200, 0.00, 0.0000, 0},
  {-0.70, 0.6624, 0.8740, 0.00, -0.0184, 0},
  {-0.15, 0.1100, 0.3100, 0.22, 0.0000, -18},
  {-0.15, 0.1600, 0.4100, -0.22, 0.0000, 18},
  {0.10, 0.2100, 0.2500, 0.00, 0.3500, 0},
  {0.10, 0.0460, 0.0460, 0.00, 0.1000, 0},
  {0.10, 0.0460, 0.0460, 0.00, -0.1000, 0},
  {0.10, 0.0460, 0.0230, -0.08, -0.6050, 0},
  {0.10, 0.0230, 0.0230, 0.00, -0.6060, 0},
  {0.10, 0.0230, 0.0460, 0.06, -0.6050, 0},
}};

// Normalized coordinates in [-1, 1): x along columns, y up the rows.
double norm_x(std::size_t col, Shape s) { return (static_cast<double>(col) - static_cast<double>(s.width / 2)) / (0.5 * static_cast<double>(s.width)); }
double norm_y(std::size_t row, Shape s) { return (static_cast<double>(s.height / 2) - static_cast<double>(row)) / (0.5 * static_cast<double>(s.height)); }

std::uint64_t splitmix64(std::uint64_t x)
{
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Uniform in (0, 1].
double keyed_uniform(std::uint64_t seed, std::uint64_t coil, std::uint64_t sample, std::uint64_t lane)
{
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ coil);
  h = splitmix64(h ^ sample);
  h = splitmix64(h ^ lane);
  return (static_cast<double>(h >> 11) + 1.0) * 0x1.0p-53;
}

} // namespace

std::size_t AcquisitionConfig::sample_count() const
{
  if (!(acceleration >= 1.0)) {
    throw InvalidArgument(fmt::format("AcquisitionConfig: acceleration {} < 1", acceleration));
  }
  return static_cast<std::size_t>(std::llround(static_cast<double>(shape.size()) / acceleration));
}

Phantom make_phantom(Shape shape, std::uint64_t seed)
{
  if (shape.height < 16 || shape.width < 16) {
    throw InvalidArgument(fmt::format("make_phantom: shape {} below 16x16", to_string(shape)));
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-0.02, 0.02);
  std::uniform_real_distribution<double> coeff(-1.0, 1.0);

  auto ellipses = shepp_logan;
  for (std::size_t e = 4; e < ellipses.size(); ++e) {
    ellipses[e].intensity += jitter(rng);
  }
  // phase(x, y) = c0 + c1 x + c2 y + c3 x y + c4 x^2 + c5 y^2
  std::array<double, 6> c{};
  c[0] = pi * coeff(rng);
  for (std::size_t i = 1; i < c.size(); ++i) {
    c[i] = 0.4 * pi * coeff(rng);
  }

  Phantom ph{ComplexImage(shape), Mask(shape, false)};
  for (std::size_t r = 0; r < shape.height; ++r) {
    double const y = norm_y(r, shape);
    for (std::size_t col = 0; col < shape.width; ++col) {
      double const x = norm_x(col, shape);
      double mag = 0.0;
      for (auto const &e : ellipses) {
        double const t = e.phi_deg * pi / 180.0;
        double const dx = x - e.x0;
        double const dy = y - e.y0;
        double const u = (dx * std::cos(t) + dy * std::sin(t)) / e.a;
        double const v = (-dx * std::sin(t) + dy * std::cos(t)) / e.b;
        if (u * u + v * v <= 1.0) {
          mag += e.intensity;
        }
      }
      mag = std::clamp(mag, 0.0, 1.0);
      if (mag > 0.0) {
        double const phase = c[0] + c[1] * x + c[2] * y + c[3] * x * y + c[4] * x * x + c[5] * y * y;
        ph.image(r, col) = std::polar(mag, phase);
        ph.roi.set(r * shape.width + col, true);
      }
    }
  }
  return ph;
}

SensitivityMaps make_coil_maps(Shape shape, std::size_t coils, std::uint64_t seed, std::optional<Mask> roi)
{
  if (coils < 1) {
    throw InvalidArgument("make_coil_maps: at least one coil required");
  }
  Mask support = roi ? *roi : Mask(shape, true);
  if (support.shape() != shape) {
    throw DimensionError("make_coil_maps: roi shape mismatch");
  }
  std::mt19937_64 rng(seed ^ 0x5eed5eedULL);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  double const ring = 1.1;
  double const width = 0.75;
  std::vector<ComplexImage> maps;
  maps.reserve(coils);
  for (std::size_t l = 0; l < coils; ++l) {
    double const theta = 2.0 * pi * static_cast<double>(l) / static_cast<double>(coils);
    double const cx = ring * std::cos(theta);
    double const cy = ring * std::sin(theta);
    double const offset = pi * unit(rng);
    double const gx = 0.5 * pi * unit(rng);
    double const gy = 0.5 * pi * unit(rng);
    ComplexImage m(shape);
    for (std::size_t r = 0; r < shape.height; ++r) {
      double const y = norm_y(r, shape);
      for (std::size_t col = 0; col < shape.width; ++col) {
        double const x = norm_x(col, shape);
        double const d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
        m(r, col) = std::polar(std::exp(-d2 / (2.0 * width * width)), offset + gx * x + gy * y);
      }
    }
    maps.push_back(apply_mask(std::move(m), support));
  }
  std::vector<double> ss(shape.size(), 0.0);
  for (auto const &m : maps) {
    for (std::size_t i = 0; i < ss.size(); ++i) {
      ss[i] += std::norm(m[i]);
    }
  }
  double const peak = *std::max_element(ss.begin(), ss.end());
  if (peak > 0.0) {
    double const scale = 1.0 / std::sqrt(peak);
    for (auto &m : maps) {
      m *= scale;
    }
  }
  return SensitivityMaps(std::move(maps), std::move(support));
}

namespace {

Trajectory spiral_impl(Shape shape, std::vector<std::size_t> const &per_shot)
{
  auto const shots = per_shot.size();
  std::size_t total = 0;
  for (auto n : per_shot) {
    total += n;
  }
  double const n_max = static_cast<double>(shape.max_dim());
  double const rmax = 0.5 * (1.0 - 1.0 / n_max);
  // Turns chosen so that arm spacing matches the mean sample spacing over the disc.
  double const turns = std::sqrt(static_cast<double>(total) / pi) / static_cast<double>(shots);

  std::vector<KPoint> pts;
  std::vector<double> w;
  pts.reserve(total);
  w.reserve(total);
  for (std::size_t s = 0; s < shots; ++s) {
    double const rot = 2.0 * pi * static_cast<double>(s) / static_cast<double>(shots);
    auto const n = per_shot[s];
    for (std::size_t j = 0; j < n; ++j) {
      double const t = n > 1 ? static_cast<double>(j) / static_cast<double>(n - 1) : 0.0;
      double const r = rmax * t;
      double const a = 2.0 * pi * turns * t + rot;
      pts.push_back({r * std::cos(a), r * std::sin(a)});
      w.push_back(std::max(r, 1.0 / n_max));
    }
  }
  double mean = 0.0;
  for (double v : w) {
    mean += v;
  }
  mean /= static_cast<double>(w.size());
  for (double &v : w) {
    v /= mean;
  }
  return Trajectory(std::move(pts), std::move(w));
}

} // namespace

Trajectory make_spiral(Shape shape, std::size_t shots, std::size_t samples_per_shot)
{
  if (shots < 1 || samples_per_shot < 2) {
    throw InvalidArgument("make_spiral: need shots >= 1 and samples_per_shot >= 2");
  }
  return spiral_impl(shape, std::vector<std::size_t>(shots, samples_per_shot));
}

Trajectory make_spiral_total(Shape shape, std::size_t shots, std::size_t total_samples)
{
  if (shots < 1 || total_samples < 2 * shots) {
    throw InvalidArgument(fmt::format("make_spiral_total: {} samples cannot fill {} shots", total_samples, shots));
  }
  std::vector<std::size_t> per_shot(shots, total_samples / shots);
  for (std::size_t s = 0; s < total_samples % shots; ++s) {
    ++per_shot[s];
  }
  return spiral_impl(shape, per_shot);
}

Trajectory make_spiral(AcquisitionConfig const &cfg)
{
  return make_spiral_total(cfg.shape, cfg.shots, cfg.sample_count());
}

cplx keyed_complex_normal(std::uint64_t seed, std::uint64_t coil, std::uint64_t sample)
{
  double const u1 = keyed_uniform(seed, coil, sample, 0);
  double const u2 = keyed_uniform(seed, coil, sample, 1);
  double const rad = std::sqrt(-2.0 * std::log(u1));
  return {rad * std::cos(2.0 * pi * u2), rad * std::sin(2.0 * pi * u2)};
}

MulticoilKSpace acquire(AcquisitionConfig const &cfg, ComplexImage const &x, SensitivityMaps const &smaps,
                        Trajectory const &traj)
{
  if (x.shape() != smaps.shape()) {
    throw DimensionError("acquire: image and sensitivity maps differ in shape");
  }
  if (!(cfg.noise_scale >= 0.0)) {
    throw InvalidArgument("acquire: noise scale must be nonnegative");
  }
  std::vector<double> energy(x.size(), 0.0);
  std::vector<KSpaceSamples> coils;
  coils.reserve(smaps.coil_count());
  for (auto const &s : smaps.maps()) {
    auto const c = hadamard(s, x);
    for (std::size_t i = 0; i < c.size(); ++i) {
      energy[i] += std::norm(c[i]);
    }
    coils.push_back(ndft_forward(c, traj));
  }
  double const nu = cfg.noise_scale * *std::max_element(energy.begin(), energy.end());
  if (nu > 0.0) {
    double const sd = std::sqrt(nu / 2.0);
    for (std::size_t l = 0; l < coils.size(); ++l) {
      for (std::size_t m = 0; m < coils[l].size(); ++m) {
        coils[l][m] += sd * keyed_complex_normal(cfg.seed, l, m);
      }
    }
  }
  return MulticoilKSpace(std::move(coils), nu);
}

SensitivityMaps estimate_smaps(MulticoilKSpace const &y, Trajectory const &traj, Shape shape,
                               SmapEstimationOptions const &opts)
{
  if (y.samples_per_coil() != traj.size()) {
    throw DimensionError("estimate_smaps: k-space length does not match trajectory");
  }
  double const kmax = opts.window / (2.0 * static_cast<double>(shape.max_dim()));
  std::vector<KPoint> pts;
  std::vector<double> taper;
  std::vector<std::size_t> keep;
  auto all = traj.points();
  auto dw = traj.density_weights();
  for (std::size_t m = 0; m < all.size(); ++m) {
    if (std::max(std::abs(all[m].kx), std::abs(all[m].ky)) < kmax) {
      double const rho = std::min(std::hypot(all[m].kx, all[m].ky) / kmax, 1.0);
      keep.push_back(m);
      pts.push_back(all[m]);
      taper.push_back(dw[m] * (0.54 + 0.46 * std::cos(pi * rho)));
    }
  }
  if (keep.empty()) {
    throw EstimationError(fmt::format("estimate_smaps: no samples inside the {}-pixel window", opts.window));
  }
  Trajectory center(pts);
  std::vector<ComplexImage> low;
  low.reserve(y.coil_count());
  for (auto const &coil : y.coils) {
    KSpaceSamples s(keep.size());
    for (std::size_t i = 0; i < keep.size(); ++i) {
      s[i] = coil[keep[i]] * taper[i];
    }
    low.push_back(ndft_adjoint(s, center, shape));
  }
  std::vector<double> ss(shape.size(), 0.0);
  for (auto const &c : low) {
    for (std::size_t i = 0; i < ss.size(); ++i) {
      ss[i] += std::norm(c[i]);
    }
  }
  double max_c2 = 0.0;
  for (auto const &c : low) {
    for (auto v : c.data()) {
      max_c2 = std::max(max_c2, std::norm(v));
    }
  }
  double const eps = 1e-12 * max_c2;
  Mask support = opts.support.value_or(Mask(shape, false));
  if (!opts.support) {
    double const peak = std::sqrt(*std::max_element(ss.begin(), ss.end()));
    for (std::size_t i = 0; i < ss.size(); ++i) {
      support.set(i, std::sqrt(ss[i]) > opts.threshold * peak);
    }
  } else if (support.shape() != shape) {
    throw DimensionError("estimate_smaps: support mask shape mismatch");
  }
  for (auto &c : low) {
    for (std::size_t i = 0; i < ss.size(); ++i) {
      c[i] /= std::sqrt(ss[i] + eps);
    }
  }
  return SensitivityMaps(std::move(low), std::move(support));
}

ComplexImage gaussian_lowpass(ComplexImage const &img, double sigma)
{
  if (!(sigma > 0.0)) {
    return img;
  }
  auto const radius = static_cast<long>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  for (long i = -radius; i <= radius; ++i) {
    kernel[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
  }
  auto const h = static_cast<long>(img.height());
  auto const w = static_cast<long>(img.width());
  auto pass = [&](ComplexImage const &in, bool along_rows) {
    ComplexImage out(in.shape());
    for (long r = 0; r < h; ++r) {
      for (long c = 0; c < w; ++c) {
        cplx acc{0.0, 0.0};
        double wsum = 0.0;
        for (long t = -radius; t <= radius; ++t) {
          long const rr = along_rows ? r : r + t;
          long const cc = along_rows ? c + t : c;
          if (rr < 0 || rr >= h || cc < 0 || cc >= w) {
            continue;
          }
          double const k = kernel[static_cast<std::size_t>(t + radius)];
          acc += k * in(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc));
          wsum += k;
        }
        out(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = acc / wsum;
      }
    }
    return out;
  };
  return pass(pass(img, true), false);
}

ComplexImage root_sum_of_squares(std::span<ComplexImage const> coil_images)
{
  if (coil_images.empty()) {
    throw InvalidArgument("root_sum_of_squares: no coil images");
  }
  ComplexImage out(coil_images.front().shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    double s = 0.0;
    for (auto const &c : coil_images) {
      s += std::norm(c[i]);
    }
    out[i] = std::sqrt(s);
  }
  return out;
}

ComplexImage virtual_coil_combine(std::span<ComplexImage const> coil_images)
{
  if (coil_images.empty()) {
    throw InvalidArgument("virtual_coil_combine: no coil images");
  }
  auto const shape = coil_images.front().shape();
  for (auto const &c : coil_images) {
    if (c.shape() != shape) {
      throw DimensionError("virtual_coil_combine: coil images differ in shape");
    }
  }
  double const sigma = static_cast<double>(shape.max_dim()) / 32.0;
  auto const n = shape.size();

  // Virtual reference coil from smoothed conjugate weights.
  std::vector<ComplexImage> smooth;
  smooth.reserve(coil_images.size());
  for (auto const &c : coil_images) {
    smooth.push_back(gaussian_lowpass(c, sigma));
  }
  ComplexImage ref_phase(shape);
  for (std::size_t i = 0; i < n; ++i) {
    double norm = 0.0;
    for (auto const &s : smooth) {
      norm += std::norm(s[i]);
    }
    norm = std::sqrt(norm);
    cplx v{0.0, 0.0};
    if (norm > 0.0) {
      for (std::size_t l = 0; l < coil_images.size(); ++l) {
        v += std::conj(smooth[l][i]) * coil_images[l][i] / norm;
      }
    }
    double const a = std::abs(v);
    ref_phase[i] = a > 0.0 ? v / a : cplx{1.0, 0.0};
  }

  // Per-coil sensitivities relative to the virtual coil, then matched-filter combination.
  std::vector<ComplexImage> rel;
  rel.reserve(coil_images.size());
  for (auto const &c : coil_images) {
    rel.push_back(gaussian_lowpass(conj_hadamard(ref_phase, c), sigma));
  }
  ComplexImage out(shape);
  for (std::size_t i = 0; i < n; ++i) {
    cplx num{0.0, 0.0};
    double den = 0.0;
    for (std::size_t l = 0; l < coil_images.size(); ++l) {
      num += std::conj(rel[l][i]) * coil_images[l][i];
      den += std::norm(rel[l][i]);
    }
    out[i] = den > 0.0 ? num / std::sqrt(den) : cplx{0.0, 0.0};
  }
  return out;
}

} // namespace pnp
