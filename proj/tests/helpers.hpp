#pragma once

#include "pnp/core.hpp"
#include "pnp/operators.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace pnp::test {

inline ComplexImage random_image(Shape s, std::mt19937_64 &rng, double scale = 1.0)
{
  std::normal_distribution<double> n(0.0, scale);
  ComplexImage img(s);
  for (auto &z : img.data()) {
    z = {n(rng), n(rng)};
  }
  return img;
}

inline Trajectory random_trajectory(std::size_t m, std::mt19937_64 &rng)
{
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::uniform_real_distribution<double> w(0.5, 2.0);
  std::vector<KPoint> pts;
  std::vector<double> ws;
  for (std::size_t i = 0; i < m; ++i) {
    pts.push_back({u(rng), u(rng)});
    ws.push_back(w(rng));
  }
  return Trajectory(std::move(pts), std::move(ws));
}

inline SensitivityMaps random_maps(Shape s, std::size_t coils, std::mt19937_64 &rng)
{
  std::vector<ComplexImage> maps;
  for (std::size_t l = 0; l < coils; ++l) {
    maps.push_back(random_image(s, rng, 0.5));
  }
  return SensitivityMaps(std::move(maps), Mask(s, true));
}

inline MulticoilKSpace random_kspace(std::size_t coils, std::size_t m, std::mt19937_64 &rng)
{
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<KSpaceSamples> c(coils, KSpaceSamples(m));
  for (auto &v : c) {
    for (auto &z : v) {
      z = {n(rng), n(rng)};
    }
  }
  return MulticoilKSpace(std::move(c));
}

inline cplx kspace_inner(MulticoilKSpace const &a, MulticoilKSpace const &b)
{
  cplx s{0.0, 0.0};
  for (std::size_t l = 0; l < a.coil_count(); ++l) {
    for (std::size_t m = 0; m < a.coils[l].size(); ++m) {
      s += std::conj(a.coils[l][m]) * b.coils[l][m];
    }
  }
  return s;
}

inline double kspace_norm(MulticoilKSpace const &a)
{
  return std::sqrt(std::real(kspace_inner(a, a)));
}

// Independent NDFT row: exp(-2 pi i (kx col + ky row)) / sqrt(HW) with centered indices.
inline cplx ndft_entry(KPoint k, Shape s, std::size_t row, std::size_t col)
{
  double const c = static_cast<double>(col) - static_cast<double>(s.width / 2);
  double const r = static_cast<double>(row) - static_cast<double>(s.height / 2);
  double const ph = -2.0 * std::numbers::pi * (k.kx * c + k.ky * r);
  return std::polar(1.0 / std::sqrt(static_cast<double>(s.size())), ph);
}

inline double rel_diff(ComplexImage const &a, ComplexImage const &b)
{
  return image_norm(a - b) / std::max(image_norm(b), 1e-300);
}

} // namespace pnp::test
