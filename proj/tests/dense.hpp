#pragma once

#include "helpers.hpp"

#include <Eigen/Dense>

namespace pnp::test {

// Dense A = [F S_1; ...; F S_L] built entry by entry.
inline Eigen::MatrixXcd dense_model(Trajectory const &traj, SensitivityMaps const &maps)
{
  Shape const s = maps.shape();
  std::size_t const m = traj.size();
  Eigen::MatrixXcd a(static_cast<Eigen::Index>(m * maps.coil_count()), static_cast<Eigen::Index>(s.size()));
  for (std::size_t l = 0; l < maps.coil_count(); ++l) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t r = 0; r < s.height; ++r) {
        for (std::size_t c = 0; c < s.width; ++c) {
          a(static_cast<Eigen::Index>(l * m + i), static_cast<Eigen::Index>(r * s.width + c)) =
              ndft_entry(traj.points()[i], s, r, c) * maps[l](r, c);
        }
      }
    }
  }
  return a;
}

inline Eigen::VectorXcd to_vector(ComplexImage const &x)
{
  Eigen::VectorXcd v(static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = x[i];
  }
  return v;
}

inline Eigen::VectorXcd to_vector(MulticoilKSpace const &y)
{
  std::size_t const m = y.coils[0].size();
  Eigen::VectorXcd v(static_cast<Eigen::Index>(m * y.coil_count()));
  for (std::size_t l = 0; l < y.coil_count(); ++l) {
    for (std::size_t i = 0; i < m; ++i) {
      v(static_cast<Eigen::Index>(l * m + i)) = y.coils[l][i];
    }
  }
  return v;
}

inline ComplexImage to_image(Eigen::VectorXcd const &v, Shape s)
{
  ComplexImage x(s);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = v(static_cast<Eigen::Index>(i));
  }
  return x;
}

} // namespace pnp::test
