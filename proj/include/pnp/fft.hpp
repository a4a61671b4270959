#pragma once

#include "pnp/core.hpp"

#include <memory>

namespace pnp {

// Unnormalized 2-D FFT of a fixed size, backed by FFTW with FFTW_ESTIMATE
// planning so that repeated runs are bit-identical.
class FFT2
{
public:
  explicit FFT2(Shape shape);
  ~FFT2();
  FFT2(FFT2 &&) noexcept;
  FFT2 &operator=(FFT2 &&) noexcept;
  FFT2(FFT2 const &) = delete;
  FFT2 &operator=(FFT2 const &) = delete;

  [[nodiscard]] Shape shape() const;

  // In place: forward uses exp(-2 pi i ...), inverse exp(+2 pi i ...). Neither scales.
  void forward(std::span<cplx> data) const;
  void inverse(std::span<cplx> data) const;

private:
  struct Plans;
  std::unique_ptr<Plans> plans_;
};

} // namespace pnp
