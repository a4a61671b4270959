#include "pnp/fft.hpp"

#include <mutex>

#include <fftw3.h>

namespace pnp {

namespace {
// The FFTW planner is not reentrant; execution is.
std::mutex planner_mutex;
} // namespace

struct FFT2::Plans
{
  Shape shape;
  fftw_plan fwd = nullptr;
  fftw_plan inv = nullptr;

  ~Plans()
  {
    std::lock_guard lock(planner_mutex);
    if (fwd) {
      fftw_destroy_plan(fwd);
    }
    if (inv) {
      fftw_destroy_plan(inv);
    }
  }
};

FFT2::FFT2(Shape shape)
  : plans_{std::make_unique<Plans>()}
{
  if (shape.size() == 0) {
    throw InvalidArgument("FFT2: empty shape");
  }
  plans_->shape = shape;
  auto *buf = fftw_alloc_complex(shape.size());
  {
    std::lock_guard lock(planner_mutex);
    auto const h = static_cast<int>(shape.height);
    auto const w = static_cast<int>(shape.width);
    plans_->fwd = fftw_plan_dft_2d(h, w, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
    plans_->inv = fftw_plan_dft_2d(h, w, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
  }
  fftw_free(buf);
  if (!plans_->fwd || !plans_->inv) {
    throw Error("FFT2: planning failed");
  }
}

FFT2::~FFT2() = default;
FFT2::FFT2(FFT2 &&) noexcept = default;
FFT2 &FFT2::operator=(FFT2 &&) noexcept = default;

Shape FFT2::shape() const { return plans_->shape; }

void FFT2::forward(std::span<cplx> data) const
{
  if (data.size() != plans_->shape.size()) {
    throw DimensionError("FFT2::forward: size mismatch");
  }
  auto *p = reinterpret_cast<fftw_complex *>(data.data());
  fftw_execute_dft(plans_->fwd, p, p);
}

void FFT2::inverse(std::span<cplx> data) const
{
  if (data.size() != plans_->shape.size()) {
    throw DimensionError("FFT2::inverse: size mismatch");
  }
  auto *p = reinterpret_cast<fftw_complex *>(data.data());
  fftw_execute_dft(plans_->inv, p, p);
}

} // namespace pnp
