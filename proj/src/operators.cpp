#include "pnp/operators.hpp"

#include "pnp/fft.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <fmt/core.h>

namespace pnp {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

// exp(sign * 2 pi i * k * (j - n/2)) for j in [0, n)
void phase_row(double k, std::size_t n, double sign, std::vector<cplx> &out)
{
  out.resize(n);
  auto const half = static_cast<long>(n / 2);
  for (std::size_t j = 0; j < n; ++j) {
    out[j] = std::polar(1.0, sign * two_pi * k * static_cast<double>(static_cast<long>(j) - half));
  }
}

} // namespace

KSpaceSamples ndft_forward(ComplexImage const &img, Trajectory const &traj)
{
  if (traj.empty()) {
    throw InvalidArgument("ndft_forward: empty trajectory");
  }
  auto const shape = img.shape();
  double const scale = 1.0 / std::sqrt(static_cast<double>(shape.size()));
  KSpaceSamples out(traj.size());
  std::vector<cplx> ex;
  std::vector<cplx> ey;
  auto pts = traj.points();
  for (std::size_t m = 0; m < pts.size(); ++m) {
    phase_row(pts[m].kx, shape.width, -1.0, ex);
    phase_row(pts[m].ky, shape.height, -1.0, ey);
    cplx acc{0.0, 0.0};
    for (std::size_t r = 0; r < shape.height; ++r) {
      cplx row{0.0, 0.0};
      cplx const *px = img.data().data() + r * shape.width;
      for (std::size_t c = 0; c < shape.width; ++c) {
        row += px[c] * ex[c];
      }
      acc += row * ey[r];
    }
    out[m] = acc * scale;
  }
  return out;
}

ComplexImage ndft_adjoint(std::span<cplx const> samples, Trajectory const &traj, Shape shape)
{
  if (samples.size() != traj.size()) {
    throw DimensionError(fmt::format("ndft_adjoint: {} samples for a {}-point trajectory", samples.size(), traj.size()));
  }
  double const scale = 1.0 / std::sqrt(static_cast<double>(shape.size()));
  ComplexImage out(shape);
  std::vector<cplx> ex;
  std::vector<cplx> ey;
  auto pts = traj.points();
  for (std::size_t m = 0; m < pts.size(); ++m) {
    if (samples[m] == cplx{0.0, 0.0}) {
      continue;
    }
    phase_row(pts[m].kx, shape.width, 1.0, ex);
    phase_row(pts[m].ky, shape.height, 1.0, ey);
    for (std::size_t r = 0; r < shape.height; ++r) {
      cplx const a = samples[m] * ey[r] * scale;
      cplx *po = out.data().data() + r * shape.width;
      for (std::size_t c = 0; c < shape.width; ++c) {
        po[c] += a * ex[c];
      }
    }
  }
  return out;
}

/* Circulant embedding of the Toeplitz kernel t(d) = 1/N sum_m exp(2 pi i k_m . d)
 * on a (2H, 2W) grid, stored already transformed. */
class ToeplitzKernel
{
public:
  ToeplitzKernel(Trajectory const &traj, Shape shape)
    : shape_{shape}
    , padded_{2 * shape.height, 2 * shape.width}
    , fft_{padded_}
    , spectrum_(padded_.size())
  {
    auto const ph = padded_.height;
    auto const pw = padded_.width;
    // offsets d in [-(n-1), n-1] mapped to index d mod 2n; index n stays zero
    auto offset_of = [](std::size_t idx, std::size_t n) -> long {
      auto const i = static_cast<long>(idx);
      return i < static_cast<long>(n) ? i : i - 2 * static_cast<long>(n);
    };
    std::vector<cplx> er(ph);
    std::vector<cplx> ec(pw);
    for (auto const &p : traj.points()) {
      for (std::size_t i = 0; i < ph; ++i) {
        er[i] = i == shape.height ? cplx{} : std::polar(1.0, two_pi * p.ky * static_cast<double>(offset_of(i, shape.height)));
      }
      for (std::size_t j = 0; j < pw; ++j) {
        ec[j] = j == shape.width ? cplx{} : std::polar(1.0, two_pi * p.kx * static_cast<double>(offset_of(j, shape.width)));
      }
      for (std::size_t i = 0; i < ph; ++i) {
        cplx *row = spectrum_.data() + i * pw;
        for (std::size_t j = 0; j < pw; ++j) {
          row[j] += er[i] * ec[j];
        }
      }
    }
    // 1/N from the unitary NDFT pair and 1/(4N) for the unnormalized inverse FFT
    double const scale = 1.0 / (static_cast<double>(shape.size()) * static_cast<double>(padded_.size()));
    for (auto &v : spectrum_) {
      v *= scale;
    }
    fft_.forward(spectrum_);
  }

  // F^H F x
  [[nodiscard]] ComplexImage apply(ComplexImage const &x) const
  {
    std::vector<cplx> buf(padded_.size());
    for (std::size_t r = 0; r < shape_.height; ++r) {
      for (std::size_t c = 0; c < shape_.width; ++c) {
        buf[r * padded_.width + c] = x(r, c);
      }
    }
    fft_.forward(buf);
    for (std::size_t i = 0; i < buf.size(); ++i) {
      buf[i] *= spectrum_[i];
    }
    fft_.inverse(buf);
    ComplexImage out(shape_);
    for (std::size_t r = 0; r < shape_.height; ++r) {
      for (std::size_t c = 0; c < shape_.width; ++c) {
        out(r, c) = buf[r * padded_.width + c];
      }
    }
    return out;
  }

private:
  Shape shape_;
  Shape padded_;
  FFT2 fft_;
  std::vector<cplx> spectrum_;
};

ForwardModel::ForwardModel(Trajectory trajectory, SensitivityMaps smaps)
  : trajectory_{std::move(trajectory)}
  , smaps_{std::move(smaps)}
{
  if (trajectory_.empty()) {
    throw InvalidArgument("ForwardModel: empty trajectory");
  }
  toeplitz_ = std::make_shared<ToeplitzKernel const>(trajectory_, smaps_.shape());
}

void ForwardModel::check_image(ComplexImage const &x, char const *what) const
{
  if (x.shape() != shape()) {
    throw DimensionError(fmt::format("{}: image {} does not match model {}", what, to_string(x.shape()), to_string(shape())));
  }
}

void ForwardModel::check_kspace(MulticoilKSpace const &y, char const *what) const
{
  if (y.coil_count() != coil_count() || y.samples_per_coil() != sample_count()) {
    throw DimensionError(fmt::format("{}: k-space {}x{} does not match model {}x{}", what, y.coil_count(),
                                     y.samples_per_coil(), coil_count(), sample_count()));
  }
}

MulticoilKSpace ForwardModel::forward(ComplexImage const &x) const
{
  check_image(x, "forward");
  std::vector<KSpaceSamples> coils;
  coils.reserve(coil_count());
  for (auto const &s : smaps_.maps()) {
    coils.push_back(ndft_forward(hadamard(s, x), trajectory_));
  }
  return MulticoilKSpace(std::move(coils));
}

ComplexImage ForwardModel::adjoint(MulticoilKSpace const &y) const
{
  check_kspace(y, "adjoint");
  ComplexImage out(shape());
  for (std::size_t l = 0; l < coil_count(); ++l) {
    out += conj_hadamard(smaps_[l], ndft_adjoint(y.coils[l], trajectory_, shape()));
  }
  return out;
}

ComplexImage ForwardModel::normal(ComplexImage const &x) const
{
  check_image(x, "normal");
  ComplexImage out(shape());
  for (auto const &s : smaps_.maps()) {
    out += conj_hadamard(s, toeplitz_->apply(hadamard(s, x)));
  }
  return out;
}

MulticoilKSpace forward(ForwardModel const &model, ComplexImage const &x) { return model.forward(x); }

namespace {

double half_residual_energy(MulticoilKSpace &r, MulticoilKSpace const &y)
{
  double e = 0.0;
  for (std::size_t l = 0; l < r.coil_count(); ++l) {
    for (std::size_t m = 0; m < r.coils[l].size(); ++m) {
      r.coils[l][m] -= y.coils[l][m];
      e += std::norm(r.coils[l][m]);
    }
  }
  return 0.5 * e;
}

} // namespace

double fidelity(ForwardModel const &model, ComplexImage const &x, MulticoilKSpace const &y)
{
  model.check_kspace(y, "fidelity");
  auto r = model.forward(x);
  return half_residual_energy(r, y);
}

GradientResult grad_f(ForwardModel const &model, ComplexImage const &x, MulticoilKSpace const &y)
{
  model.check_kspace(y, "grad_f");
  auto r = model.forward(x);
  double const f = half_residual_energy(r, y);
  return {model.adjoint(r), f};
}

DataTerm::DataTerm(ForwardModel const &model, MulticoilKSpace const &y)
  : model_{&model}
  , aty_{model.adjoint(y)}
{
  for (auto const &c : y.coils) {
    for (auto v : c) {
      y_energy_ += std::norm(v);
    }
  }
}

ComplexImage DataTerm::gradient(ComplexImage const &x) const { return model_->normal(x) - aty_; }

double DataTerm::value(ComplexImage const &x) const { return value(x, model_->normal(x)); }

double DataTerm::value(ComplexImage const &x, ComplexImage const &normal_x) const
{
  double const v = 0.5 * inner_product(x, normal_x).real() - inner_product(x, aty_).real() + 0.5 * y_energy_;
  return v > 0.0 ? v : 0.0;
}

OperatorNormEstimate estimate_operator_norm(ForwardModel const &model, int iters, std::uint64_t seed)
{
  if (iters < 1) {
    throw InvalidArgument("estimate_operator_norm: iters must be >= 1");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  ComplexImage v(model.shape());
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = {gauss(rng), gauss(rng)};
  }
  OperatorNormEstimate est;
  for (int it = 0; it < iters; ++it) {
    double const n = image_norm(v);
    if (n == 0.0) {
      break;
    }
    v *= 1.0 / n;
    ComplexImage w = model.normal(v);
    est.rayleigh_quotients.push_back(inner_product(v, w).real());
    v = std::move(w);
  }
  auto const &rq = est.rayleigh_quotients;
  est.lambda_max = rq.empty() ? 0.0 : rq.back();
  if (rq.size() >= 2 && rq.back() != 0.0) {
    est.relative_change = std::abs(rq.back() - rq[rq.size() - 2]) / std::abs(rq.back());
  }
  return est;
}

} // namespace pnp
