#include "pnp/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace pnp {

double psnr_roi(ComplexImage const &x, ComplexImage const &ref, Mask const &mask)
{
  require_same_shape(x, ref, "psnr_roi");
  if (mask.shape() != x.shape()) {
    throw DimensionError("psnr_roi: mask shape mismatch");
  }
  if (mask.count() == 0) {
    throw InvalidArgument("psnr_roi: empty mask");
  }
  double peak = 0.0;
  double se = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!mask[i]) {
      continue;
    }
    double const r = std::abs(ref[i]);
    double const d = std::abs(x[i]) - r;
    peak = std::max(peak, r);
    se += d * d;
  }
  double const mse = se / static_cast<double>(mask.count());
  if (mse == 0.0) {
    return std::numeric_limits<double>::infinity();
  }
  return 10.0 * std::log10(peak * peak / mse);
}

namespace {

constexpr int window = 11;
constexpr double window_sigma = 1.5;

std::array<double, window> gaussian_window()
{
  std::array<double, window> w{};
  double s = 0.0;
  for (int i = 0; i < window; ++i) {
    double const t = i - window / 2;
    w[static_cast<std::size_t>(i)] = std::exp(-0.5 * t * t / (window_sigma * window_sigma));
    s += w[static_cast<std::size_t>(i)];
  }
  for (auto &v : w) {
    v /= s;
  }
  return w;
}

// Separable weighted sum over every valid window position.
std::vector<double> filter_valid(std::vector<double> const &img, std::size_t h, std::size_t w,
                                 std::array<double, window> const &g)
{
  std::size_t const oh = h - window + 1;
  std::size_t const ow = w - window + 1;
  std::vector<double> tmp(h * ow, 0.0);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < ow; ++c) {
      double s = 0.0;
      for (std::size_t t = 0; t < window; ++t) {
        s += g[t] * img[r * w + c + t];
      }
      tmp[r * ow + c] = s;
    }
  }
  std::vector<double> out(oh * ow, 0.0);
  for (std::size_t r = 0; r < oh; ++r) {
    for (std::size_t c = 0; c < ow; ++c) {
      double s = 0.0;
      for (std::size_t t = 0; t < window; ++t) {
        s += g[t] * tmp[(r + t) * ow + c];
      }
      out[r * ow + c] = s;
    }
  }
  return out;
}

} // namespace

double ssim(ComplexImage const &x, ComplexImage const &ref)
{
  require_same_shape(x, ref, "ssim");
  if (x.height() < window || x.width() < window) {
    throw InvalidArgument("ssim: image smaller than the 11x11 window");
  }
  std::size_t const h = x.height();
  std::size_t const w = x.width();
  std::vector<double> a(x.size());
  std::vector<double> b(x.size());
  double range = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    a[i] = std::abs(x[i]);
    b[i] = std::abs(ref[i]);
    range = std::max(range, b[i]);
  }
  std::vector<double> aa(a.size());
  std::vector<double> bb(a.size());
  std::vector<double> ab(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  auto const g = gaussian_window();
  auto const mu_a = filter_valid(a, h, w, g);
  auto const mu_b = filter_valid(b, h, w, g);
  auto const e_aa = filter_valid(aa, h, w, g);
  auto const e_bb = filter_valid(bb, h, w, g);
  auto const e_ab = filter_valid(ab, h, w, g);
  double const c1 = (0.01 * range) * (0.01 * range);
  double const c2 = (0.03 * range) * (0.03 * range);
  double total = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    double const va = e_aa[i] - mu_a[i] * mu_a[i];
    double const vb = e_bb[i] - mu_b[i] * mu_b[i];
    double const cov = e_ab[i] - mu_a[i] * mu_b[i];
    double const num = (2.0 * mu_a[i] * mu_b[i] + c1) * (2.0 * cov + c2);
    double const den = (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2);
    total += den > 0.0 ? num / den : 1.0;
  }
  return total / static_cast<double>(mu_a.size());
}

} // namespace pnp
