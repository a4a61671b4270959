#include "pnp/core.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <fmt/core.h>

namespace pnp {

static_assert(std::endian::native == std::endian::little, "CIMG I/O assumes a little-endian host");

std::string to_string(Shape s) { return fmt::format("{}x{}", s.height, s.width); }

namespace {

bool finite(cplx z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

} // namespace

ComplexImage::ComplexImage(Shape shape, cplx fill)
  : shape_{shape}
  , data_(shape.size(), fill)
{
  if (!finite(fill)) {
    throw InvalidArgument("ComplexImage: non-finite fill value");
  }
}

ComplexImage::ComplexImage(Shape shape, std::vector<cplx> data)
  : shape_{shape}
  , data_{std::move(data)}
{
  if (data_.size() != shape_.size()) {
    throw DimensionError(fmt::format("ComplexImage: {} values for shape {}", data_.size(), to_string(shape_)));
  }
  if (!all_finite()) {
    throw InvalidArgument("ComplexImage: payload contains NaN or Inf");
  }
}

bool ComplexImage::all_finite() const
{
  return std::all_of(data_.begin(), data_.end(), finite);
}

ComplexImage &ComplexImage::operator+=(ComplexImage const &other)
{
  require_same_shape(*this, other, "operator+=");
  for (std::size_t i = 0; i < data_.size(); ++i) {
    data_[i] += other.data_[i];
  }
  return *this;
}

ComplexImage &ComplexImage::operator-=(ComplexImage const &other)
{
  require_same_shape(*this, other, "operator-=");
  for (std::size_t i = 0; i < data_.size(); ++i) {
    data_[i] -= other.data_[i];
  }
  return *this;
}

ComplexImage &ComplexImage::operator*=(cplx scale)
{
  for (auto &v : data_) {
    v *= scale;
  }
  return *this;
}

ComplexImage operator+(ComplexImage a, ComplexImage const &b) { return a += b; }
ComplexImage operator-(ComplexImage a, ComplexImage const &b) { return a -= b; }
ComplexImage operator*(cplx s, ComplexImage a) { return a *= s; }

void axpy(cplx a, ComplexImage const &x, ComplexImage &y)
{
  require_same_shape(x, y, "axpy");
  auto xs = x.data();
  auto ys = y.data();
  for (std::size_t i = 0; i < xs.size(); ++i) {
    ys[i] += a * xs[i];
  }
}

ComplexImage hadamard(ComplexImage const &a, ComplexImage const &b)
{
  require_same_shape(a, b, "hadamard");
  ComplexImage out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) {
    out[i] = a[i] * b[i];
  }
  return out;
}

ComplexImage conj_hadamard(ComplexImage const &a, ComplexImage const &b)
{
  require_same_shape(a, b, "conj_hadamard");
  ComplexImage out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) {
    out[i] = std::conj(a[i]) * b[i];
  }
  return out;
}

ComplexImage magnitude(ComplexImage const &a)
{
  ComplexImage out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) {
    out[i] = std::abs(a[i]);
  }
  return out;
}

void require_same_shape(ComplexImage const &a, ComplexImage const &b, char const *what)
{
  if (a.shape() != b.shape()) {
    throw DimensionError(fmt::format("{}: shape mismatch {} vs {}", what, to_string(a.shape()), to_string(b.shape())));
  }
}

double image_norm(ComplexImage const &a)
{
  double s = 0.0;
  for (auto v : a.data()) {
    s += std::norm(v);
  }
  return std::sqrt(s);
}

cplx inner_product(ComplexImage const &a, ComplexImage const &b)
{
  require_same_shape(a, b, "inner_product");
  cplx s{0.0, 0.0};
  for (std::size_t i = 0; i < a.size(); ++i) {
    s += std::conj(a[i]) * b[i];
  }
  return s;
}

cplx weighted_inner_product(ComplexImage const &a, ComplexImage const &b, LinearMap const &metric)
{
  require_same_shape(a, b, "weighted_inner_product");
  ComplexImage pb = metric(b);
  require_same_shape(a, pb, "weighted_inner_product (metric output)");
  return inner_product(a, pb);
}

Mask::Mask(Shape shape, bool fill)
  : shape_{shape}
  , values_(shape.size(), fill ? 1 : 0)
{
}

Mask::Mask(Shape shape, std::vector<std::uint8_t> values)
  : shape_{shape}
  , values_{std::move(values)}
{
  if (values_.size() != shape_.size()) {
    throw DimensionError("Mask: value count does not match shape");
  }
}

std::size_t Mask::count() const
{
  return static_cast<std::size_t>(std::count_if(values_.begin(), values_.end(), [](auto v) { return v != 0; }));
}

ComplexImage Mask::as_image() const
{
  ComplexImage img(shape_);
  for (std::size_t i = 0; i < values_.size(); ++i) {
    img[i] = values_[i] ? 1.0 : 0.0;
  }
  return img;
}

Mask Mask::from_image(ComplexImage const &img)
{
  Mask m(img.shape(), false);
  for (std::size_t i = 0; i < img.size(); ++i) {
    m.set(i, img[i].real() > 0.5);
  }
  return m;
}

ComplexImage apply_mask(ComplexImage img, Mask const &mask)
{
  if (img.shape() != mask.shape()) {
    throw DimensionError("apply_mask: shape mismatch");
  }
  for (std::size_t i = 0; i < img.size(); ++i) {
    if (!mask[i]) {
      img[i] = 0.0;
    }
  }
  return img;
}

Trajectory::Trajectory(std::vector<KPoint> points, std::vector<double> density_weights)
  : points_{std::move(points)}
  , weights_{std::move(density_weights)}
{
  if (weights_.size() != points_.size()) {
    throw DimensionError("Trajectory: one density weight per point required");
  }
  auto in_range = [](double k) { return k >= -0.5 && k < 0.5; };
  for (auto const &p : points_) {
    if (!in_range(p.kx) || !in_range(p.ky)) {
      throw InvalidArgument(fmt::format("Trajectory: point ({}, {}) outside [-0.5, 0.5)", p.kx, p.ky));
    }
  }
  for (double w : weights_) {
    if (!(w > 0.0) || !std::isfinite(w)) {
      throw InvalidArgument("Trajectory: density weights must be positive and finite");
    }
  }
}

Trajectory::Trajectory(std::vector<KPoint> points)
  : Trajectory(points, std::vector<double>(points.size(), 1.0))
{
}

Trajectory Trajectory::cartesian(Shape shape)
{
  std::vector<KPoint> pts;
  pts.reserve(shape.size());
  auto const h = static_cast<double>(shape.height);
  auto const w = static_cast<double>(shape.width);
  auto const hh = static_cast<long>(shape.height / 2);
  auto const hw = static_cast<long>(shape.width / 2);
  for (long r = 0; r < static_cast<long>(shape.height); ++r) {
    for (long c = 0; c < static_cast<long>(shape.width); ++c) {
      pts.push_back({static_cast<double>(c - hw) / w, static_cast<double>(r - hh) / h});
    }
  }
  return Trajectory(std::move(pts));
}

MulticoilKSpace::MulticoilKSpace(std::vector<KSpaceSamples> coil_data, double noise_var)
  : coils{std::move(coil_data)}
  , noise_variance{noise_var}
{
  if (coils.empty()) {
    throw InvalidArgument("MulticoilKSpace: at least one coil required");
  }
  for (auto const &c : coils) {
    if (c.size() != coils.front().size()) {
      throw DimensionError("MulticoilKSpace: coils have different sample counts");
    }
  }
  if (!(noise_variance >= 0.0)) {
    throw InvalidArgument("MulticoilKSpace: noise variance must be nonnegative");
  }
}

SensitivityMaps::SensitivityMaps(std::vector<ComplexImage> maps, Mask support)
  : maps_{std::move(maps)}
  , support_{std::move(support)}
{
  if (maps_.empty()) {
    throw InvalidArgument("SensitivityMaps: at least one coil required");
  }
  for (auto &m : maps_) {
    if (m.shape() != support_.shape()) {
      throw DimensionError("SensitivityMaps: map and support shapes differ");
    }
    m = apply_mask(std::move(m), support_);
  }
}

std::vector<double> SensitivityMaps::sum_of_squares() const
{
  std::vector<double> s(shape().size(), 0.0);
  for (auto const &m : maps_) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] += std::norm(m[i]);
    }
  }
  return s;
}

void SolverTrace::push(TraceEntry entry)
{
  if (!entries_.empty() && entry.k <= entries_.back().k) {
    throw InvalidArgument("SolverTrace: iteration index must increase");
  }
  if (!(entry.gamma > 0.0) || !(entry.sigma >= 0.0)) {
    throw InvalidArgument("SolverTrace: requires gamma > 0 and sigma >= 0");
  }
  entries_.push_back(entry);
}

void write_cimg_payload(std::ostream &os, ComplexImage const &img)
{
  auto d = img.data();
  os.write(reinterpret_cast<char const *>(d.data()), static_cast<std::streamsize>(d.size() * sizeof(cplx)));
  if (!os) {
    throw FormatError("CIMG: write failed");
  }
}

ComplexImage read_cimg_payload(std::istream &is, Shape shape)
{
  std::vector<cplx> data(shape.size());
  auto const bytes = static_cast<std::streamsize>(data.size() * sizeof(cplx));
  is.read(reinterpret_cast<char *>(data.data()), bytes);
  if (is.gcount() != bytes) {
    throw FormatError(fmt::format("CIMG: truncated payload ({} of {} bytes)", is.gcount(), bytes));
  }
  return ComplexImage(shape, std::move(data));
}

void write_cimg(std::ostream &os, ComplexImage const &img)
{
  auto header = fmt::format("CIMG {} {}\n", img.height(), img.width());
  os.write(header.data(), static_cast<std::streamsize>(header.size()));
  write_cimg_payload(os, img);
}

ComplexImage read_cimg(std::istream &is)
{
  std::string line;
  if (!std::getline(is, line)) {
    throw FormatError("CIMG: missing header");
  }
  std::istringstream hs(line);
  std::string magic;
  long h = -1;
  long w = -1;
  hs >> magic >> h >> w;
  if (magic != "CIMG" || hs.fail() || h < 0 || w < 0) {
    throw FormatError(fmt::format("CIMG: malformed header '{}'", line));
  }
  return read_cimg_payload(is, Shape{static_cast<std::size_t>(h), static_cast<std::size_t>(w)});
}

void write_cimg(std::filesystem::path const &path, ComplexImage const &img)
{
  std::ofstream os(path, std::ios::binary);
  if (!os) {
    throw FormatError(fmt::format("CIMG: cannot open {} for writing", path.string()));
  }
  write_cimg(os, img);
}

ComplexImage read_cimg(std::filesystem::path const &path)
{
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw FormatError(fmt::format("CIMG: cannot open {}", path.string()));
  }
  return read_cimg(is);
}

} // namespace pnp
