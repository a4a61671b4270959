#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pnp {

using cplx = std::complex<double>;

// Error hierarchy. Each module throws the most specific type it can; callers
// that only care about failure catch pnp::Error.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error
{
public:
  using Error::Error;
};

class InvalidArgument : public Error
{
public:
  using Error::Error;
};

class FormatError : public Error
{
public:
  using Error::Error;
};

struct Shape
{
  std::size_t height = 0;
  std::size_t width = 0;

  [[nodiscard]] constexpr std::size_t size() const { return height * width; }
  [[nodiscard]] constexpr std::size_t max_dim() const { return height > width ? height : width; }
  friend constexpr bool operator==(Shape const &, Shape const &) = default;
};

std::string to_string(Shape s);

/* Row-major complex image. Pixel (row, col) lives at data[row * width + col];
 * rows run along y and columns along x. The same layout is used on disk. */
class ComplexImage
{
public:
  ComplexImage() = default;
  explicit ComplexImage(Shape shape, cplx fill = {0.0, 0.0});
  // Rejects a payload whose length differs from shape.size() or that holds NaN/Inf.
  ComplexImage(Shape shape, std::vector<cplx> data);

  [[nodiscard]] Shape shape() const { return shape_; }
  [[nodiscard]] std::size_t height() const { return shape_.height; }
  [[nodiscard]] std::size_t width() const { return shape_.width; }
  [[nodiscard]] std::size_t size() const { return data_.size(); }

  [[nodiscard]] cplx operator()(std::size_t row, std::size_t col) const { return data_[row * shape_.width + col]; }
  cplx &operator()(std::size_t row, std::size_t col) { return data_[row * shape_.width + col]; }
  [[nodiscard]] cplx operator[](std::size_t i) const { return data_[i]; }
  cplx &operator[](std::size_t i) { return data_[i]; }

  [[nodiscard]] std::span<cplx const> data() const { return data_; }
  std::span<cplx> data() { return data_; }

  [[nodiscard]] bool all_finite() const;

  ComplexImage &operator+=(ComplexImage const &other);
  ComplexImage &operator-=(ComplexImage const &other);
  ComplexImage &operator*=(cplx scale);

  friend bool operator==(ComplexImage const &, ComplexImage const &) = default;

private:
  Shape shape_{};
  std::vector<cplx> data_;
};

ComplexImage operator+(ComplexImage a, ComplexImage const &b);
ComplexImage operator-(ComplexImage a, ComplexImage const &b);
ComplexImage operator*(cplx s, ComplexImage a);

// y += a * x
void axpy(cplx a, ComplexImage const &x, ComplexImage &y);
// Pixelwise product a ⊙ b
ComplexImage hadamard(ComplexImage const &a, ComplexImage const &b);
// Pixelwise conj(a) ⊙ b
ComplexImage conj_hadamard(ComplexImage const &a, ComplexImage const &b);
ComplexImage magnitude(ComplexImage const &a);

void require_same_shape(ComplexImage const &a, ComplexImage const &b, char const *what);

// sqrt(sum |a_i|^2)
double image_norm(ComplexImage const &a);
// <a, b> = sum conj(a_i) b_i
cplx inner_product(ComplexImage const &a, ComplexImage const &b);

using LinearMap = std::function<ComplexImage(ComplexImage const &)>;

// <a, P b> with conjugate-linear first argument.
cplx weighted_inner_product(ComplexImage const &a, ComplexImage const &b, LinearMap const &metric);

class Mask
{
public:
  Mask() = default;
  explicit Mask(Shape shape, bool fill = true);
  Mask(Shape shape, std::vector<std::uint8_t> values);

  [[nodiscard]] Shape shape() const { return shape_; }
  [[nodiscard]] bool operator[](std::size_t i) const { return values_[i] != 0; }
  void set(std::size_t i, bool v) { values_[i] = v ? 1 : 0; }
  [[nodiscard]] bool operator()(std::size_t row, std::size_t col) const { return values_[row * shape_.width + col] != 0; }
  [[nodiscard]] std::size_t count() const;

  [[nodiscard]] ComplexImage as_image() const;
  // Pixels whose real part is > 0.5 are set.
  static Mask from_image(ComplexImage const &img);

  friend bool operator==(Mask const &, Mask const &) = default;

private:
  Shape shape_{};
  std::vector<std::uint8_t> values_;
};

ComplexImage apply_mask(ComplexImage img, Mask const &mask);

struct KPoint
{
  double kx = 0.0; // cycles/pixel along columns
  double ky = 0.0; // cycles/pixel along rows
};

class Trajectory
{
public:
  Trajectory() = default;
  // Coordinates must lie in [-0.5, 0.5); weights must be positive and finite.
  Trajectory(std::vector<KPoint> points, std::vector<double> density_weights);
  // Uniform unit weights.
  explicit Trajectory(std::vector<KPoint> points);

  [[nodiscard]] std::size_t size() const { return points_.size(); }
  [[nodiscard]] bool empty() const { return points_.empty(); }
  [[nodiscard]] std::span<KPoint const> points() const { return points_; }
  [[nodiscard]] std::span<double const> density_weights() const { return weights_; }

  static Trajectory cartesian(Shape shape);

private:
  std::vector<KPoint> points_;
  std::vector<double> weights_;
};

using KSpaceSamples = std::vector<cplx>;

struct MulticoilKSpace
{
  MulticoilKSpace() = default;
  MulticoilKSpace(std::vector<KSpaceSamples> coil_data, double noise_variance = 0.0);

  [[nodiscard]] std::size_t coil_count() const { return coils.size(); }
  [[nodiscard]] std::size_t samples_per_coil() const { return coils.empty() ? 0 : coils.front().size(); }

  std::vector<KSpaceSamples> coils;
  double noise_variance = 0.0;
};

class SensitivityMaps
{
public:
  SensitivityMaps() = default;
  // Zeroes every map outside the support mask.
  SensitivityMaps(std::vector<ComplexImage> maps, Mask support);

  [[nodiscard]] std::size_t coil_count() const { return maps_.size(); }
  [[nodiscard]] Shape shape() const { return support_.shape(); }
  [[nodiscard]] ComplexImage const &operator[](std::size_t coil) const { return maps_[coil]; }
  [[nodiscard]] std::span<ComplexImage const> maps() const { return maps_; }
  [[nodiscard]] Mask const &support() const { return support_; }

  // Pixelwise sum over coils of |S_l|^2 (real, stored in the real part).
  [[nodiscard]] std::vector<double> sum_of_squares() const;

private:
  std::vector<ComplexImage> maps_;
  Mask support_;
};

struct TraceEntry
{
  int k = 0;
  double gamma = 0.0;
  double sigma = 0.0;
  double fidelity = 0.0;
  double iterate_change = 0.0;
  std::optional<double> psnr;
  std::optional<double> ssim;
  // Composite objective, for solvers that track one.
  std::optional<double> objective;
  int inner_iterations = 0;
  bool inner_converged = true;
};

class SolverTrace
{
public:
  // Requires k strictly greater than the previous entry, gamma > 0, sigma >= 0.
  void push(TraceEntry entry);
  [[nodiscard]] std::span<TraceEntry const> entries() const { return entries_; }
  [[nodiscard]] std::size_t size() const { return entries_.size(); }
  [[nodiscard]] bool empty() const { return entries_.empty(); }
  [[nodiscard]] TraceEntry const &back() const { return entries_.back(); }
  [[nodiscard]] TraceEntry const &operator[](std::size_t i) const { return entries_.at(i); }

private:
  std::vector<TraceEntry> entries_;
};

// CIMG: text header "CIMG <height> <width>\n", then height*width*2 little-endian
// IEEE-754 doubles, interleaved (re, im), row-major.
void write_cimg_payload(std::ostream &os, ComplexImage const &img);
ComplexImage read_cimg_payload(std::istream &is, Shape shape);
void write_cimg(std::ostream &os, ComplexImage const &img);
ComplexImage read_cimg(std::istream &is);
void write_cimg(std::filesystem::path const &path, ComplexImage const &img);
ComplexImage read_cimg(std::filesystem::path const &path);

} // namespace pnp
