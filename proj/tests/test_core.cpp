#include "helpers.hpp"

#include <doctest.h>

#include <cstring>
#include <limits>
#include <sstream>

using namespace pnp;

TEST_CASE("image construction validates payloads")
{
  CHECK_THROWS_AS(ComplexImage(Shape{2, 2}, std::vector<cplx>(3)), DimensionError);
  std::vector<cplx> v(4);
  v[2] = {std::numeric_limits<double>::quiet_NaN(), 0.0};
  CHECK_THROWS_AS(ComplexImage(Shape{2, 2}, v), InvalidArgument);
  v[2] = {0.0, std::numeric_limits<double>::infinity()};
  CHECK_THROWS_AS(ComplexImage(Shape{2, 2}, v), InvalidArgument);

  ComplexImage img(Shape{2, 3});
  img(1, 2) = {4.0, -1.0};
  CHECK(img[5] == cplx{4.0, -1.0});
  CHECK(img.height() == 2);
  CHECK(img.width() == 3);
}

TEST_CASE("arithmetic requires equal shapes")
{
  ComplexImage a(Shape{2, 2});
  ComplexImage b(Shape{2, 3});
  CHECK_THROWS_AS(a += b, DimensionError);
  CHECK_THROWS_AS(inner_product(a, b), DimensionError);
  CHECK_THROWS_AS(hadamard(a, b), DimensionError);
}

TEST_CASE("inner product is conjugate-linear in the first argument")
{
  std::mt19937_64 rng(3);
  auto const a = test::random_image(Shape{4, 5}, rng);
  auto const b = test::random_image(Shape{4, 5}, rng);
  cplx const s{0.3, -1.7};
  cplx manual{0.0, 0.0};
  for (std::size_t i = 0; i < a.size(); ++i) {
    manual += std::conj(a[i]) * b[i];
  }
  CHECK(std::abs(inner_product(a, b) - manual) < 1e-12);
  CHECK(std::abs(inner_product(s * a, b) - std::conj(s) * manual) < 1e-12);
  CHECK(std::abs(inner_product(a, s * b) - s * manual) < 1e-12);
  CHECK(image_norm(a) == doctest::Approx(std::sqrt(std::real(inner_product(a, a)))).epsilon(1e-14));
}

TEST_CASE("CIMG round trip is bit exact")
{
  std::mt19937_64 rng(7);
  auto const img = test::random_image(Shape{5, 7}, rng, 1e-3);
  std::stringstream ss;
  write_cimg(ss, img);
  std::string const bytes = ss.str();
  CHECK(bytes.rfind("CIMG 5 7\n", 0) == 0);
  CHECK(bytes.size() == std::strlen("CIMG 5 7\n") + 5 * 7 * 16);
  double first = 0.0;
  std::memcpy(&first, bytes.data() + std::strlen("CIMG 5 7\n"), sizeof(double));
  CHECK(first == img[0].real());
  auto const back = read_cimg(ss);
  CHECK(back == img);
}

TEST_CASE("CIMG reader rejects malformed input")
{
  std::stringstream bad_magic("CIMX 1 1\n");
  CHECK_THROWS_AS(read_cimg(bad_magic), FormatError);
  std::stringstream truncated(std::string("CIMG 2 2\n") + std::string(20, '\0'));
  CHECK_THROWS_AS(read_cimg(truncated), FormatError);
  std::stringstream empty("");
  CHECK_THROWS_AS(read_cimg(empty), FormatError);
  CHECK_THROWS_AS(read_cimg(std::filesystem::path("/nonexistent/file.cimg")), FormatError);
}

TEST_CASE("mask conversions")
{
  Mask m(Shape{2, 2}, false);
  m.set(1, true);
  m.set(2, true);
  CHECK(m.count() == 2);
  auto const img = m.as_image();
  CHECK(img[1] == cplx{1.0, 0.0});
  CHECK(img[0] == cplx{0.0, 0.0});
  CHECK(Mask::from_image(img) == m);
  auto const masked = apply_mask(ComplexImage(Shape{2, 2}, cplx{2.0, 1.0}), m);
  CHECK(masked[0] == cplx{0.0, 0.0});
  CHECK(masked[2] == cplx{2.0, 1.0});
}

TEST_CASE("trajectory validation")
{
  CHECK_NOTHROW(Trajectory({KPoint{-0.5, -0.5}}));
  CHECK_THROWS_AS(Trajectory({KPoint{0.5, 0.0}}), InvalidArgument);
  CHECK_THROWS_AS(Trajectory({KPoint{0.0, -0.6}}), InvalidArgument);
  CHECK_THROWS_AS(Trajectory({KPoint{0.0, 0.0}}, {0.0}), InvalidArgument);
  CHECK_THROWS_AS(Trajectory({KPoint{0.0, 0.0}}, {1.0, 1.0}), DimensionError);
  auto const cart = Trajectory::cartesian(Shape{4, 4});
  CHECK(cart.size() == 16);
  CHECK(cart.points()[0].kx == -0.5);
}

TEST_CASE("multicoil containers validate consistency")
{
  CHECK_THROWS_AS(MulticoilKSpace(std::vector<KSpaceSamples>{}), InvalidArgument);
  CHECK_THROWS_AS(MulticoilKSpace({KSpaceSamples(3), KSpaceSamples(4)}), DimensionError);
  CHECK_THROWS_AS(MulticoilKSpace({KSpaceSamples(3)}, -1.0), InvalidArgument);
  CHECK_THROWS_AS(SensitivityMaps({ComplexImage(Shape{2, 2})}, Mask(Shape{3, 2})), DimensionError);

  Mask support(Shape{1, 2}, false);
  support.set(0, true);
  SensitivityMaps maps({ComplexImage(Shape{1, 2}, cplx{1.0, 1.0}), ComplexImage(Shape{1, 2}, cplx{0.0, 2.0})}, support);
  CHECK(maps[0][1] == cplx{0.0, 0.0});
  auto const ss = maps.sum_of_squares();
  CHECK(ss[0] == doctest::Approx(6.0));
  CHECK(ss[1] == 0.0);
}

TEST_CASE("solver trace enforces its invariants")
{
  SolverTrace t;
  TraceEntry e;
  e.k = 0;
  e.gamma = 1.0;
  t.push(e);
  CHECK_THROWS_AS(t.push(e), InvalidArgument);
  e.k = 1;
  e.gamma = 0.0;
  CHECK_THROWS_AS(t.push(e), InvalidArgument);
  e.gamma = 1.0;
  e.sigma = -1.0;
  CHECK_THROWS_AS(t.push(e), InvalidArgument);
  e.sigma = 0.0;
  t.push(e);
  CHECK(t.size() == 2);
}

TEST_CASE("image_norm examples")
{
  CHECK(image_norm(ComplexImage(Shape{3, 3})) == 0.0);
  CHECK(image_norm(ComplexImage(Shape{1, 1}, cplx{3.0, 4.0})) == 5.0);
  std::mt19937_64 rng(11);
  auto const a = test::random_image(Shape{8, 8}, rng);
  double s = 0.0;
  for (std::size_t r = 0; r < 8; ++r) {
    for (std::size_t c = 0; c < 8; ++c) {
      s += a(r, c).real() * a(r, c).real() + a(r, c).imag() * a(r, c).imag();
    }
  }
  CHECK(std::abs(image_norm(a) - std::sqrt(s)) <= 1e-12 * std::sqrt(s));
}

TEST_CASE("weighted inner product with a generic metric")
{
  std::mt19937_64 rng(5);
  auto const a = test::random_image(Shape{4, 4}, rng);
  auto const b = test::random_image(Shape{4, 4}, rng);
  LinearMap twice = [](ComplexImage const &v) { return cplx{2.0, 0.0} * v; };
  CHECK(std::abs(weighted_inner_product(a, a, twice) - 2.0 * image_norm(a) * image_norm(a)) < 1e-12);
  auto const ab = weighted_inner_product(a, b, twice);
  auto const ba = weighted_inner_product(b, a, twice);
  CHECK(std::abs(ab - std::conj(ba)) < 1e-12);
  CHECK_THROWS_AS(weighted_inner_product(a, ComplexImage(Shape{2, 2}), twice), DimensionError);
}
