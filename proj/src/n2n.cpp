#include "pnp/n2n.hpp"

#include <array>
#include <cmath>
#include <random>

#include <fmt/core.h>

namespace pnp {

namespace {

constexpr std::array<std::pair<std::uint8_t, std::uint8_t>, 12> ordered_pairs{{
  {0, 1}, {0, 2}, {0, 3}, {1, 0}, {1, 2}, {1, 3},
  {2, 0}, {2, 1}, {2, 3}, {3, 0}, {3, 1}, {3, 2},
}};

std::size_t reflect101(long i, long n)
{
  if (n == 1) {
    return 0;
  }
  long const period = 2 * (n - 1);
  i %= period;
  if (i < 0) {
    i += period;
  }
  return static_cast<std::size_t>(i < n ? i : period - i);
}

double energy(ComplexImage const &a)
{
  double s = 0.0;
  for (auto v : a.data()) {
    s += std::norm(v);
  }
  return s;
}

} // namespace

NeighborSplit::NeighborSplit(Shape image_shape, std::uint64_t seed)
  : image_shape_{image_shape}
{
  if (image_shape.height % 2 != 0 || image_shape.width % 2 != 0 || image_shape.size() == 0) {
    throw InvalidArgument(fmt::format("NeighborSplit: shape {} must have even, nonzero dimensions", to_string(image_shape)));
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, 11);
  pair_.resize(sub_shape().size());
  for (auto &p : pair_) {
    p = static_cast<std::uint8_t>(pick(rng));
  }
}

namespace {

std::size_t cell_pixel(Shape full, std::size_t cell, std::uint8_t pos)
{
  std::size_t const half_w = full.width / 2;
  std::size_t const r = 2 * (cell / half_w) + pos / 2;
  std::size_t const c = 2 * (cell % half_w) + pos % 2;
  return r * full.width + c;
}

} // namespace

std::size_t NeighborSplit::first(std::size_t cell) const
{
  return cell_pixel(image_shape_, cell, ordered_pairs[pair_[cell]].first);
}

std::size_t NeighborSplit::second(std::size_t cell) const
{
  return cell_pixel(image_shape_, cell, ordered_pairs[pair_[cell]].second);
}

std::pair<ComplexImage, ComplexImage> neighbor_subsample(ComplexImage const &x, NeighborSplit const &split)
{
  if (x.height() % 2 != 0 || x.width() % 2 != 0) {
    throw InvalidArgument(fmt::format("neighbor_subsample: odd shape {}", to_string(x.shape())));
  }
  if (x.shape() != split.image_shape()) {
    throw DimensionError("neighbor_subsample: split was drawn for another shape");
  }
  ComplexImage a(split.sub_shape());
  ComplexImage b(split.sub_shape());
  for (std::size_t cell = 0; cell < a.size(); ++cell) {
    a[cell] = x[split.first(cell)];
    b[cell] = x[split.second(cell)];
  }
  return {std::move(a), std::move(b)};
}

ComplexImage scatter_first(ComplexImage const &sub, NeighborSplit const &split)
{
  ComplexImage out(split.image_shape());
  for (std::size_t cell = 0; cell < sub.size(); ++cell) {
    out[split.first(cell)] = sub[cell];
  }
  return out;
}

ComplexImage scatter_second(ComplexImage const &sub, NeighborSplit const &split)
{
  ComplexImage out(split.image_shape());
  for (std::size_t cell = 0; cell < sub.size(); ++cell) {
    out[split.second(cell)] = sub[cell];
  }
  return out;
}

SmallDenoiser::SmallDenoiser(std::size_t kernel_size)
  : kernel_{Shape{kernel_size, kernel_size}}
{
  if (kernel_size == 0 || kernel_size % 2 == 0) {
    throw InvalidArgument("SmallDenoiser: kernel size must be odd");
  }
}

SmallDenoiser::SmallDenoiser(ComplexImage kernel)
  : kernel_{std::move(kernel)}
{
  if (kernel_.height() != kernel_.width() || kernel_.height() % 2 == 0) {
    throw InvalidArgument("SmallDenoiser: kernel must be square with odd size");
  }
}

ComplexImage SmallDenoiser::operator()(ComplexImage const &x) const { return x - kernel_convolve(x, kernel_); }

ComplexImage kernel_convolve(ComplexImage const &x, ComplexImage const &kernel)
{
  auto const k = static_cast<long>(kernel.height());
  auto const half = k / 2;
  auto const h = static_cast<long>(x.height());
  auto const w = static_cast<long>(x.width());
  ComplexImage out(x.shape());
  for (long r = 0; r < h; ++r) {
    for (long c = 0; c < w; ++c) {
      cplx acc{0.0, 0.0};
      for (long i = 0; i < k; ++i) {
        std::size_t const rr = reflect101(r + i - half, h);
        for (long j = 0; j < k; ++j) {
          acc += kernel(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) * x(rr, reflect101(c + j - half, w));
        }
      }
      out(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = acc;
    }
  }
  return out;
}

ComplexImage kernel_convolve_adjoint(ComplexImage const &x, ComplexImage const &r, std::size_t kernel_size)
{
  require_same_shape(x, r, "kernel_convolve_adjoint");
  auto const k = static_cast<long>(kernel_size);
  auto const half = k / 2;
  auto const h = static_cast<long>(x.height());
  auto const w = static_cast<long>(x.width());
  ComplexImage g(Shape{kernel_size, kernel_size});
  for (long i = 0; i < k; ++i) {
    for (long j = 0; j < k; ++j) {
      cplx acc{0.0, 0.0};
      for (long rr = 0; rr < h; ++rr) {
        std::size_t const sr = reflect101(rr + i - half, h);
        for (long cc = 0; cc < w; ++cc) {
          acc += std::conj(x(sr, reflect101(cc + j - half, w))) * r(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc));
        }
      }
      g(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = acc;
    }
  }
  return g;
}

double n2n_loss(ImageMap const &f, ComplexImage const &x, NeighborSplit const &split, double eta)
{
  auto const [g1x, g2x] = neighbor_subsample(x, split);
  auto const fx = f(x);
  auto const [g1fx, g2fx] = neighbor_subsample(fx, split);
  ComplexImage r1 = f(g1x) - g2x;
  ComplexImage r2 = r1 - (g1fx - g2fx);
  return energy(r1) + eta * energy(r2);
}

LossAndGradient n2n_loss_and_gradient(SmallDenoiser const &f, ComplexImage const &x, NeighborSplit const &split,
                                      double eta)
{
  auto const [g1x, g2x] = neighbor_subsample(x, split);
  auto const fx = f(x);
  auto const [g1fx, g2fx] = neighbor_subsample(fx, split);
  ComplexImage const r1 = f(g1x) - g2x;
  ComplexImage const r2 = r1 - (g1fx - g2fx);
  auto const k = f.kernel_size();

  // r1 = g1x - g2x - C(g1x) theta
  // r2 = -C(g1x) theta + (g1 - g2) C(x) theta
  ComplexImage grad = kernel_convolve_adjoint(g1x, r1, k);
  grad *= -2.0;
  ComplexImage g2 = kernel_convolve_adjoint(g1x, r2, k);
  g2 *= -1.0;
  g2 += kernel_convolve_adjoint(x, scatter_first(r2, split) - scatter_second(r2, split), k);
  axpy(2.0 * eta, g2, grad);
  return {energy(r1) + eta * energy(r2), std::move(grad)};
}

N2NTrainResult n2n_train(std::span<ComplexImage const> dataset, N2NTrainOptions const &opts)
{
  if (dataset.empty()) {
    throw InvalidArgument("n2n_train: empty dataset");
  }
  if (opts.steps < 1 || opts.batch < 1) {
    throw InvalidArgument("n2n_train: steps and batch must be >= 1");
  }
  if (!(opts.eta >= 0.0) || !(opts.learning_rate >= 0.0)) {
    throw InvalidArgument("n2n_train: eta and learning rate must be nonnegative");
  }
  std::mt19937_64 rng(opts.seed);
  std::uniform_int_distribution<std::size_t> pick(0, dataset.size() - 1);
  ComplexImage theta(Shape{opts.kernel_size, opts.kernel_size});
  SmallDenoiser model(theta);
  N2NTrainResult result{model, {}};
  result.loss_trace.reserve(static_cast<std::size_t>(opts.steps));
  double initial = -1.0;
  for (int step = 0; step < opts.steps; ++step) {
    ComplexImage grad(theta.shape());
    double loss = 0.0;
    for (std::size_t b = 0; b < opts.batch; ++b) {
      auto const &x = dataset[pick(rng)];
      NeighborSplit split(x.shape(), rng());
      auto lg = n2n_loss_and_gradient(model, x, split, opts.eta);
      double const scale = 1.0 / (static_cast<double>(split.sub_shape().size()) * static_cast<double>(opts.batch));
      loss += lg.loss * scale;
      axpy(scale, lg.gradient, grad);
    }
    if (initial < 0.0) {
      initial = loss;
    }
    if (!std::isfinite(loss) || loss > 1e3 * initial) {
      throw TrainingError(fmt::format("n2n_train: diverged at step {} (loss {} vs initial {})", step, loss, initial));
    }
    result.loss_trace.push_back(loss);
    axpy(-opts.learning_rate, grad, theta);
    model = SmallDenoiser(theta);
  }
  result.model = model;
  return result;
}

std::vector<ComplexImage> preprocess_dataset(ImageMap const &f, std::span<ComplexImage const> dataset)
{
  std::vector<ComplexImage> out;
  out.reserve(dataset.size());
  for (auto const &x : dataset) {
    out.push_back(f(x));
  }
  return out;
}

} // namespace pnp
