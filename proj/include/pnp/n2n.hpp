#pragma once

#include "pnp/core.hpp"

#include <cstdint>
#include <functional>
#include <utility>

namespace pnp {

class TrainingError : public Error
{
public:
  using Error::Error;
};

/* Random neighbor sub-sampler pair (g1, g2). Every 2x2 cell gets one of the
 * 12 ordered pairs of distinct positions, drawn uniformly from the seed.
 * Positions within a cell: 0 = (0,0), 1 = (0,1), 2 = (1,0), 3 = (1,1). */
class NeighborSplit
{
public:
  NeighborSplit(Shape image_shape, std::uint64_t seed);

  [[nodiscard]] Shape image_shape() const { return image_shape_; }
  [[nodiscard]] Shape sub_shape() const { return {image_shape_.height / 2, image_shape_.width / 2}; }
  // Flat index (into the full image) picked by g1 / g2 for a flat cell index.
  [[nodiscard]] std::size_t first(std::size_t cell) const;
  [[nodiscard]] std::size_t second(std::size_t cell) const;

private:
  Shape image_shape_;
  std::vector<std::uint8_t> pair_;
};

std::pair<ComplexImage, ComplexImage> neighbor_subsample(ComplexImage const &x, NeighborSplit const &split);

// Adjoints of g1 / g2: scatter a sub-image back to the chosen pixels, zeros elsewhere.
ComplexImage scatter_first(ComplexImage const &sub, NeighborSplit const &split);
ComplexImage scatter_second(ComplexImage const &sub, NeighborSplit const &split);

/* f(x) = x - conv(x, theta) with a K x K complex kernel and reflect-101
 * boundaries:
 *   conv(x, theta)[r, c] = sum_{i,j} theta[i, j] x[r + i - K/2, c + j - K/2] */
class SmallDenoiser
{
public:
  explicit SmallDenoiser(std::size_t kernel_size = 5);
  explicit SmallDenoiser(ComplexImage kernel);

  [[nodiscard]] ComplexImage const &kernel() const { return kernel_; }
  [[nodiscard]] std::size_t kernel_size() const { return kernel_.height(); }
  [[nodiscard]] ComplexImage operator()(ComplexImage const &x) const;

private:
  ComplexImage kernel_;
};

ComplexImage kernel_convolve(ComplexImage const &x, ComplexImage const &kernel);
// Adjoint of theta -> kernel_convolve(x, theta), evaluated at r; returns a K x K image.
ComplexImage kernel_convolve_adjoint(ComplexImage const &x, ComplexImage const &r, std::size_t kernel_size);

using ImageMap = std::function<ComplexImage(ComplexImage const &)>;

// ||f(g1 x) - g2 x||^2 + eta ||f(g1 x) - g2 x - (g1 f(x) - g2 f(x))||^2
double n2n_loss(ImageMap const &f, ComplexImage const &x, NeighborSplit const &split, double eta);

struct LossAndGradient
{
  double loss = 0.0;
  // d/d re(theta) + i d/d im(theta)
  ComplexImage gradient;
};

LossAndGradient n2n_loss_and_gradient(SmallDenoiser const &f, ComplexImage const &x, NeighborSplit const &split,
                                      double eta);

struct N2NTrainOptions
{
  double eta = 2.0;
  int steps = 500;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  std::size_t batch = 1;
  std::size_t kernel_size = 5;
};

struct N2NTrainResult
{
  SmallDenoiser model;
  // Per-step mean loss per sub-image pixel.
  std::vector<double> loss_trace;
};

/* Plain gradient descent on the batch mean of n2n_loss divided by the number
 * of sub-image pixels. Throws TrainingError when the loss exceeds 1e3 times
 * its initial value. */
N2NTrainResult n2n_train(std::span<ComplexImage const> dataset, N2NTrainOptions const &opts);

std::vector<ComplexImage> preprocess_dataset(ImageMap const &f, std::span<ComplexImage const> dataset);

} // namespace pnp
