#pragma once

#include "pnp/core.hpp"

#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <numbers>
#include <string>

namespace pnp {

class DenoiserError : public Error
{
public:
  using Error::Error;
};

// z * max(1 - tau / |z|, 0)
cplx soft_threshold(cplx z, double tau);

// Orthonormal 2-D Haar analysis to `levels` levels, Mallat layout: the coarse
// approximation occupies the top-left (H / 2^J, W / 2^J) block.
ComplexImage haar_forward(ComplexImage const &img, int levels);
ComplexImage haar_inverse(ComplexImage const &coeffs, int levels);
bool in_approximation_band(std::size_t row, std::size_t col, Shape shape, int levels);
void check_haar_shape(Shape shape, int levels);

// D_sigma. Calls may mutate internal state (a live external process), hence non-const.
class Denoiser
{
public:
  virtual ~Denoiser() = default;
  virtual ComplexImage denoise(ComplexImage const &u, double sigma) = 0;
  [[nodiscard]] virtual std::string name() const = 0;
};

class IdentityDenoiser final : public Denoiser
{
public:
  ComplexImage denoise(ComplexImage const &u, double sigma) override;
  [[nodiscard]] std::string name() const override { return "identity"; }
};

// prox of tau ||W_detail z||_1 with tau = tau_gain * sigma.
class WaveletDenoiser final : public Denoiser
{
public:
  WaveletDenoiser(int levels, double tau_gain);
  ComplexImage denoise(ComplexImage const &u, double sigma) override;
  [[nodiscard]] std::string name() const override { return "wavelet_soft_threshold"; }
  [[nodiscard]] int levels() const { return levels_; }
  [[nodiscard]] double tau_gain() const { return tau_gain_; }

private:
  int levels_;
  double tau_gain_;
};

class FunctionDenoiser final : public Denoiser
{
public:
  using Fn = std::function<ComplexImage(ComplexImage const &, double)>;
  FunctionDenoiser(Fn fn, std::string name);
  ComplexImage denoise(ComplexImage const &u, double sigma) override { return fn_(u, sigma); }
  [[nodiscard]] std::string name() const override { return name_; }

private:
  Fn fn_;
  std::string name_;
};

/* Talks to a persistent child process over stdin/stdout. One request:
 *   "DNZ1 <height> <width> <sigma>\n" followed by the CIMG payload bytes
 * (no header). The reply is the payload of the same shape. */
class ExternalDenoiser final : public Denoiser
{
public:
  ExternalDenoiser(std::filesystem::path executable, std::filesystem::path working_dir = {},
                   std::chrono::milliseconds timeout = std::chrono::seconds(60));
  ~ExternalDenoiser() override;
  ExternalDenoiser(ExternalDenoiser const &) = delete;
  ExternalDenoiser &operator=(ExternalDenoiser const &) = delete;

  ComplexImage denoise(ComplexImage const &u, double sigma) override;
  [[nodiscard]] std::string name() const override { return "external"; }

private:
  void start();
  void stop();

  std::filesystem::path executable_;
  std::filesystem::path working_dir_;
  std::chrono::milliseconds timeout_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
};

// Formats the DNZ1 request header exactly as written to the child.
std::string dnz1_header(Shape shape, double sigma);

struct DenoiserSpec
{
  enum class Kind
  {
    identity,
    wavelet_soft_threshold,
    external
  };

  Kind kind = Kind::identity;
  int levels = 4;
  double tau_gain = std::numbers::sqrt2;
  std::filesystem::path executable;
  std::filesystem::path working_dir;
};

DenoiserSpec::Kind parse_denoiser_kind(std::string const &name);
std::string to_string(DenoiserSpec::Kind kind);

// Validates the DenoiserSpec (levels >= 1, executable present) and builds a handle.
std::unique_ptr<Denoiser> make_denoiser(DenoiserSpec const &spec);

// One-shot convenience; external kinds start and stop a process per call.
ComplexImage denoise(DenoiserSpec const &spec, ComplexImage const &u, double sigma);

// Max |D(u, 0) - u| on a seeded random probe.
double zero_sigma_deviation(Denoiser &d, Shape shape, std::uint64_t seed = 0);

} // namespace pnp
