#pragma once

#include "pnp/config.hpp"
#include "pnp/core.hpp"
#include "pnp/sim.hpp"
#include "pnp/solve.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace pnp {

struct NamedSolver
{
  std::string name;
  SolverConfig config;
};

enum class MapSource
{
  truth,
  estimated
};

/* Case file layout:
 *
 *   [case]
 *   id = "af4"            height, width, coils, acceleration, shots,
 *   seed = 1              noise_scale, phantom_seed, maps_seed,
 *   maps = "truth"        maps = "truth" | "estimated", smap_window
 *
 *   [solver.<name>]       one table per solver, in output order
 *   algorithm = "pnp_hqs" (pnp_pgd, pnp_hqs, fista_wavelet, ista_wavelet, adjoint)
 *   preconditioner = "f1"  alpha, denoiser, levels, tau_gain, executable,
 *   sigma0, sigma_min,     working_dir, iterations, lambda (annealed), or
 *   gamma, sigma (fixed); lambda_reg, cg_tol, cg_max_iter, stop_rel, stop_abs,
 *   init, power_iterations, power_seed, lambda_max.
 *
 * seed drives the noise; the phantom and the coil maps use phantom_seed and
 * maps_seed, both defaulting to seed. */
struct BenchCase
{
  std::string id = "case";
  AcquisitionConfig acquisition;
  std::uint64_t phantom_seed = 0;
  std::uint64_t maps_seed = 0;
  bool phantom_seed_set = false;
  bool maps_seed_set = false;
  MapSource maps = MapSource::truth;
  double smap_window = 20.0;
  std::vector<NamedSolver> solvers;
  // Relative to the case directory.
  std::filesystem::path reference_path = "reference.cimg";
};

BenchCase parse_bench_case(ConfigDocument const &doc);
// Parses the file, then applies PNP_SEED from the environment when set.
BenchCase load_bench_case(std::filesystem::path const &path);
// Replaces the noise seed (and the derived phantom/maps seeds that were not set explicitly).
void override_seed(BenchCase &c, std::uint64_t seed);
SolverConfig parse_solver_config(ConfigTable const &table);

struct CaseData
{
  ComplexImage phantom;
  Mask roi;
  SensitivityMaps smaps;
  Trajectory trajectory;
  MulticoilKSpace kspace;
  // Image the reconstructions are scored against.
  ComplexImage reference;
};

/* With true maps the reference is the phantom. With estimated maps it is
 * sum_l conj(S^_l) S_l x, the image the estimated-map model can represent. */
CaseData simulate_case(BenchCase const &c);
void write_case(CaseData const &data, std::filesystem::path const &dir);
CaseData read_case(std::filesystem::path const &dir, std::filesystem::path const &reference = "reference.cimg");

struct BenchRow
{
  std::string solver;
  std::string algorithm;
  std::string preconditioner;
  double acceleration = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
  int iterations = 0;
  double wall_ms = 0.0;
  int trials = 0;
  std::string status = "ok";
};

struct BenchResult
{
  std::vector<BenchRow> rows;
  [[nodiscard]] bool all_ok() const;
};

struct BenchOptions
{
  // Trial 0 uses the stored data; trial r re-simulates with noise seed + r.
  int repeat = 1;
  // Run only these solvers (all when empty).
  std::vector<std::string> only;
};

/* Runs every solver against the same acquisition. Writes <out>/<solver>/
 * {trace.csv, recon.cimg, residual.cimg, recon.pgm}, then <out>/table.csv and
 * <out>/timing.csv. Solver failures are recorded in the row's status. */
BenchResult run_bench(BenchCase const &c, CaseData const &data, std::filesystem::path const &out_dir,
                      BenchOptions const &opts = {});

// PSNR as written to CSV: the +infinity sentinel becomes 999.
double csv_psnr(double psnr);

std::string format_table(std::vector<BenchRow> const &rows);
std::string format_timing(std::vector<BenchRow> const &rows);
std::string format_trace(SolverTrace const &trace);

// 16-bit binary PGM of |img| mapped linearly from [0, peak] to [0, 65535].
void write_pgm16(std::filesystem::path const &path, ComplexImage const &img, double peak);

} // namespace pnp
