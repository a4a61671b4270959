// pnp: simulate, reconstruct, train and apply the N2N denoiser, verify.
#include "pnp/bench.hpp"
#include "pnp/n2n.hpp"
#include "pnp/solve.hpp"

#include <CLI11.hpp>
#include <fmt/core.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_failure = 1;
constexpr int exit_config = 2;

std::vector<fs::path> cimg_files(fs::path const &dir)
{
  if (!fs::is_directory(dir)) {
    throw pnp::ConfigError(fmt::format("'{}' is not a directory", dir.string()));
  }
  std::vector<fs::path> files;
  for (auto const &e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".cimg") {
      files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    throw pnp::ConfigError(fmt::format("no .cimg files in '{}'", dir.string()));
  }
  return files;
}

int cmd_simulate(fs::path const &config, fs::path const &out)
{
  auto const c = pnp::load_bench_case(config);
  auto const data = pnp::simulate_case(c);
  pnp::write_case(data, out);
  fmt::print("{}: {} coils, {} samples, AF {:g} -> {}\n", c.id, data.smaps.coil_count(), data.trajectory.size(),
             c.acquisition.acceleration, out.string());
  return exit_ok;
}

int cmd_reconstruct(fs::path const &config, fs::path const &case_dir, fs::path out, int repeat,
                    std::vector<std::string> const &only)
{
  auto const c = pnp::load_bench_case(config);
  auto const data = pnp::read_case(case_dir, c.reference_path);
  if (data.phantom.shape() != c.acquisition.shape || data.smaps.coil_count() != c.acquisition.coils) {
    throw pnp::ConfigError("case directory does not match the [case] acquisition settings");
  }
  if (out.empty()) {
    out = case_dir;
  }
  pnp::BenchOptions opts;
  opts.repeat = repeat;
  opts.only = only;
  auto const result = pnp::run_bench(c, data, out, opts);
  for (auto const &r : result.rows) {
    fmt::print("{:<16} {:<14} {:<10} PSNR {:8.3f} dB  SSIM {:.4f}  {:5d} its  {:9.1f} ms  {}\n", r.solver,
               r.algorithm, r.preconditioner, pnp::csv_psnr(r.psnr), r.ssim, r.iterations, r.wall_ms, r.status);
  }
  return result.all_ok() ? exit_ok : exit_failure;
}

int cmd_n2n_train(fs::path const &data_dir, fs::path const &out, pnp::N2NTrainOptions const &opts)
{
  std::vector<pnp::ComplexImage> dataset;
  for (auto const &f : cimg_files(data_dir)) {
    dataset.push_back(pnp::read_cimg(f));
  }
  auto const res = pnp::n2n_train(dataset, opts);
  fs::create_directories(out);
  pnp::write_cimg(out / "kernel.cimg", res.model.kernel());
  std::ofstream loss(out / "loss.csv");
  loss << "step,loss\n";
  for (std::size_t i = 0; i < res.loss_trace.size(); ++i) {
    loss << fmt::format("{},{:.17g}\n", i, res.loss_trace[i]);
  }
  fmt::print("trained {}x{} kernel on {} images, loss {:.6g} -> {:.6g}\n", res.model.kernel_size(),
             res.model.kernel_size(), dataset.size(), res.loss_trace.front(), res.loss_trace.back());
  return exit_ok;
}

int cmd_n2n_apply(fs::path const &kernel, fs::path const &data_dir, fs::path const &out)
{
  pnp::SmallDenoiser const f(pnp::read_cimg(kernel));
  fs::create_directories(out);
  auto const files = cimg_files(data_dir);
  for (auto const &p : files) {
    pnp::write_cimg(out / p.filename(), f(pnp::read_cimg(p)));
  }
  fmt::print("denoised {} images -> {}\n", files.size(), out.string());
  return exit_ok;
}

int cmd_verify()
{
  bool all = true;
  for (auto const &c : pnp::verification_suite()) {
    fmt::print("{} {}: {}\n", c.pass ? "PASS" : "FAIL", c.name, c.detail);
    all = all && c.pass;
  }
  return all ? exit_ok : exit_failure;
}

} // namespace

int main(int argc, char **argv)
{
  CLI::App app{"Plug-and-play MRI reconstruction"};
  app.require_subcommand(1);

  fs::path config;
  fs::path out;
  fs::path case_dir;
  int repeat = 1;
  std::vector<std::string> only;
  fs::path data_dir;
  fs::path kernel;
  pnp::N2NTrainOptions train;

  auto *sim = app.add_subcommand("simulate", "Simulate an acquisition into a case directory");
  sim->add_option("--config", config, "Case file")->required();
  sim->add_option("--out", out, "Output case directory")->required();

  auto *rec = app.add_subcommand("reconstruct", "Run every solver of a case");
  rec->add_option("--config", config, "Case file")->required();
  rec->add_option("--case", case_dir, "Case directory written by simulate")->required();
  rec->add_option("--out", out, "Result directory (defaults to the case directory)");
  rec->add_option("--repeat", repeat, "Average over R noise realizations")->check(CLI::PositiveNumber);
  rec->add_option("--solver", only, "Run only the named solvers");

  auto *tr = app.add_subcommand("n2n-train", "Train the small N2N denoiser on a directory of CIMG files");
  tr->add_option("--data", data_dir, "Directory of noisy .cimg images")->required();
  tr->add_option("--out", out, "Output directory for kernel.cimg and loss.csv")->required();
  tr->add_option("--eta", train.eta, "Regularization weight")->capture_default_str();
  tr->add_option("--steps", train.steps, "Gradient steps")->capture_default_str();
  tr->add_option("--lr", train.learning_rate, "Learning rate")->capture_default_str();
  tr->add_option("--seed", train.seed, "Split seed")->capture_default_str();
  tr->add_option("--batch", train.batch, "Images per step")->capture_default_str();
  tr->add_option("--kernel-size", train.kernel_size, "Odd kernel size")->capture_default_str();

  auto *ap = app.add_subcommand("n2n-apply", "Apply a trained kernel to a directory of CIMG files");
  ap->add_option("--kernel", kernel, "kernel.cimg")->required();
  ap->add_option("--data", data_dir, "Directory of .cimg images")->required();
  ap->add_option("--out", out, "Output directory")->required();

  auto *ver = app.add_subcommand("verify", "Fixed-point and spectral-radius checks");

  try {
    app.parse(argc, argv);
  } catch (CLI::ParseError const &e) {
    int const code = app.exit(e);
    return code == 0 ? exit_ok : exit_config;
  }

  try {
    if (sim->parsed()) {
      return cmd_simulate(config, out);
    }
    if (rec->parsed()) {
      return cmd_reconstruct(config, case_dir, out, repeat, only);
    }
    if (tr->parsed()) {
      return cmd_n2n_train(data_dir, out, train);
    }
    if (ap->parsed()) {
      return cmd_n2n_apply(kernel, data_dir, out);
    }
    if (ver->parsed()) {
      return cmd_verify();
    }
  } catch (pnp::ConfigError const &e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return exit_config;
  } catch (pnp::InvalidArgument const &e) {
    fmt::print(stderr, "invalid argument: {}\n", e.what());
    return exit_config;
  } catch (std::exception const &e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return exit_failure;
  }
  return exit_config;
}
