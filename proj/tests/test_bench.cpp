#include "helpers.hpp"

#include "pnp/bench.hpp"
#include "pnp/metrics.hpp"

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

#include <fmt/core.h>

using namespace pnp;
namespace fs = std::filesystem;

namespace {

std::string slurp(fs::path const &p)
{
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir
{
  fs::path path;
  explicit TempDir(std::string const &tag)
    : path{fs::temp_directory_path() / fmt::format("pnp_{}_{}", tag, ::getpid())}
  {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  TempDir(TempDir const &) = delete;
  TempDir &operator=(TempDir const &) = delete;
};

// Small fast case: 32x32, 2 coils.
std::string const small_case = R"(# test case
[case]
id = "small"
height = 32
width = 32
coils = 2
acceleration = 2
shots = 8
noise_scale = 1e-4
seed = 3

[solver.adjoint]
algorithm = "adjoint"

[solver.hqs]
algorithm = "pnp_hqs"
preconditioner = "f1"
levels = 3
sigma0 = 0.1
sigma_min = 1e-3
lambda = 1000
iterations = 6

[solver.fista]
algorithm = "fista_wavelet"
levels = 3
lambda_reg = 0.002
iterations = 10
)";

int run_cli(std::string const &args, std::string const &env = {})
{
  std::string const cmd = fmt::format("{} {} {} >/dev/null 2>&1", env, PNP_CLI, args);
  int const rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

} // namespace

TEST_CASE("config reader grammar")
{
  auto const doc = ConfigDocument::parse(R"(
# comment
[a]
s = "x \"q\" \\ \t end"  # trailing
n = -1.5e-3
i = 42
b = true

[a.b-c]
k_1 = false
)");
  auto const *a = doc.find("a");
  REQUIRE(a != nullptr);
  CHECK(a->get_string("s") == std::string("x \"q\" \\ \t end"));
  CHECK(a->get_double("n") == -1.5e-3);
  CHECK(a->get_int("i") == 42);
  CHECK(a->get_bool("b") == true);
  CHECK_FALSE(a->get_double("missing").has_value());
  CHECK(a->double_or("missing", 7.0) == 7.0);
  CHECK_NOTHROW(a->reject_unused());
  CHECK_THROWS_AS((void)a->get_int("n"), ConfigError);
  CHECK_THROWS_AS((void)a->get_string("i"), ConfigError);
  auto const sub = doc.with_prefix("a");
  REQUIRE(sub.size() == 1);
  CHECK(sub[0]->name() == "a.b-c");

  auto expect_error = [](std::string const &text, std::string const &needle) {
    try {
      (void)ConfigDocument::parse(text, "t.toml");
      FAIL("no error for: " << text);
    } catch (ConfigError const &e) {
      CHECK_MESSAGE(std::string(e.what()).find(needle) != std::string::npos, e.what());
    }
  };
  expect_error("[a]\nx = 1\nx = 2\n", "t.toml:3");
  expect_error("[a]\n[a]\n", "t.toml:2");
  expect_error("x = 1\n", "t.toml:1");
  expect_error("[a]\nx = \"open\n", "t.toml:2");
  expect_error("[a]\nx = nan\n", "t.toml:2");
  expect_error("[a]\nx = 1e999\n", "t.toml:2");
  expect_error("[a]\nx 1\n", "t.toml:2");
  expect_error("[a b]\n", "t.toml:1");

  auto const unused = ConfigDocument::parse("[t]\ntypo = 1\n");
  CHECK_THROWS_AS(unused.find("t")->reject_unused(), ConfigError);
  CHECK_THROWS_AS(ConfigDocument::load("/nonexistent/case.toml"), ConfigError);
}

TEST_CASE("bench case parsing")
{
  auto const c = parse_bench_case(ConfigDocument::parse(small_case));
  CHECK(c.id == "small");
  CHECK(c.acquisition.shape == Shape{32, 32});
  CHECK(c.acquisition.coils == 2);
  CHECK(c.acquisition.seed == 3);
  CHECK(c.phantom_seed == 3);
  CHECK(c.maps_seed == 3);
  REQUIRE(c.solvers.size() == 3);
  CHECK(c.solvers[0].name == "adjoint");
  CHECK(c.solvers[1].name == "hqs");
  auto const &hqs = c.solvers[1].config;
  CHECK(hqs.algorithm == Algorithm::pnp_hqs);
  CHECK(hqs.preconditioner == Preconditioner::Kind::f1);
  REQUIRE(hqs.schedule.has_value());
  CHECK(hqs.schedule->iterations == 6);
  CHECK(hqs.schedule->lambda == 1000.0);
  CHECK(hqs.denoiser.levels == 3);
  CHECK(hqs.denoiser.kind == DenoiserSpec::Kind::wavelet_soft_threshold);

  auto copy = c;
  override_seed(copy, 9);
  CHECK(copy.acquisition.seed == 9);
  CHECK(copy.phantom_seed == 9);

  auto const pinned = parse_bench_case(ConfigDocument::parse(small_case + "\n"));
  (void)pinned;
  std::string with_pins = small_case;
  with_pins.insert(with_pins.find("seed = 3"), "phantom_seed = 5\n");
  auto p = parse_bench_case(ConfigDocument::parse(with_pins));
  CHECK(p.phantom_seed == 5);
  override_seed(p, 9);
  CHECK(p.phantom_seed == 5);
  CHECK(p.maps_seed == 9);

  auto bad = [](std::string const &text) { return parse_bench_case(ConfigDocument::parse(text)); };
  CHECK_THROWS_AS(bad("[case]\nheight = 32\n"), ConfigError);
  CHECK_THROWS_AS(bad(small_case + "[other]\nx = 1\n"), ConfigError);
  CHECK_THROWS_AS(bad(small_case + "[solver.x]\npreconditioner = \"f1\"\n"), ConfigError);
  CHECK_THROWS_AS(bad(small_case + "[solver.x]\nalgorithm = \"pnp_hqs\"\nsigma0 = 0.1\n"), ConfigError);
  CHECK_THROWS_AS(bad(small_case + "[solver.x]\nalgorithm = \"pnp_hqs\"\nsigmaa = 0.1\n"), ConfigError);
  CHECK_THROWS_AS(bad(small_case + "[solver.x]\nalgorithm = \"magic\"\n"), ConfigError);
  CHECK_THROWS_AS(bad(small_case + "[solver.x]\nalgorithm = \"pnp_hqs\"\ncg_tol = 0\n"), ConfigError);
  CHECK_THROWS_AS(bad("[case]\nheight = 32\nacceleration = 0.5\n[solver.a]\nalgorithm = \"adjoint\"\n"), ConfigError);

  for (char const *name : {"af4.toml", "af16.toml"}) {
    CAPTURE(name);
    CHECK_NOTHROW(load_bench_case(fs::path(PNP_CONFIG_DIR) / name));
  }
}

TEST_CASE("psnr_roi examples")
{
  Shape const s{4, 4};
  ComplexImage const ref(s, cplx{1.0, 0.0});
  Mask const all(s, true);
  CHECK(std::isinf(psnr_roi(ref, ref, all)));
  CHECK(csv_psnr(psnr_roi(ref, ref, all)) == 999.0);
  CHECK(csv_psnr(31.5) == 31.5);

  ComplexImage const x(s, cplx{1.0 + std::sqrt(1e-3), 0.0});
  CHECK(psnr_roi(x, ref, all) == doctest::Approx(30.0).epsilon(1e-12));
  // Magnitude only: a phase flip is free.
  CHECK(std::isinf(psnr_roi(cplx{0.0, 1.0} * ref, ref, all)));

  Mask half(s, false);
  for (std::size_t i = 0; i < 8; ++i) {
    half.set(i, true);
  }
  ComplexImage garbage = ref;
  for (std::size_t i = 8; i < 16; ++i) {
    garbage[i] = 17.0;
  }
  CHECK(std::isinf(psnr_roi(garbage, ref, half)));
  CHECK(std::isfinite(psnr_roi(garbage, ref, all)));
  CHECK_THROWS_AS((void)psnr_roi(x, ref, Mask(s, false)), InvalidArgument);
  CHECK_THROWS_AS((void)psnr_roi(ComplexImage(Shape{2, 2}), ref, all), DimensionError);
}

TEST_CASE("ssim examples")
{
  auto const ph = make_phantom(Shape{32, 32}, 0);
  CHECK(ssim(ph.image, ph.image) == 1.0);

  std::mt19937_64 rng(1);
  auto const noise = test::random_image(ph.image.shape(), rng, 0.3);
  auto const noisy = ph.image + noise;
  double const v = ssim(noisy, ph.image);
  CHECK(v < 0.9);
  CHECK(v > -1.0);
  CHECK(std::abs(ssim(cplx{3.0, 0.0} * noisy, cplx{3.0, 0.0} * ph.image) - v) <= 1e-10);
  CHECK_THROWS_AS((void)ssim(ComplexImage(Shape{8, 8}), ComplexImage(Shape{8, 8})), InvalidArgument);
}

TEST_CASE("case files round trip")
{
  TempDir tmp("case");
  auto const c = parse_bench_case(ConfigDocument::parse(small_case));
  auto const data = simulate_case(c);
  write_case(data, tmp.path);
  for (char const *f : {"phantom.cimg", "mask.cimg", "reference.cimg", "smap_0.cimg", "smap_1.cimg", "traj.csv",
                        "kspace_0.csv", "kspace_1.csv"}) {
    CHECK(fs::exists(tmp.path / f));
  }
  auto const back = read_case(tmp.path);
  CHECK(back.phantom == data.phantom);
  CHECK(back.reference == data.reference);
  CHECK(back.roi == data.roi);
  REQUIRE(back.kspace.coil_count() == 2);
  CHECK(back.kspace.coils[1] == data.kspace.coils[1]);
  REQUIRE(back.trajectory.size() == data.trajectory.size());
  for (std::size_t i = 0; i < back.trajectory.size(); ++i) {
    CHECK(back.trajectory.points()[i].kx == data.trajectory.points()[i].kx);
    CHECK(back.trajectory.density_weights()[i] == data.trajectory.density_weights()[i]);
  }
  CHECK(back.smaps[0] == data.smaps[0]);
  CHECK(slurp(tmp.path / "traj.csv").rfind("kx,ky,weight\n", 0) == 0);
  CHECK_THROWS_AS(read_case(tmp.path / "missing"), Error);
}

TEST_CASE("run_bench artifacts")
{
  TempDir tmp("bench");
  auto const c = parse_bench_case(ConfigDocument::parse(small_case));
  auto const data = simulate_case(c);
  auto const res = run_bench(c, data, tmp.path / "a");
  REQUIRE(res.rows.size() == 3);
  CHECK(res.all_ok());
  CHECK(res.rows[1].solver == "hqs");
  CHECK(res.rows[1].preconditioner == "f1");
  CHECK(res.rows[1].iterations == 6);

  auto const table = slurp(tmp.path / "a" / "table.csv");
  CHECK(table.rfind("solver,algorithm,preconditioner,af,psnr,ssim,iterations,trials,status\n", 0) == 0);
  CHECK(std::count(table.begin(), table.end(), '\n') == 4);
  CHECK(slurp(tmp.path / "a" / "timing.csv").rfind("solver,wall_ms\n", 0) == 0);

  for (auto const &row : res.rows) {
    CAPTURE(row.solver);
    fs::path const dir = tmp.path / "a" / row.solver;
    auto const recon = read_cimg(dir / "recon.cimg");
    auto const residual = read_cimg(dir / "residual.cimg");
    auto const sum = data.reference + residual;
    for (std::size_t i = 0; i < recon.size(); ++i) {
      double const ulp = std::numeric_limits<double>::epsilon() * std::max(std::abs(recon[i]), 1e-300);
      CHECK(std::abs(sum[i] - recon[i]) <= 2.0 * ulp);
    }
    // Metrics recomputed from the file.
    CHECK(std::abs(psnr_roi(recon, data.reference, data.roi) - row.psnr) < 1e-9);
    CHECK(std::abs(ssim(recon, data.reference) - row.ssim) < 1e-12);

    auto const trace = slurp(dir / "trace.csv");
    CHECK(trace.rfind("k,gamma,sigma,fidelity,dx,psnr,ssim\n", 0) == 0);
    CHECK(std::count(trace.begin(), trace.end(), '\n') == row.iterations + 1);

    auto const pgm = slurp(dir / "recon.pgm");
    CHECK(pgm.rfind("P5\n32 32\n65535\n", 0) == 0);
    CHECK(pgm.size() == std::string("P5\n32 32\n65535\n").size() + 32 * 32 * 2);
  }

  // The sigma column of the annealed run is nonincreasing.
  std::istringstream tr(slurp(tmp.path / "a" / "hqs" / "trace.csv"));
  std::string line;
  std::getline(tr, line);
  double prev = std::numeric_limits<double>::infinity();
  int rows = 0;
  while (std::getline(tr, line)) {
    std::vector<std::string> cols;
    std::stringstream ls(line);
    for (std::string f; std::getline(ls, f, ',');) {
      cols.push_back(f);
    }
    REQUIRE(cols.size() == 7);
    double const sigma = std::stod(cols[2]);
    CHECK(sigma <= prev);
    prev = sigma;
    ++rows;
  }
  CHECK(rows == 6);
  CHECK(prev == doctest::Approx(1e-3));

  // Deterministic outputs.
  (void)run_bench(c, data, tmp.path / "b");
  CHECK(slurp(tmp.path / "a" / "table.csv") == slurp(tmp.path / "b" / "table.csv"));
  for (auto const &row : res.rows) {
    CHECK(slurp(tmp.path / "a" / row.solver / "recon.cimg") == slurp(tmp.path / "b" / row.solver / "recon.cimg"));
    CHECK(slurp(tmp.path / "a" / row.solver / "trace.csv") == slurp(tmp.path / "b" / row.solver / "trace.csv"));
  }

  BenchOptions only;
  only.only = {"adjoint"};
  only.repeat = 2;
  auto const one = run_bench(c, data, tmp.path / "c", only);
  REQUIRE(one.rows.size() == 1);
  CHECK(one.rows[0].trials == 2);
}

TEST_CASE("run_bench records solver failures per row")
{
  TempDir tmp("fail");
  std::string text = small_case;
  text += fmt::format("\n[solver.ext]\nalgorithm = \"pnp_hqs\"\ndenoiser = \"external\"\nexecutable = \"{}\"\n"
                      "sigma0 = 0.1\nsigma_min = 0.01\nlambda = 100\niterations = 3\n",
                      PNP_FAKE_DENOISER);
  auto const c = parse_bench_case(ConfigDocument::parse(text));
  auto const data = simulate_case(c);
  ::setenv("FAKE_DENOISER_MODE", "crash", 1);
  auto const res = run_bench(c, data, tmp.path);
  ::unsetenv("FAKE_DENOISER_MODE");
  REQUIRE(res.rows.size() == 4);
  CHECK_FALSE(res.all_ok());
  CHECK(res.rows[0].status == "ok");
  CHECK(res.rows[3].status != "ok");
  CHECK(fs::exists(tmp.path / "table.csv"));
}

TEST_CASE("command line interface")
{
  TempDir tmp("cli");
  fs::path const cfg = tmp.path / "small.toml";
  std::ofstream(cfg) << small_case;
  fs::path const bad = tmp.path / "bad.toml";
  std::ofstream(bad) << "[case]\nheight = \"x\"\n";

  CHECK(run_cli("verify") == 0);
  CHECK(run_cli("") == 2);
  CHECK(run_cli("frobnicate") == 2);
  CHECK(run_cli(fmt::format("simulate --config {} --out {}", bad.string(), (tmp.path / "x").string())) == 2);
  CHECK(run_cli(fmt::format("simulate --config {} --out {}", (tmp.path / "none.toml").string(),
                            (tmp.path / "x").string())) == 2);

  fs::path const d1 = tmp.path / "d1";
  REQUIRE(run_cli(fmt::format("simulate --config {} --out {}", cfg.string(), d1.string())) == 0);
  CHECK(run_cli(fmt::format("reconstruct --config {} --case {} --solver adjoint --solver hqs", cfg.string(),
                            d1.string())) == 0);
  CHECK(fs::exists(d1 / "table.csv"));
  CHECK(fs::exists(d1 / "hqs" / "recon.cimg"));
  CHECK_FALSE(fs::exists(d1 / "fista"));

  // PNP_SEED changes the noise; the same seed reproduces the files.
  fs::path const d2 = tmp.path / "d2";
  fs::path const d3 = tmp.path / "d3";
  REQUIRE(run_cli(fmt::format("simulate --config {} --out {}", cfg.string(), d2.string()), "PNP_SEED=77") == 0);
  REQUIRE(run_cli(fmt::format("simulate --config {} --out {}", cfg.string(), d3.string()), "PNP_SEED=77") == 0);
  CHECK(slurp(d2 / "kspace_0.csv") == slurp(d3 / "kspace_0.csv"));
  CHECK(slurp(d2 / "kspace_0.csv") != slurp(d1 / "kspace_0.csv"));

  // Case/config mismatch is a config error.
  std::string other = small_case;
  other.replace(other.find("coils = 2"), 9, "coils = 3");
  fs::path const mismatch = tmp.path / "mismatch.toml";
  std::ofstream(mismatch) << other;
  CHECK(run_cli(fmt::format("reconstruct --config {} --case {}", mismatch.string(), d1.string())) == 2);

  // A failing solver gives exit code 1.
  std::string ext = small_case + fmt::format("\n[solver.ext]\nalgorithm = \"pnp_hqs\"\ndenoiser = \"external\"\n"
                                             "executable = \"{}\"\nsigma0 = 0.1\nsigma_min = 0.01\nlambda = 100\n"
                                             "iterations = 3\n",
                                             PNP_FAKE_DENOISER);
  fs::path const extcfg = tmp.path / "ext.toml";
  std::ofstream(extcfg) << ext;
  CHECK(run_cli(fmt::format("reconstruct --config {} --case {} --solver ext", extcfg.string(), d1.string()),
                "FAKE_DENOISER_MODE=crash") == 1);
  CHECK(run_cli(fmt::format("reconstruct --config {} --case {} --solver ext", extcfg.string(), d1.string())) == 0);

  // n2n round trip on a directory of CIMG files.
  fs::path const data = tmp.path / "n2n_data";
  fs::create_directories(data);
  std::mt19937_64 rng(2);
  for (int i = 0; i < 2; ++i) {
    write_cimg(data / fmt::format("img{}.cimg", i), make_phantom(Shape{32, 32}, static_cast<std::uint64_t>(i)).image +
                                                        test::random_image(Shape{32, 32}, rng, 0.05));
  }
  fs::path const model = tmp.path / "n2n_model";
  REQUIRE(run_cli(fmt::format("n2n-train --data {} --out {} --steps 5", data.string(), model.string())) == 0);
  CHECK(read_cimg(model / "kernel.cimg").shape() == Shape{5, 5});
  CHECK(fs::exists(model / "loss.csv"));
  fs::path const applied = tmp.path / "n2n_out";
  REQUIRE(run_cli(fmt::format("n2n-apply --kernel {} --data {} --out {}", (model / "kernel.cimg").string(),
                              data.string(), applied.string())) == 0);
  CHECK(read_cimg(applied / "img1.cimg").shape() == Shape{32, 32});
  CHECK(run_cli(fmt::format("n2n-train --data {} --out {} --eta -1", data.string(), model.string())) == 2);
}
