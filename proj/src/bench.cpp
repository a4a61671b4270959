#include "pnp/bench.hpp"

#include "pnp/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <fmt/core.h>

namespace pnp {

namespace fs = std::filesystem;

namespace {

std::size_t positive_size(ConfigTable const &t, std::string const &key, long long fallback)
{
  auto const v = t.int_or(key, fallback);
  if (v < 1) {
    throw ConfigError(fmt::format("[{}] {} must be >= 1", t.name(), key));
  }
  return static_cast<std::size_t>(v);
}

std::uint64_t seed_value(ConfigTable const &t, std::string const &key, long long fallback)
{
  auto const v = t.int_or(key, fallback);
  if (v < 0) {
    throw ConfigError(fmt::format("[{}] {} must be nonnegative", t.name(), key));
  }
  return static_cast<std::uint64_t>(v);
}

template <class Fn> auto as_config_error(ConfigTable const &t, Fn &&fn)
{
  try {
    return fn();
  } catch (ConfigError const &) {
    throw;
  } catch (Error const &e) {
    throw ConfigError(fmt::format("[{}] {}", t.name(), e.what()));
  }
}

void write_text(fs::path const &path, std::string const &text)
{
  std::ofstream os(path, std::ios::binary);
  if (!os) {
    throw Error(fmt::format("cannot write '{}'", path.string()));
  }
  os << text;
  if (!os) {
    throw Error(fmt::format("write failed for '{}'", path.string()));
  }
}

std::vector<std::string> read_lines(fs::path const &path)
{
  std::ifstream in(path);
  if (!in) {
    throw FormatError(fmt::format("cannot open '{}'", path.string()));
  }
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (!line.empty()) {
      lines.push_back(line);
    }
  }
  return lines;
}

std::vector<std::vector<double>> read_csv(fs::path const &path, std::string const &header, std::size_t columns)
{
  auto const lines = read_lines(path);
  if (lines.empty() || lines.front() != header) {
    throw FormatError(fmt::format("'{}': expected header '{}'", path.string(), header));
  }
  std::vector<std::vector<double>> rows;
  rows.reserve(lines.size() - 1);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    std::vector<double> row;
    std::stringstream ss(lines[i]);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      char *end = nullptr;
      double const v = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size()) {
        throw FormatError(fmt::format("'{}' line {}: bad number '{}'", path.string(), i + 1, cell));
      }
      row.push_back(v);
    }
    if (row.size() != columns) {
      throw FormatError(fmt::format("'{}' line {}: expected {} columns", path.string(), i + 1, columns));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string csv_cell(std::string s)
{
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

std::string optional_number(std::optional<double> const &v, bool is_psnr)
{
  if (!v) {
    return "";
  }
  return fmt::format("{:.17g}", is_psnr ? csv_psnr(*v) : *v);
}

} // namespace

SolverConfig parse_solver_config(ConfigTable const &t)
{
  return as_config_error(t, [&] {
    SolverConfig cfg;
    auto const algo = t.get_string("algorithm");
    if (!algo) {
      throw ConfigError(fmt::format("[{}] missing 'algorithm'", t.name()));
    }
    cfg.algorithm = parse_algorithm(*algo);
    cfg.preconditioner = parse_preconditioner_kind(t.string_or("preconditioner", "identity"));
    cfg.alpha = t.double_or("alpha", cfg.alpha);
    cfg.denoiser.kind = parse_denoiser_kind(t.string_or("denoiser", "wavelet_soft_threshold"));
    cfg.denoiser.levels = static_cast<int>(t.int_or("levels", cfg.denoiser.levels));
    cfg.denoiser.tau_gain = t.double_or("tau_gain", cfg.denoiser.tau_gain);
    cfg.denoiser.executable = t.string_or("executable", "");
    cfg.denoiser.working_dir = t.string_or("working_dir", "");
    cfg.iterations = static_cast<int>(t.int_or("iterations", cfg.iterations));
    if (t.has("sigma0")) {
      AnnealingSchedule s;
      s.sigma0 = *t.get_double("sigma0");
      auto const smin = t.get_double("sigma_min");
      if (!smin) {
        throw ConfigError(fmt::format("[{}] sigma0 requires sigma_min", t.name()));
      }
      s.sigma_min = *smin;
      s.lambda = t.double_or("lambda", 1.0);
      s.iterations = cfg.iterations;
      cfg.schedule = s;
    }
    cfg.gamma = t.double_or("gamma", cfg.gamma);
    cfg.sigma = t.double_or("sigma", cfg.sigma);
    cfg.lambda_reg = t.double_or("lambda_reg", cfg.lambda_reg);
    cfg.cg_tol = t.double_or("cg_tol", cfg.cg_tol);
    cfg.cg_max_iter = static_cast<int>(t.int_or("cg_max_iter", cfg.cg_max_iter));
    cfg.stop_rel = t.double_or("stop_rel", cfg.stop_rel);
    cfg.stop_abs = t.double_or("stop_abs", cfg.stop_abs);
    auto const init = t.string_or("init", "adjoint");
    if (init == "adjoint") {
      cfg.init = Initialization::adjoint;
    } else if (init == "zero") {
      cfg.init = Initialization::zero;
    } else {
      throw ConfigError(fmt::format("[{}] init must be 'adjoint' or 'zero'", t.name()));
    }
    cfg.power_iterations = static_cast<int>(t.int_or("power_iterations", cfg.power_iterations));
    cfg.power_seed = seed_value(t, "power_seed", 0);
    if (auto const lm = t.get_double("lambda_max")) {
      cfg.lambda_max = *lm;
    }
    t.reject_unused();
    cfg.validate();
    return cfg;
  });
}

BenchCase parse_bench_case(ConfigDocument const &doc)
{
  auto const *ct = doc.find("case");
  if (!ct) {
    throw ConfigError("missing [case] table");
  }
  BenchCase c;
  as_config_error(*ct, [&] {
    c.id = ct->string_or("id", c.id);
    auto &a = c.acquisition;
    a.shape.height = positive_size(*ct, "height", 64);
    a.shape.width = positive_size(*ct, "width", 64);
    a.coils = positive_size(*ct, "coils", 4);
    a.acceleration = ct->double_or("acceleration", a.acceleration);
    a.shots = positive_size(*ct, "shots", 16);
    a.noise_scale = ct->double_or("noise_scale", a.noise_scale);
    a.seed = seed_value(*ct, "seed", 0);
    c.phantom_seed_set = ct->has("phantom_seed");
    c.maps_seed_set = ct->has("maps_seed");
    c.phantom_seed = seed_value(*ct, "phantom_seed", static_cast<long long>(a.seed));
    c.maps_seed = seed_value(*ct, "maps_seed", static_cast<long long>(a.seed));
    auto const maps = ct->string_or("maps", "truth");
    if (maps == "truth") {
      c.maps = MapSource::truth;
    } else if (maps == "estimated") {
      c.maps = MapSource::estimated;
    } else {
      throw ConfigError("[case] maps must be 'truth' or 'estimated'");
    }
    c.smap_window = ct->double_or("smap_window", c.smap_window);
    c.reference_path = ct->string_or("reference", c.reference_path.string());
    ct->reject_unused();
    if (!(a.acceleration >= 1.0) || !(a.noise_scale >= 0.0) || !(c.smap_window > 0.0)) {
      throw ConfigError("[case] requires acceleration >= 1, noise_scale >= 0, smap_window > 0");
    }
    return 0;
  });

  for (auto const &t : doc.tables()) {
    if (t.name() != "case" && t.name().rfind("solver.", 0) != 0) {
      throw ConfigError(fmt::format("unknown table [{}]", t.name()));
    }
  }
  for (auto const *t : doc.with_prefix("solver")) {
    std::string const name = t->name().substr(std::string("solver.").size());
    if (name.find('.') != std::string::npos) {
      throw ConfigError(fmt::format("invalid solver table [{}]", t->name()));
    }
    c.solvers.push_back({name, parse_solver_config(*t)});
  }
  if (c.solvers.empty()) {
    throw ConfigError("no [solver.<name>] tables");
  }
  return c;
}

void override_seed(BenchCase &c, std::uint64_t seed)
{
  c.acquisition.seed = seed;
  if (!c.phantom_seed_set) {
    c.phantom_seed = seed;
  }
  if (!c.maps_seed_set) {
    c.maps_seed = seed;
  }
}

BenchCase load_bench_case(fs::path const &path)
{
  BenchCase c = parse_bench_case(ConfigDocument::load(path));
  if (char const *env = std::getenv("PNP_SEED"); env && *env) {
    char *end = nullptr;
    unsigned long long const v = std::strtoull(env, &end, 10);
    if (*end != '\0' || env[0] == '-') {
      throw ConfigError(fmt::format("PNP_SEED must be a nonnegative integer, got '{}'", env));
    }
    override_seed(c, v);
  }
  return c;
}

CaseData simulate_case(BenchCase const &c)
{
  auto const &a = c.acquisition;
  CaseData d;
  Phantom ph = make_phantom(a.shape, c.phantom_seed);
  d.phantom = ph.image;
  d.roi = ph.roi;
  SensitivityMaps truth = make_coil_maps(a.shape, a.coils, c.maps_seed, ph.roi);
  d.trajectory = make_spiral(a);
  d.kspace = acquire(a, d.phantom, truth, d.trajectory);
  if (c.maps == MapSource::truth) {
    d.smaps = std::move(truth);
    d.reference = d.phantom;
  } else {
    SmapEstimationOptions opts;
    opts.window = c.smap_window;
    opts.support = ph.roi;
    d.smaps = estimate_smaps(d.kspace, d.trajectory, a.shape, opts);
    ComplexImage ref(a.shape);
    for (std::size_t l = 0; l < a.coils; ++l) {
      ref += conj_hadamard(d.smaps[l], hadamard(truth[l], d.phantom));
    }
    d.reference = std::move(ref);
  }
  return d;
}

void write_case(CaseData const &d, fs::path const &dir)
{
  fs::create_directories(dir);
  write_cimg(dir / "phantom.cimg", d.phantom);
  write_cimg(dir / "mask.cimg", d.roi.as_image());
  write_cimg(dir / "reference.cimg", d.reference);
  for (std::size_t l = 0; l < d.smaps.coil_count(); ++l) {
    write_cimg(dir / fmt::format("smap_{}.cimg", l), d.smaps[l]);
  }
  std::string traj = "kx,ky,weight\n";
  auto const pts = d.trajectory.points();
  auto const w = d.trajectory.density_weights();
  for (std::size_t m = 0; m < pts.size(); ++m) {
    traj += fmt::format("{:.17g},{:.17g},{:.17g}\n", pts[m].kx, pts[m].ky, w[m]);
  }
  write_text(dir / "traj.csv", traj);
  for (std::size_t l = 0; l < d.kspace.coil_count(); ++l) {
    std::string ks = "re,im\n";
    for (auto const &v : d.kspace.coils[l]) {
      ks += fmt::format("{:.17g},{:.17g}\n", v.real(), v.imag());
    }
    write_text(dir / fmt::format("kspace_{}.csv", l), ks);
  }
}

CaseData read_case(fs::path const &dir, fs::path const &reference)
{
  CaseData d;
  d.phantom = read_cimg(dir / "phantom.cimg");
  d.roi = Mask::from_image(read_cimg(dir / "mask.cimg"));
  if (d.roi.shape() != d.phantom.shape()) {
    throw FormatError("mask.cimg and phantom.cimg differ in shape");
  }
  fs::path const ref_path = reference.is_absolute() ? reference : dir / reference;
  d.reference = fs::exists(ref_path) ? read_cimg(ref_path) : d.phantom;
  if (d.reference.shape() != d.phantom.shape()) {
    throw FormatError("reference image differs in shape from the phantom");
  }

  std::vector<ComplexImage> maps;
  for (std::size_t l = 0; fs::exists(dir / fmt::format("smap_{}.cimg", l)); ++l) {
    maps.push_back(read_cimg(dir / fmt::format("smap_{}.cimg", l)));
    if (maps.back().shape() != d.phantom.shape()) {
      throw FormatError(fmt::format("smap_{}.cimg has the wrong shape", l));
    }
  }
  if (maps.empty()) {
    throw FormatError(fmt::format("no smap_0.cimg in '{}'", dir.string()));
  }
  std::size_t const coils = maps.size();
  d.smaps = SensitivityMaps(std::move(maps), Mask(d.phantom.shape(), true));

  auto const traj_rows = read_csv(dir / "traj.csv", "kx,ky,weight", 3);
  std::vector<KPoint> pts;
  std::vector<double> w;
  for (auto const &r : traj_rows) {
    pts.push_back({r[0], r[1]});
    w.push_back(r[2]);
  }
  d.trajectory = Trajectory(std::move(pts), std::move(w));

  std::vector<KSpaceSamples> coil_data;
  for (std::size_t l = 0; l < coils; ++l) {
    auto const rows = read_csv(dir / fmt::format("kspace_{}.csv", l), "re,im", 2);
    KSpaceSamples s;
    s.reserve(rows.size());
    for (auto const &r : rows) {
      s.emplace_back(r[0], r[1]);
    }
    if (s.size() != d.trajectory.size()) {
      throw FormatError(fmt::format("kspace_{}.csv has {} samples, trajectory has {}", l, s.size(), d.trajectory.size()));
    }
    coil_data.push_back(std::move(s));
  }
  d.kspace = MulticoilKSpace(std::move(coil_data));
  return d;
}

bool BenchResult::all_ok() const
{
  return std::all_of(rows.begin(), rows.end(), [](BenchRow const &r) { return r.status == "ok"; });
}

double csv_psnr(double psnr)
{
  return std::min(psnr, 999.0);
}

std::string format_table(std::vector<BenchRow> const &rows)
{
  std::string s = "solver,algorithm,preconditioner,af,psnr,ssim,iterations,trials,status\n";
  for (auto const &r : rows) {
    s += fmt::format("{},{},{},{:g},{:.6f},{:.6f},{},{},{}\n", r.solver, r.algorithm, r.preconditioner, r.acceleration,
                     csv_psnr(r.psnr), r.ssim, r.iterations, r.trials, csv_cell(r.status));
  }
  return s;
}

std::string format_timing(std::vector<BenchRow> const &rows)
{
  std::string s = "solver,wall_ms\n";
  for (auto const &r : rows) {
    s += fmt::format("{},{:.3f}\n", r.solver, r.wall_ms);
  }
  return s;
}

std::string format_trace(SolverTrace const &trace)
{
  std::string s = "k,gamma,sigma,fidelity,dx,psnr,ssim\n";
  for (auto const &e : trace.entries()) {
    s += fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{},{}\n", e.k, e.gamma, e.sigma, e.fidelity, e.iterate_change,
                     optional_number(e.psnr, true), optional_number(e.ssim, false));
  }
  return s;
}

void write_pgm16(fs::path const &path, ComplexImage const &img, double peak)
{
  std::ofstream os(path, std::ios::binary);
  if (!os) {
    throw Error(fmt::format("cannot write '{}'", path.string()));
  }
  os << "P5\n" << img.width() << ' ' << img.height() << "\n65535\n";
  for (std::size_t i = 0; i < img.size(); ++i) {
    double v = peak > 0.0 ? std::abs(img[i]) / peak : 0.0;
    v = std::clamp(v, 0.0, 1.0);
    auto const q = static_cast<std::uint16_t>(std::lround(v * 65535.0));
    char const bytes[2] = {static_cast<char>(q >> 8), static_cast<char>(q & 0xff)};
    os.write(bytes, 2);
  }
  if (!os) {
    throw Error(fmt::format("write failed for '{}'", path.string()));
  }
}

BenchResult run_bench(BenchCase const &c, CaseData const &data, fs::path const &out_dir, BenchOptions const &opts)
{
  if (opts.repeat < 1) {
    throw InvalidArgument("run_bench: repeat must be >= 1");
  }
  for (auto const &name : opts.only) {
    bool const known =
        std::any_of(c.solvers.begin(), c.solvers.end(), [&](NamedSolver const &s) { return s.name == name; });
    if (!known) {
      throw ConfigError(fmt::format("unknown solver '{}'", name));
    }
  }
  fs::create_directories(out_dir);

  // Trial 0 is the stored acquisition; later trials only change the noise seed.
  std::vector<CaseData> extra;
  for (int r = 1; r < opts.repeat; ++r) {
    BenchCase t = c;
    t.acquisition.seed = c.acquisition.seed + static_cast<std::uint64_t>(r);
    extra.push_back(simulate_case(t));
  }
  auto trial_data = [&](int r) -> CaseData const & { return r == 0 ? data : extra[static_cast<std::size_t>(r - 1)]; };

  std::vector<ForwardModel> models;
  for (int r = 0; r < opts.repeat; ++r) {
    models.emplace_back(trial_data(r).trajectory, trial_data(r).smaps);
  }

  double peak = 0.0;
  for (std::size_t i = 0; i < data.reference.size(); ++i) {
    if (data.roi[i]) {
      peak = std::max(peak, std::abs(data.reference[i]));
    }
  }

  BenchResult result;
  for (auto const &s : c.solvers) {
    if (!opts.only.empty() && std::find(opts.only.begin(), opts.only.end(), s.name) == opts.only.end()) {
      continue;
    }
    BenchRow row;
    row.solver = s.name;
    row.algorithm = to_string(s.config.algorithm);
    row.preconditioner = to_string(s.config.preconditioner);
    row.acceleration = c.acquisition.acceleration;
    fs::path const dir = out_dir / s.name;
    fs::create_directories(dir);

    double psnr_sum = 0.0;
    double ssim_sum = 0.0;
    for (int r = 0; r < opts.repeat; ++r) {
      CaseData const &d = trial_data(r);
      Monitor monitor = [&](ComplexImage const &x) {
        return IterateMetrics{psnr_roi(x, d.reference, d.roi), ssim(x, d.reference)};
      };
      auto const t0 = std::chrono::steady_clock::now();
      try {
        SolveResult res = solve(models[static_cast<std::size_t>(r)], d.kspace, s.config, nullptr, monitor);
        auto const t1 = std::chrono::steady_clock::now();
        row.wall_ms += std::chrono::duration<double, std::milli>(t1 - t0).count();
        double const p = psnr_roi(res.x, d.reference, d.roi);
        double const q = ssim(res.x, d.reference);
        psnr_sum += p;
        ssim_sum += q;
        ++row.trials;
        if (r == 0) {
          row.iterations = static_cast<int>(res.trace.size());
          write_text(dir / "trace.csv", format_trace(res.trace));
          write_cimg(dir / "recon.cimg", res.x);
          write_cimg(dir / "residual.cimg", res.x - d.reference);
          write_pgm16(dir / "recon.pgm", res.x, peak);
        }
      } catch (SolverError const &e) {
        row.status = fmt::format("error: {}", e.what());
        if (r == 0) {
          row.iterations = static_cast<int>(e.trace().size());
          write_text(dir / "trace.csv", format_trace(e.trace()));
        }
        break;
      } catch (Error const &e) {
        row.status = fmt::format("error: {}", e.what());
        break;
      }
    }
    if (row.trials > 0 && row.status == "ok") {
      row.psnr = psnr_sum / row.trials;
      row.ssim = ssim_sum / row.trials;
    } else {
      row.psnr = std::nan("");
      row.ssim = std::nan("");
    }
    if (row.trials > 0) {
      row.wall_ms /= row.trials;
    }
    result.rows.push_back(std::move(row));
  }
  write_text(out_dir / "table.csv", format_table(result.rows));
  write_text(out_dir / "timing.csv", format_timing(result.rows));
  return result;
}

} // namespace pnp
