#include "otfwi/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "otfwi/checkpoint.hpp"
#include "otfwi/csv.hpp"
#include "otfwi/error.hpp"
#include "otfwi/image.hpp"
#include "otfwi/metrics.hpp"
#include "otfwi/rng.hpp"

namespace otfwi {

namespace fs = std::filesystem;

Field2D field_from_array(const NpyArray& a, int index, ModelLayout layout) {
  std::size_t base = 0;
  std::size_t r0 = 0, r1 = 0;
  if (a.shape.size() == 2) {
    if (index != 0) throw InvalidArgument("model index " + std::to_string(index) + " given for a 2D array");
    r0 = a.shape[0];
    r1 = a.shape[1];
  } else {
    if (index < 0 || static_cast<std::size_t>(index) >= a.shape[0])
      throw InvalidArgument("model index " + std::to_string(index) + " outside the stack of " +
                            std::to_string(a.shape[0]));
    r0 = a.shape[1];
    r1 = a.shape[2];
    base = static_cast<std::size_t>(index) * r0 * r1;
  }
  if (layout == ModelLayout::xz) {
    Field2D f(static_cast<int>(r0), static_cast<int>(r1));
    for (std::size_t j = 0; j < r0 * r1; ++j) f[j] = a.data[base + j];
    return f;
  }
  const int nz = static_cast<int>(r0), nx = static_cast<int>(r1);
  Field2D f(nx, nz);
  for (int row = 0; row < nz; ++row)
    for (int ix = 0; ix < nx; ++ix) f(ix, nz - 1 - row) = a.data[base + static_cast<std::size_t>(row) * nx + ix];
  return f;
}

NpyArray array_from_field(const Field2D& f, ModelLayout layout, NpyDtype dtype) {
  NpyArray a;
  a.dtype = dtype;
  const auto nx = static_cast<std::size_t>(f.nx()), nz = static_cast<std::size_t>(f.nz());
  if (layout == ModelLayout::xz) {
    a.shape = {nx, nz};
    a.data.assign(f.values().begin(), f.values().end());
  } else {
    a.shape = {nz, nx};
    a.data.resize(nx * nz);
    for (std::size_t row = 0; row < nz; ++row)
      for (std::size_t ix = 0; ix < nx; ++ix)
        a.data[row * nx + ix] = f(static_cast<int>(ix), static_cast<int>(nz - 1 - row));
  }
  if (dtype == NpyDtype::f4)
    for (auto& v : a.data) v = static_cast<float>(v);
  return a;
}

std::vector<Field2D> load_models(const fs::path& path, ModelLayout layout) {
  const NpyArray a = npy_read(path);
  std::vector<Field2D> out;
  const int n = a.shape.size() == 3 ? static_cast<int>(a.shape[0]) : 1;
  for (int k = 0; k < n; ++k) out.push_back(field_from_array(a, k, layout));
  return out;
}

fs::path resolve_output(const fs::path& dir) {
  const char* root = std::getenv(kOutputRootEnv);
  if (root && *root && dir.is_relative()) return fs::path(root) / dir;
  return dir;
}

std::uint64_t file_hash(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return fnv1a64(s.str());
}

namespace {

const std::vector<std::string> kMethods{"dps", "otwepdps", "w2tv", "otwetv"};

const char* layout_name(ModelLayout l) { return l == ModelLayout::xz ? "xz" : "openfwi"; }

ModelLayout read_layout(ConfigReader& r) {
  return r.choice("model.layout", "openfwi", {"openfwi", "xz"}) == "xz" ? ModelLayout::xz : ModelLayout::openfwi;
}

std::string default_kind(const std::string& method) {
  if (method == "dps") return "mse";
  if (method == "w2tv") return "ot_raw";
  return "ot_enhanced";
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : ",") + format_double(x);
  return s;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_doc(const ConfigDoc& doc, bool simulate_only) {
  ExperimentConfig c;
  ConfigReader r(doc);
  c.method = r.choice("method", c.method, kMethods);
  c.model_path = r.text("model.path", "");
  c.model_index = r.integer("model.index", c.model_index);
  c.layout = read_layout(r);
  c.dx = r.real("grid.dx", c.dx);
  c.dz = r.real("grid.dz", c.dz);
  c.n_sources = r.integer("acquisition.n_sources", c.n_sources);
  c.source_stride = r.integer("acquisition.source_stride", c.source_stride);
  c.source_depth = r.integer("acquisition.source_depth", c.source_depth);
  c.nt = r.integer("acquisition.nt", c.nt);
  c.dt = r.real("acquisition.dt", c.dt);
  c.fp = r.real("wavelet.fp", c.fp);
  c.t0 = r.real("wavelet.t0", c.t0);
  c.solver.spatial_order = r.integer("solver.spatial_order", c.solver.spatial_order);
  c.solver.pml_width = r.integer("solver.pml_width", c.solver.pml_width);
  c.solver.pml_reflection_target = r.real("solver.pml_reflection", c.solver.pml_reflection_target);
  c.solver.cfl_safety = r.real("solver.cfl_safety", c.solver.cfl_safety);
  c.solver.pml_reference_velocity = r.real("solver.pml_reference_velocity", c.solver.pml_reference_velocity);
  c.noise_sigma = r.real("noise.sigma", c.noise_sigma);
  c.seed = r.u64("seed", c.seed);

  MisfitSpec m = inversion_misfit();
  const std::string kind =
      r.choice("misfit.kind", default_kind(c.method), {"mse", "ot_raw", "ot_enhanced"});
  m.kind = parse_misfit_kind(kind);
  if (c.method == "dps" && m.kind != MisfitKind::mse) r.problem("misfit.kind: dps uses mse");
  if (c.method == "w2tv" && m.kind != MisfitKind::ot_raw) r.problem("misfit.kind: w2tv uses ot_raw");
  m.k = r.real("misfit.k", m.k);
  m.p = r.integer("misfit.p", m.p);
  m.n_quantile = r.integer("misfit.n_quantile", m.n_quantile);
  m.sigma_weight = r.real("misfit.sigma_weight", m.sigma_weight);
  m.shift_factor = r.real("misfit.shift_factor", m.shift_factor);
  m.negative_policy =
      r.choice("misfit.negative_policy", "clip", {"clip", "error"}) == "clip" ? NegativePolicy::clip : NegativePolicy::error;

  try {
    m.validate();
  } catch (const Error& e) {
    r.problem(std::string("misfit: ") + e.what());
  }

  auto& g = c.guidance;
  g.misfit = m;
  g.rho0 = r.real("guidance.rho0", g.rho0);
  g.c = r.real("guidance.c", g.c);
  g.tau = r.real("guidance.tau", g.tau);
  g.gamma = r.real("guidance.gamma", g.gamma);
  g.eps = r.real("guidance.eps", g.eps);
  g.kappa_max = r.real("guidance.kappa_max", g.kappa_max);
  g.zeta = r.reals("guidance.zeta", g.zeta);
  g.chain_rule = r.choice("guidance.chain_rule", "exact_vjp", {"exact_vjp", "scaled_identity"}) == "exact_vjp"
                     ? ChainRule::exact_vjp
                     : ChainRule::scaled_identity;
  g.vjp_fallback = r.boolean("guidance.vjp_fallback", g.vjp_fallback);

  auto& d = c.descent;
  d.misfit = m;
  d.rho0 = r.real("descent.rho0", d.rho0);
  d.alpha = r.real("descent.alpha", d.alpha);
  d.max_iters = r.integer("descent.max_iters", d.max_iters);
  d.preconditioned = r.boolean("descent.preconditioned", d.preconditioned);
  d.gamma = r.real("descent.gamma", d.gamma);
  d.eps = r.real("descent.eps", d.eps);
  d.c = r.real("descent.c", d.c);
  d.tau = r.real("descent.tau", d.tau);
  d.kappa_max = r.real("descent.kappa_max", d.kappa_max);
  const double smin = r.real("descent.v_min", d.scaler.v_min), smax = r.real("descent.v_max", d.scaler.v_max);
  d.scaler.v_min = smin;
  d.scaler.v_max = smax;

  c.checkpoint = r.text("prior.checkpoint", "");
  c.v_floor = r.real("bracket.v_floor", c.v_floor);
  c.v_ceil = r.real("bracket.v_ceil", c.v_ceil);
  d.v_floor = c.v_floor;
  d.v_ceil = c.v_ceil;
  c.init_kind = r.choice("init.kind", c.init_kind, {"linear", "file", "truth"});
  c.init_path = r.text("init.path", "");
  c.init_top = r.real("init.v_top", c.init_top);
  c.init_bottom = r.real("init.v_bottom", c.init_bottom);
  c.output_dir = r.text("output.dir", c.output_dir.string());
  r.check_unknown();

  if (c.model_path.empty())
    r.problem("model.path: required");
  else if (!fs::is_regular_file(c.model_path))
    r.problem("model.path: no such file " + c.model_path.string());
  if (c.model_index < 0) r.problem("model.index: must be >= 0");
  if (!(c.dx > 0.0) || !(c.dz > 0.0)) r.problem("grid.dx/grid.dz: must be > 0");
  if (c.n_sources < 1) r.problem("acquisition.n_sources: must be >= 1");
  if (c.source_stride < 0) r.problem("acquisition.source_stride: must be >= 0");
  if (c.source_depth < 0) r.problem("acquisition.source_depth: must be >= 0");
  if (c.nt < 2) r.problem("acquisition.nt: must be >= 2");
  if (!(c.dt > 0.0)) r.problem("acquisition.dt: must be > 0");
  if (!(c.fp > 0.0)) r.problem("wavelet.fp: must be > 0");
  if (!(c.noise_sigma >= 0.0)) r.problem("noise.sigma: must be >= 0");
  if (!(c.v_floor > 0.0 && c.v_floor < c.v_ceil)) r.problem("bracket: need 0 < v_floor < v_ceil");
  try {
    c.solver.validate();
  } catch (const Error& e) {
    r.problem(std::string("solver: ") + e.what());
  }
  const bool sampler = c.method == "dps" || c.method == "otwepdps";
  if (simulate_only) {
  } else if (sampler) {
    if (c.checkpoint.empty())
      r.problem("prior.checkpoint: required for " + c.method);
    else if (!fs::is_regular_file(c.checkpoint))
      r.problem("prior.checkpoint: no such file " + c.checkpoint.string());
    try {
      // N is only known once the checkpoint is read; a per-step zeta list is checked then.
      GuidanceConfig probe = g;
      if (probe.zeta.size() != 1) probe.zeta = {probe.zeta.front()};
      probe.validate(1);
    } catch (const ConfigError& e) {
      for (const auto& p : e.problems()) r.problem("guidance: " + p);
    }
  } else {
    try {
      d.validate();
    } catch (const ConfigError& e) {
      for (const auto& p : e.problems()) r.problem("descent: " + p);
    }
    if (c.init_kind == "file" && !fs::is_regular_file(c.init_path))
      r.problem("init.path: no such file " + c.init_path.string());
    if (c.init_kind == "linear" && !(c.init_top > 0.0 && c.init_bottom > 0.0))
      r.problem("init.v_top/init.v_bottom: must be > 0");
  }
  r.finish();
  return c;
}

ConfigDoc ExperimentConfig::to_doc() const {
  ConfigDoc d;
  auto num = [&](const std::string& k, double v) { d.set(k, format_double(v)); };
  auto integer = [&](const std::string& k, long long v) { d.set(k, std::to_string(v)); };
  auto flag = [&](const std::string& k, bool v) { d.set(k, v ? "true" : "false"); };
  d.set("method", method);
  d.set("model.path", model_path.string());
  integer("model.index", model_index);
  d.set("model.layout", layout_name(layout));
  num("grid.dx", dx);
  num("grid.dz", dz);
  integer("acquisition.n_sources", n_sources);
  integer("acquisition.source_stride", source_stride);
  integer("acquisition.source_depth", source_depth);
  integer("acquisition.nt", nt);
  num("acquisition.dt", dt);
  num("wavelet.fp", fp);
  num("wavelet.t0", t0);
  integer("solver.spatial_order", solver.spatial_order);
  integer("solver.pml_width", solver.pml_width);
  num("solver.pml_reflection", solver.pml_reflection_target);
  num("solver.cfl_safety", solver.cfl_safety);
  num("solver.pml_reference_velocity", solver.pml_reference_velocity);
  num("noise.sigma", noise_sigma);
  d.set("seed", std::to_string(seed));
  const MisfitSpec& m = guidance.misfit;
  d.set("misfit.kind", misfit_kind_name(m.kind));
  num("misfit.k", m.k);
  integer("misfit.p", m.p);
  integer("misfit.n_quantile", m.n_quantile);
  num("misfit.sigma_weight", m.sigma_weight);
  num("misfit.shift_factor", m.shift_factor);
  d.set("misfit.negative_policy", m.negative_policy == NegativePolicy::clip ? "clip" : "error");
  num("guidance.rho0", guidance.rho0);
  num("guidance.c", guidance.c);
  num("guidance.tau", guidance.tau);
  num("guidance.gamma", guidance.gamma);
  num("guidance.eps", guidance.eps);
  num("guidance.kappa_max", guidance.kappa_max);
  d.set("guidance.zeta", join(guidance.zeta));
  d.set("guidance.chain_rule", guidance.chain_rule == ChainRule::exact_vjp ? "exact_vjp" : "scaled_identity");
  flag("guidance.vjp_fallback", guidance.vjp_fallback);
  num("descent.rho0", descent.rho0);
  num("descent.alpha", descent.alpha);
  integer("descent.max_iters", descent.max_iters);
  flag("descent.preconditioned", descent.preconditioned);
  num("descent.gamma", descent.gamma);
  num("descent.eps", descent.eps);
  num("descent.c", descent.c);
  num("descent.tau", descent.tau);
  num("descent.kappa_max", descent.kappa_max);
  num("descent.v_min", descent.scaler.v_min);
  num("descent.v_max", descent.scaler.v_max);
  d.set("prior.checkpoint", checkpoint.string());
  num("bracket.v_floor", v_floor);
  num("bracket.v_ceil", v_ceil);
  d.set("init.kind", init_kind);
  d.set("init.path", init_path.string());
  num("init.v_top", init_top);
  num("init.v_bottom", init_bottom);
  d.set("output.dir", output_dir.string());
  return d;
}

namespace {

class OutputDir {
 public:
  explicit OutputDir(RunResult& res) : res_(res) {
    fs::create_directories(res_.dir);
  }
  fs::path path(const std::string& name) const { return res_.dir / name; }
  void record(const std::string& name) {
    const fs::path p = path(name);
    res_.artifacts.push_back({name, fs::file_size(p), file_hash(p)});
  }
  void write_text(const std::string& name, const std::string& text) {
    std::ofstream out(path(name), std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path(name).string());
    out << text;
    out.close();
    record(name);
  }
  void manifest() const {
    std::ofstream out(path("manifest.txt"), std::ios::binary | std::ios::trunc);
    out << "otfwi-manifest 1\n";
    out << "status " << (res_.ok ? "ok" : "error") << "\n";
    if (!res_.ok) {
      std::string msg = res_.error;
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      out << "error " << msg << "\n";
    }
    char hex[17];
    for (const auto& a : res_.artifacts) {
      std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(a.hash));
      out << "artifact " << a.name << " " << a.bytes << " " << hex << "\n";
    }
  }

 private:
  RunResult& res_;
};

struct Observation {
  Grid grid;
  Field2D v_true;
  AcquisitionGeometry geometry;
  SourceWavelet wavelet;
  ShotGather d_obs;
};

Observation observe(const ExperimentConfig& c) {
  const NpyArray a = npy_read(c.model_path);
  Observation o;
  o.v_true = field_from_array(a, c.model_index, c.layout);
  o.grid = Grid(o.v_true.nx(), o.v_true.nz(), c.dx, c.dz);
  int stride = c.source_stride;
  if (stride == 0) stride = c.n_sources > 1 ? (o.grid.nx - 1) / (c.n_sources - 1) : 0;
  o.geometry = surface_acquisition(o.grid, c.n_sources, stride, c.source_depth, c.nt, c.dt);
  o.wavelet = ricker_wavelet(c.fp, c.t0, c.nt, c.dt);
  o.d_obs = forward_operator(VelocityField(o.grid, o.v_true), o.geometry, o.wavelet, c.solver);
  if (c.noise_sigma > 0.0) o.d_obs = add_noise(o.d_obs, c.noise_sigma, derive_seed(c.seed, "noise"));
  return o;
}

NpyArray gather_array(const ShotGather& d) {
  NpyArray a;
  a.shape = {static_cast<std::size_t>(d.n_sources()), static_cast<std::size_t>(d.n_receivers()),
             static_cast<std::size_t>(d.nt())};
  a.data = d.values.raw();
  return a;
}

void write_observation(OutputDir& out, const ExperimentConfig& c, const Observation& o) {
  npy_write(out.path("d_obs.npy"), gather_array(o.d_obs));
  out.record("d_obs.npy");
  npy_write(out.path("v_true.npy"), array_from_field(o.v_true, c.layout));
  out.record("v_true.npy");
}

Field2D initial_model(const ExperimentConfig& c, const Observation& o) {
  if (c.init_kind == "truth") return o.v_true;
  if (c.init_kind == "file") {
    Field2D f = field_from_array(npy_read(c.init_path), 0, c.layout);
    if (!f.same_shape(o.v_true)) throw InvalidArgument("initial model shape differs from the true model");
    return f;
  }
  Field2D f(o.grid.nx, o.grid.nz);
  for (int ix = 0; ix < o.grid.nx; ++ix)
    for (int iz = 0; iz < o.grid.nz; ++iz) {
      const double depth = static_cast<double>(o.grid.nz - 1 - iz) / (o.grid.nz - 1);
      f(ix, iz) = c.init_top + (c.init_bottom - c.init_top) * depth;
    }
  return f;
}

}  // namespace

RunResult run_simulation(const ExperimentConfig& c) {
  RunResult res;
  res.dir = resolve_output(c.output_dir);
  OutputDir out(res);
  out.write_text("config.txt", c.to_doc().to_string());
  try {
    write_observation(out, c, observe(c));
  } catch (const Error& e) {
    res.ok = false;
    res.error = e.what();
  }
  out.manifest();
  return res;
}

RunResult run_experiment(const ExperimentConfig& c) {
  RunResult res;
  res.dir = resolve_output(c.output_dir);
  OutputDir out(res);
  out.write_text("config.txt", c.to_doc().to_string());
  try {
    const Observation o = observe(c);
    write_observation(out, c, o);

    VelocityField v_rec;
    std::string trace_error;
    if (c.method == "dps" || c.method == "otwepdps") {
      const Prior prior = load_checkpoint(c.checkpoint);
      const auto& nc = prior.net.config();
      if (nc.nx != o.grid.nx || nc.nz != o.grid.nz)
        throw ConfigError({"prior.checkpoint: trained on " + std::to_string(nc.nx) + "x" + std::to_string(nc.nz) +
                           " fields, model is " + std::to_string(o.grid.nx) + "x" + std::to_string(o.grid.nz)});
      const WaveProblem p{o.d_obs, o.geometry, o.wavelet, c.solver, o.grid, prior.scaler, c.v_floor, c.v_ceil};
      GuidanceConfig g = c.guidance;
      g.validate(prior.net.schedule().N);
      const InversionResult r = c.method == "dps"
                                    ? dps_sample(p, prior.net, prior.net.schedule(), g, c.seed, &o.v_true)
                                    : otwepdps_sample(p, prior.net, prior.net.schedule(), g, c.seed, &o.v_true);
      v_rec = r.v;
      r.trace.write_csv(out.path("trace.csv"));
    } else {
      const VelocityField init(o.grid, initial_model(c, o));
      const DescentResult r =
          c.method == "w2tv"
              ? w2_tv_descent(init, o.d_obs, o.geometry, o.wavelet, c.solver, c.descent, &o.v_true)
              : otwe_tv_descent(init, o.d_obs, o.geometry, o.wavelet, c.solver, c.descent, &o.v_true);
      v_rec = r.v;
      write_iterate_log(r.log, out.path("trace.csv"));
      trace_error = r.error;
    }
    out.record("trace.csv");
    npy_write(out.path("v_rec.npy"), array_from_field(v_rec.values, c.layout));
    out.record("v_rec.npy");

    res.metrics = compute_metrics(v_rec.values, o.v_true);
    CsvTable mt({"method", "e_l2", "psnr", "ssim"});
    mt.add_row({c.method, res.metrics.e_l2, res.metrics.psnr, res.metrics.ssim});
    mt.write(out.path("metrics.csv"));
    out.record("metrics.csv");

    const double lo = o.v_true.min(), hi = o.v_true.max() > lo ? o.v_true.max() : lo + 1.0;
    render_field(o.v_true, out.path("v_true.pgm"), lo, hi);
    out.record("v_true.pgm");
    render_field(v_rec.values, out.path("v_rec.pgm"), lo, hi);
    out.record("v_rec.pgm");
    const Field2D diff = v_rec.values - o.v_true;
    const double span = diff.max_abs() > 0.0 ? diff.max_abs() : 1.0;
    render_field(diff, out.path("diff.pgm"), -span, span);
    out.record("diff.pgm");
    if (!trace_error.empty()) throw NumericalError(trace_error);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    res.ok = false;
    res.error = e.what();
  }
  out.manifest();
  return res;
}

PriorTrainingConfig PriorTrainingConfig::from_doc(const ConfigDoc& doc) {
  PriorTrainingConfig c;
  ConfigReader r(doc);
  c.net.channels = r.integer("prior.channels", c.net.channels);
  c.net.embed_dim = r.integer("prior.embed_dim", c.net.embed_dim);
  c.n_steps = r.integer("schedule.n_steps", c.n_steps);
  c.beta_start = r.real("schedule.beta_start", c.beta_start);
  c.beta_end = r.real("schedule.beta_end", c.beta_end);
  c.train.epochs = r.integer("train.epochs", c.train.epochs);
  c.train.batch = r.integer("train.batch", c.train.batch);
  c.train.learning_rate = r.real("train.learning_rate", c.train.learning_rate);
  c.train.seed = r.u64("seed", c.train.seed);
  c.layout = read_layout(r);
  r.check_unknown();
  if (c.net.channels < 1 || c.net.channels > 32) r.problem("prior.channels: must lie in 1..32");
  if (c.net.embed_dim < 2 || c.net.embed_dim % 2) r.problem("prior.embed_dim: must be even and >= 2");
  if (c.train.epochs < 1) r.problem("train.epochs: must be >= 1");
  if (c.train.batch < 1) r.problem("train.batch: must be >= 1");
  if (!(c.train.learning_rate > 0.0)) r.problem("train.learning_rate: must be > 0");
  try {
    make_schedule(c.n_steps, c.beta_start, c.beta_end);
  } catch (const Error& e) {
    r.problem(std::string("schedule: ") + e.what());
  }
  r.finish();
  return c;
}

PriorTrainingResult train_prior(const fs::path& dataset, const PriorTrainingConfig& config,
                                const fs::path& checkpoint) {
  std::vector<fs::path> files;
  if (fs::is_regular_file(dataset)) {
    files.push_back(dataset);
  } else if (fs::is_directory(dataset)) {
    for (const auto& e : fs::directory_iterator(dataset))
      if (e.is_regular_file() && e.path().extension() == ".npy") files.push_back(e.path());
    std::sort(files.begin(), files.end());
  } else {
    throw ConfigError({"dataset: no such file or directory " + dataset.string()});
  }
  std::vector<Field2D> models;
  for (const auto& f : files)
    for (auto& m : load_models(f, config.layout)) {
      if (!models.empty() && !m.same_shape(models.front()))
        throw ConfigError({"dataset: " + f.string() + " has shape " + std::to_string(m.nx()) + "x" +
                           std::to_string(m.nz()) + ", expected " + std::to_string(models.front().nx()) + "x" +
                           std::to_string(models.front().nz())});
      models.push_back(std::move(m));
    }
  if (models.size() < 2) throw ConfigError({"dataset: need at least 2 models, found " + std::to_string(models.size())});

  double lo = models.front().min(), hi = models.front().max();
  for (const auto& m : models) {
    lo = std::min(lo, m.min());
    hi = std::max(hi, m.max());
  }
  if (!(hi > lo)) throw ConfigError({"dataset: all velocities are equal; the scaler needs a range"});
  const FieldScaler scaler(lo, hi);
  std::vector<Field2D> xs;
  for (const auto& m : models) xs.push_back(scale_to_model(m, scaler));

  ScoreNetConfig net = config.net;
  net.nx = models.front().nx();
  net.nz = models.front().nz();
  try {
    net.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError({std::string("dataset: ") + e.what()});
  }
  const auto sched = make_schedule(config.n_steps, config.beta_start, config.beta_end);
  TrainResult tr = dsm_train(xs, sched, net, config.train);
  if (checkpoint.has_parent_path()) fs::create_directories(checkpoint.parent_path());
  save_checkpoint(checkpoint, tr.net, scaler);
  CsvTable loss({"epoch", "loss"});
  for (std::size_t e = 0; e < tr.epoch_loss.size(); ++e) loss.add_row({static_cast<long long>(e), tr.epoch_loss[e]});
  loss.write(checkpoint.string() + ".loss.csv");
  return {checkpoint, scaler, tr.epoch_loss};
}

}  // namespace otfwi
