#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "otfwi/csv.hpp"
#include "otfwi/error.hpp"
#include "otfwi/experiment.hpp"
#include "otfwi/image.hpp"
#include "otfwi/metrics.hpp"
#include "otfwi/parallel.hpp"

namespace fs = std::filesystem;
using namespace otfwi;

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kRuntime = 2;

struct DocOptions {
  std::string config;
  std::vector<std::string> sets;
};

void add_doc_options(CLI::App* cmd, DocOptions& o) {
  cmd->add_option("-c,--config", o.config, "key = value config file");
  cmd->add_option("-s,--set", o.sets, "override, key=value (repeatable)");
}

ConfigDoc build_doc(const DocOptions& o) {
  ConfigDoc doc;
  if (!o.config.empty()) {
    if (!fs::is_regular_file(o.config)) throw ConfigError({"--config: no such file " + o.config});
    doc = ConfigDoc::load(o.config);
  }
  std::vector<std::string> problems;
  for (const auto& s : o.sets) {
    try {
      doc.set_override(s);
    } catch (const ConfigError& e) {
      for (const auto& p : e.problems()) problems.push_back(p);
    }
  }
  if (!problems.empty()) throw ConfigError(problems);
  return doc;
}

ModelLayout layout_of(const std::string& s) { return s == "xz" ? ModelLayout::xz : ModelLayout::openfwi; }

void require_file(const std::string& flag, const std::string& path) {
  if (!fs::is_regular_file(path)) throw ConfigError({flag + ": no such file " + path});
}

int report(const RunResult& r) {
  if (!r.ok) {
    std::cerr << "otfwi: run failed: " << r.error << "\n";
    std::cerr << "otfwi: partial outputs in " << r.dir.string() << "\n";
    return kRuntime;
  }
  std::cout << r.dir.string() << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Seismic velocity reconstruction with optimal-transport guided diffusion"};
  app.require_subcommand(1);
  int jobs = 0;
  app.add_option("-j,--jobs", jobs, "cap on worker threads (0: all cores)")->check(CLI::NonNegativeNumber);

  DocOptions sim_opts, inv_opts, train_opts;
  std::string sim_out, inv_out;

  auto* sim = app.add_subcommand("simulate", "synthesize observations from a velocity model");
  add_doc_options(sim, sim_opts);
  sim->add_option("-o,--out", sim_out, "output directory");

  auto* inv = app.add_subcommand("invert", "run one inversion method and write every artifact");
  add_doc_options(inv, inv_opts);
  inv->add_option("-o,--out", inv_out, "output directory");

  std::string data, ckpt;
  auto* train = app.add_subcommand("train-prior", "train the score network on a model dataset");
  add_doc_options(train, train_opts);
  train->add_option("-d,--data", data, "directory of .npy models, or one .npy stack")->required();
  train->add_option("-o,--out", ckpt, "checkpoint to write")->required();

  std::string rec, truth, metrics_csv, metrics_layout = "openfwi";
  int rec_index = 0, truth_index = 0;
  auto* met = app.add_subcommand("metrics", "compare a reconstruction with the truth");
  met->add_option("--rec", rec, "reconstruction .npy")->required();
  met->add_option("--true", truth, "true model .npy")->required();
  met->add_option("--rec-index", rec_index, "index into a stacked reconstruction");
  met->add_option("--true-index", truth_index, "index into a stacked truth");
  met->add_option("--layout", metrics_layout)->check(CLI::IsMember({"openfwi", "xz"}));
  met->add_option("--csv", metrics_csv, "also write the row to this CSV file");

  std::string render_in, render_out, render_layout = "openfwi";
  int render_index = 0;
  double render_lo = 0.0, render_hi = 0.0;
  auto* ren = app.add_subcommand("render", "write a velocity model as an 8-bit PGM image");
  ren->add_option("-i,--in", render_in, "model .npy")->required();
  ren->add_option("-o,--out", render_out, "output .pgm")->required();
  ren->add_option("--index", render_index, "index into a stacked file");
  ren->add_option("--layout", render_layout)->check(CLI::IsMember({"openfwi", "xz"}));
  auto* lo_opt = ren->add_option("--min", render_lo, "value mapped to black (default: field min)");
  auto* hi_opt = ren->add_option("--max", render_hi, "value mapped to white (default: field max)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    set_max_jobs(jobs);
    if (*sim || *inv) {
      ConfigDoc doc = build_doc(*sim ? sim_opts : inv_opts);
      const std::string& out = *sim ? sim_out : inv_out;
      if (!out.empty()) doc.set("output.dir", out);
      const ExperimentConfig cfg = ExperimentConfig::from_doc(doc, sim->parsed());
      return report(*sim ? run_simulation(cfg) : run_experiment(cfg));
    }
    if (*train) {
      const PriorTrainingConfig cfg = PriorTrainingConfig::from_doc(build_doc(train_opts));
      const auto r = train_prior(data, cfg, resolve_output(ckpt));
      std::cout << r.checkpoint.string() << "\n";
      std::cerr << "otfwi: final epoch loss " << format_double(r.epoch_loss.back()) << "\n";
      return kOk;
    }
    if (*met) {
      require_file("--rec", rec);
      require_file("--true", truth);
      const Field2D a = field_from_array(npy_read(rec), rec_index, layout_of(metrics_layout));
      const Field2D b = field_from_array(npy_read(truth), truth_index, layout_of(metrics_layout));
      if (!a.same_shape(b)) throw ConfigError({"--rec/--true: shapes differ"});
      const MetricsRecord m = compute_metrics(a, b);
      CsvTable t({"e_l2", "psnr", "ssim"});
      t.add_row({m.e_l2, m.psnr, m.ssim});
      std::cout << t.to_string();
      if (!metrics_csv.empty()) t.write(metrics_csv);
      return kOk;
    }
    if (*ren) {
      require_file("--in", render_in);
      const Field2D f = field_from_array(npy_read(render_in), render_index, layout_of(render_layout));
      const double lo = lo_opt->count() ? render_lo : f.min();
      double hi = hi_opt->count() ? render_hi : f.max();
      if (!(hi > lo)) {
        if (lo_opt->count() && hi_opt->count()) throw ConfigError({"--min/--max: need min < max"});
        hi = lo + 1.0;
      }
      render_field(f, render_out, lo, hi);
      return kOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "otfwi: invalid configuration:\n";
    for (const auto& p : e.problems()) std::cerr << "  " << p << "\n";
    return kValidation;
  } catch (const InvalidArgument& e) {
    std::cerr << "otfwi: " << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "otfwi: " << e.what() << "\n";
    return kRuntime;
  }
  return kOk;
}
