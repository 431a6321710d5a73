#pragma once

#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "otfwi/baselines.hpp"
#include "otfwi/config.hpp"
#include "otfwi/npy.hpp"
#include "otfwi/samplers.hpp"
#include "otfwi/score_net.hpp"

namespace otfwi {

enum class ModelLayout { openfwi, xz };

/// openfwi: array (nz, nx) with row 0 at the surface. xz: array (nx, nz),
/// last index = iz with iz = nz-1 at the surface.
Field2D field_from_array(const NpyArray& a, int index, ModelLayout layout);
NpyArray array_from_field(const Field2D& f, ModelLayout layout, NpyDtype dtype = NpyDtype::f8);
/// Every model in a 2D file or a 3D stack.
std::vector<Field2D> load_models(const std::filesystem::path& path, ModelLayout layout);

/// Output directory, joined onto $OTFWI_OUTPUT_ROOT when that is set and
/// the path is relative.
std::filesystem::path resolve_output(const std::filesystem::path& dir);
inline constexpr const char* kOutputRootEnv = "OTFWI_OUTPUT_ROOT";

struct ExperimentConfig {
  std::string method = "otwepdps";  // dps | otwepdps | w2tv | otwetv

  std::filesystem::path model_path;
  int model_index = 0;
  ModelLayout layout = ModelLayout::openfwi;
  double dx = 10.0;
  double dz = 10.0;

  int n_sources = 3;
  int source_stride = 0;  // 0: spread over the surface
  int source_depth = 0;
  int nt = 300;
  double dt = 1e-3;
  double fp = 20.0;
  double t0 = 0.06;
  SolverConfig solver;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;

  GuidanceConfig guidance;
  DescentConfig descent;
  std::filesystem::path checkpoint;
  double v_floor = 1000.0;
  double v_ceil = 5000.0;

  std::string init_kind = "linear";  // linear | file | truth
  std::filesystem::path init_path;
  double init_top = 2000.0;
  double init_bottom = 3000.0;

  std::filesystem::path output_dir = "out";

  /// Reads every key, validates, and throws ConfigError listing all problems.
  static ExperimentConfig from_doc(const ConfigDoc& doc, bool simulate_only = false);
  /// Every resolved key; from_doc(to_doc()) reproduces the run.
  ConfigDoc to_doc() const;
};

struct ManifestEntry {
  std::string name;
  std::uintmax_t bytes = 0;
  std::uint64_t hash = 0;
};

struct RunResult {
  std::filesystem::path dir;
  std::vector<ManifestEntry> artifacts;
  bool ok = true;
  std::string error;
  MetricsRecord metrics;
};

/// Writes d_obs.npy and v_true.npy (plus config snapshot and manifest).
RunResult run_simulation(const ExperimentConfig& config);
/// Full inversion with every artifact; runtime failures are recorded in the
/// manifest and keep the partial outputs.
RunResult run_experiment(const ExperimentConfig& config);

struct PriorTrainingConfig {
  ScoreNetConfig net;  // nx/nz come from the data
  int n_steps = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  TrainConfig train;
  ModelLayout layout = ModelLayout::openfwi;

  static PriorTrainingConfig from_doc(const ConfigDoc& doc);
};

struct PriorTrainingResult {
  std::filesystem::path checkpoint;
  FieldScaler scaler;
  std::vector<double> epoch_loss;
};

/// Trains on every .npy under `dataset` (sorted by name) and writes the
/// checkpoint plus `<checkpoint>.loss.csv`.
PriorTrainingResult train_prior(const std::filesystem::path& dataset, const PriorTrainingConfig& config,
                                const std::filesystem::path& checkpoint);

std::uint64_t file_hash(const std::filesystem::path& path);

}  // namespace otfwi
