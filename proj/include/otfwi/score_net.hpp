#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "otfwi/diffusion.hpp"

namespace otfwi {

struct ScoreNetConfig {
  int nx = 16;  // field shape; both must be even
  int nz = 16;
  int channels = 16;
  int embed_dim = 32;

  void validate() const;
  friend bool operator==(const ScoreNetConfig&, const ScoreNetConfig&) = default;
};

/// Small convolutional encoder-decoder predicting the noise ε̂(x, i):
///   h1 = SiLU(conv(x) + A1 e)           full resolution
///   h2 = SiLU(conv(pool h1) + A2 e)     half resolution
///   h3 = SiLU(conv(h2) + A3 e)
///   h4 = SiLU(conv([up h3, h1]) + A4 e)
///   ε̂  = conv(h4) + g(e)·x
/// with e = SiLU(W sin_embed(i) + b). The score is -ε̂ / √(1-ᾱ_i).
class ScoreNet final : public ScoreModel {
 public:
  ScoreNet(ScoreNetConfig config, DiffusionSchedule schedule, std::uint64_t seed);
  ScoreNet(ScoreNetConfig config, DiffusionSchedule schedule, std::vector<double> params);

  Field2D eps(const Field2D& x, int i) const;
  Field2D score(const Field2D& x, int i) const override;
  Field2D vjp(const Field2D& x, int i, const Field2D& cotangent) const override;

  /// ε̂ at (x, i); accumulates dL/dθ for dL/dε̂ = `eps_grad` into `param_grad`.
  Field2D eps_and_backward(const Field2D& x, int i, const std::function<Field2D(const Field2D&)>& eps_grad,
                           std::vector<double>& param_grad) const;

  const ScoreNetConfig& config() const noexcept { return cfg_; }
  const DiffusionSchedule& schedule() const noexcept { return sched_; }
  std::vector<double>& params() noexcept { return params_; }
  const std::vector<double>& params() const noexcept { return params_; }
  std::size_t param_count() const noexcept { return params_.size(); }
  /// Rounds every parameter to the nearest float32 (the checkpoint precision).
  void round_to_float();

 private:
  struct Layout;
  struct Tape;
  void forward(const Field2D& x, int i, Tape& tape) const;
  void backward(const Tape& tape, const Field2D& d_eps, std::vector<double>* param_grad, Field2D* d_x) const;
  void check_input(const Field2D& x, int i) const;

  ScoreNetConfig cfg_;
  DiffusionSchedule sched_;
  std::vector<double> params_;
};

struct TrainConfig {
  int epochs = 40;
  int batch = 32;
  double learning_rate = 2e-3;
  std::uint64_t seed = 0;
};

struct TrainResult {
  ScoreNet net;
  std::vector<double> epoch_loss;
};

/// Denoising score matching with κ(i) = 1-ᾱ_i (equivalently ε-prediction MSE),
/// Adam, uniform step sampling. Parameters end rounded to float32.
TrainResult dsm_train(const std::vector<Field2D>& samples, const DiffusionSchedule& schedule,
                      const ScoreNetConfig& net_config, const TrainConfig& train_config);

}  // namespace otfwi
