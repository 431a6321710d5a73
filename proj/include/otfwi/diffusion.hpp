#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "otfwi/field.hpp"
#include "otfwi/grid.hpp"

namespace otfwi {

enum class ScheduleKind { linear };

/// Steps are 1-based: beta(i), alpha_bar(i) for i = 1..N, alpha_bar(0) = 1.
struct DiffusionSchedule {
  int N = 0;
  double beta_start = 0.0;
  double beta_end = 0.0;
  std::vector<double> beta_, alpha_, alpha_bar_, sigma_hat_;  // index i-1

  double beta(int i) const { return beta_.at(i - 1); }
  double alpha(int i) const { return alpha_.at(i - 1); }
  double alpha_bar(int i) const { return i == 0 ? 1.0 : alpha_bar_.at(i - 1); }
  double sigma_hat(int i) const { return sigma_hat_.at(i - 1); }
  void check_step(int i) const;
};

DiffusionSchedule make_schedule(int N = 1000, double beta_start = 1e-4, double beta_end = 0.02,
                                ScheduleKind kind = ScheduleKind::linear);

/// √ᾱ_i x0 + √(1-ᾱ_i) z with z drawn from `seed`; the draw is returned through `z_out`.
Field2D forward_noising(const Field2D& x0, int i, const DiffusionSchedule& schedule, std::uint64_t seed,
                        Field2D* z_out = nullptr);
Field2D forward_noising_with(const Field2D& x0, int i, const DiffusionSchedule& schedule, const Field2D& z);

/// Prior score s(x, i) of the noised marginal, with its transpose-Jacobian action.
class ScoreModel {
 public:
  virtual ~ScoreModel() = default;
  virtual Field2D score(const Field2D& x, int i) const = 0;
  virtual bool has_vjp() const { return true; }
  virtual Field2D vjp(const Field2D& x, int i, const Field2D& cotangent) const = 0;
};

class ZeroScore final : public ScoreModel {
 public:
  Field2D score(const Field2D& x, int) const override { return Field2D(x.nx(), x.nz(), 0.0); }
  Field2D vjp(const Field2D& x, int, const Field2D&) const override { return Field2D(x.nx(), x.nz(), 0.0); }
};

/// Prior N(mu, s2 I), noised in closed form.
class GaussianScore final : public ScoreModel {
 public:
  GaussianScore(Field2D mu, double s2, DiffusionSchedule schedule);
  Field2D score(const Field2D& x, int i) const override;
  Field2D vjp(const Field2D& x, int i, const Field2D& cotangent) const override;
  /// E[x0 | x_i] in closed form.
  Field2D posterior_mean(const Field2D& x, int i) const;
  double posterior_variance(int i) const;

 private:
  Field2D mu_;
  double s2_;
  DiffusionSchedule sched_;
};

struct GmmComponent {
  double weight = 0.0;
  Field2D mu;
  double s2 = 0.0;
};

/// Isotropic Gaussian mixture, noised in closed form.
class GmmScore final : public ScoreModel {
 public:
  GmmScore(std::vector<GmmComponent> components, DiffusionSchedule schedule);
  Field2D score(const Field2D& x, int i) const override;
  Field2D vjp(const Field2D& x, int i, const Field2D& cotangent) const override;

 private:
  // Responsibilities and per-component scores at (x, i).
  void evaluate(const Field2D& x, int i, std::vector<double>& resp, std::vector<Field2D>& comp) const;
  std::vector<GmmComponent> comps_;
  DiffusionSchedule sched_;
};

Field2D clean_estimate(const Field2D& x, int i, const ScoreModel& model, const DiffusionSchedule& schedule);
Field2D clean_estimate_from_score(const Field2D& x, int i, const Field2D& score, const DiffusionSchedule& schedule);

/// Affine map [v_min, v_max] <-> [-1, 1].
struct FieldScaler {
  double v_min = 0.0;
  double v_max = 1.0;

  FieldScaler() = default;
  FieldScaler(double lo, double hi);
  /// d v / d x
  double jacobian() const noexcept { return (v_max - v_min) / 2.0; }
  double to_model(double v) const noexcept { return 2.0 * (v - v_min) / (v_max - v_min) - 1.0; }
  double from_model(double x) const noexcept { return v_min + (x + 1.0) * (v_max - v_min) / 2.0; }
};

Field2D scale_to_model(const Field2D& v, const FieldScaler& s);
Field2D scale_from_model(const Field2D& x, const FieldScaler& s);

/// DSM regression term with weight κ(i) = 1-ᾱ_i:
/// (1-ᾱ)·mean‖s + (x - √ᾱ x0)/(1-ᾱ)‖².
double dsm_loss(const Field2D& score, const Field2D& x, const Field2D& x0, int i, const DiffusionSchedule& schedule);
/// mean‖ε̂ - ε‖².
double eps_loss(const Field2D& eps_hat, const Field2D& eps);

}  // namespace otfwi
