// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "nlosloc/sampling.hpp"
#include "nlosloc/types.hpp"

namespace nlosloc {

// Forward process x_t = (1 - t) x0 + sqrt(t) eps with constant drift -x0;
// t runs over (0, 1]. The reverse grid is strictly decreasing from 1.0 down
// to eps_min, and the step that lands on eps_min treats it as 0 (one-shot,
// no injected noise).
struct DiffusionSchedule {
  std::vector<double> t_grid;
  double eps_min = 1e-3;
  std::string drift = "constant";

  int num_steps() const { return static_cast<int>(t_grid.size()) - 1; }
  static DiffusionSchedule uniform(int steps, double eps_min = 1e-3);
  void validate() const; // throws BadTimestep
};

struct DenoiserOutput {
  FieldGrid x0_hat;
  FieldGrid eps_hat;
};

class Denoiser {
public:
  virtual ~Denoiser() = default;
  virtual DenoiserOutput denoise(const FieldGrid& x_t, double t) const = 0;
};

// Exact denoiser built from the known target: x0_hat = x0 and
// eps_hat = (x_t - (1 - t) x0) / sqrt(t). Test instrument for chain
// correctness.
class OracleDenoiser final : public Denoiser {
public:
  explicit OracleDenoiser(FieldGrid x0) : x0_(std::move(x0)) {}
  DenoiserOutput denoise(const FieldGrid& x_t, double t) const override;

private:
  FieldGrid x0_;
};

// Draws x_t ~ N((1 - t) x0, t I), elementwise.
FieldGrid forward_sample(const FieldGrid& x0, double t, std::uint64_t seed);

// One reverse update from t to t - dt:
//   x <- x + dt * x0_hat - (dt / sqrt(t)) eps_hat
//        + sqrt(dt (t - dt) / t) z,  z ~ N(0, I).
// dt may be 0 (identity) up to t (one-shot to 0, zero injected noise).
FieldGrid reverse_step(const FieldGrid& x_t, const DenoiserOutput& out,
                       double t, double dt, std::uint64_t seed);

// Called after each reverse step with the state and the time it now sits at
// (0.0 for the final one-shot step). Used for measurement re-imposition.
using StepHook = std::function<void(FieldGrid&, double, int)>;

// Iterates reverse_step down the schedule starting from x_T at t = 1 and
// returns the final estimate clipped to [0, 1].
FieldGrid reverse_chain(const FieldGrid& x_T, const Denoiser& denoiser,
                        const DiffusionSchedule& schedule, std::uint64_t seed,
                        const StepHook& hook = nullptr);

// Per-timestep-bucket linear model over local patches. Features per pixel:
// [x_t patch | layout patch | rss patch | rss_dup patch | t | 1] with zero
// padding at the border; targets are (x0, eps) jointly.
struct RidgeDenoiserModel {
  int patch_radius = 2;
  int num_buckets = 10;
  std::vector<Eigen::MatrixXd> weights; // per bucket: feature_dim x 2

  int feature_dim() const {
    const int p = 2 * patch_radius + 1;
    return 4 * p * p + 2;
  }
  int bucket_of(double t) const;
  DenoiserOutput predict(const FieldGrid& x_t, double t,
                         const ConditionTensor& cond) const;

  // Little-endian binary: magic "RDLD", version, bucket count, patch radius,
  // feature dim, then one row-major f64 weight block per bucket.
  std::string serialize() const;
  static RidgeDenoiserModel deserialize(const std::string& bytes);
  void save(const std::filesystem::path& path) const;
  static RidgeDenoiserModel load(const std::filesystem::path& path);
};

struct TrainingScene {
  ConditionTensor cond;
  FieldGrid x0; // normalized ground truth
};

// Draws forward samples per timestep bucket and solves one ridge system per
// bucket ((G + lambda I) W = B on streamed normal equations). Throws
// ShapeMismatch on an empty or inconsistent dataset and SingularSystem when
// a bucket system cannot be solved.
RidgeDenoiserModel train_ridge_denoiser(const std::vector<TrainingScene>& data,
                                        int patch_radius, double ridge_lambda,
                                        std::uint64_t seed,
                                        int draws_per_bucket = 1,
                                        int num_buckets = 10);

// Denoiser view binding a ridge model to one scene's conditioning.
class RidgeDenoiser final : public Denoiser {
public:
  RidgeDenoiser(const RidgeDenoiserModel& model, const ConditionTensor& cond)
      : model_(model), cond_(cond) {}
  DenoiserOutput denoise(const FieldGrid& x_t, double t) const override {
    return model_.predict(x_t, t, cond_);
  }

private:
  const RidgeDenoiserModel& model_;
  const ConditionTensor& cond_;
};

// Ensemble of conditional reverse chains. Each member starts from its own
// x_1 ~ N(0, I); with data_consistency on, measured cells are re-imposed
// after every step (forward-diffused at intermediate t, exact at the end).
// Members are normalized maps with building cells at 0.
std::vector<RadioMap> reconstruct_rm(const ConditionTensor& cond,
                                     const Denoiser& denoiser,
                                     const DiffusionSchedule& schedule,
                                     int ensemble, std::uint64_t seed,
                                     bool data_consistency = true);

// Inverse-distance-weighted interpolation of the sparse measurements; the
// non-generative reconstruction baseline.
RadioMap idw_reconstruct(const ConditionTensor& cond, double power = 2.0);

} // namespace nlosloc
