// SPDX-License-Identifier: Apache-2.0
#include "nlosloc/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "nlosloc/dataio.hpp"
#include "nlosloc/rng.hpp"

namespace nlosloc {

DiffusionSchedule DiffusionSchedule::uniform(int steps, double eps_min) {
  if (steps < 1) throw BadTimestep("schedule needs at least one step");
  if (!(eps_min > 0.0) || !(eps_min < 1.0))
    throw BadTimestep("eps_min must lie in (0, 1)");
  DiffusionSchedule s;
  s.eps_min = eps_min;
  s.t_grid.resize(steps + 1);
  for (int k = 0; k <= steps; ++k)
    s.t_grid[k] = 1.0 - (1.0 - eps_min) * k / steps;
  s.t_grid.back() = eps_min;
  s.validate();
  return s;
}

void DiffusionSchedule::validate() const {
  if (t_grid.size() < 2) throw BadTimestep("schedule needs at least one step");
  if (t_grid.front() != 1.0) throw BadTimestep("schedule must start at t = 1");
  for (std::size_t k = 0; k + 1 < t_grid.size(); ++k)
    if (!(t_grid[k] > t_grid[k + 1]))
      throw BadTimestep("schedule times must be strictly decreasing");
  if (!(t_grid.back() > 0.0) || !(t_grid.back() < 1.0))
    throw BadTimestep("terminal time must lie in (0, 1)");
  if (t_grid.back() != eps_min)
    throw BadTimestep("terminal time must equal eps_min");
}

DenoiserOutput OracleDenoiser::denoise(const FieldGrid& x_t, double t) const {
  if (x_t.rows() != x0_.rows() || x_t.cols() != x0_.cols())
    throw ShapeMismatch("state and target shapes disagree");
  if (!(t > 0.0) || t > 1.0) throw BadTimestep("t must lie in (0, 1]");
  DenoiserOutput out;
  out.x0_hat = x0_;
  out.eps_hat = (x_t - (1.0 - t) * x0_) / std::sqrt(t);
  return out;
}

FieldGrid forward_sample(const FieldGrid& x0, double t, std::uint64_t seed) {
  if (!(t > 0.0) || t > 1.0) throw BadTimestep("t must lie in (0, 1]");
  Rng rng(derive_seed(seed, stream_tag("forward")));
  FieldGrid x = (1.0 - t) * x0;
  const double scale = std::sqrt(t);
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    for (Eigen::Index c = 0; c < x.cols(); ++c)
      x(r, c) += scale * rng.gaussian();
  return x;
}

FieldGrid reverse_step(const FieldGrid& x_t, const DenoiserOutput& out,
                       double t, double dt, std::uint64_t seed) {
  if (!(t > 0.0) || t > 1.0) throw BadTimestep("t must lie in (0, 1]");
  if (!(dt >= 0.0) || dt > t)
    throw BadTimestep("dt must lie in [0, t]");
  if (out.x0_hat.rows() != x_t.rows() || out.x0_hat.cols() != x_t.cols() ||
      out.eps_hat.rows() != x_t.rows() || out.eps_hat.cols() != x_t.cols())
    throw ShapeMismatch("denoiser output shape disagrees with the state");

  FieldGrid x =
      x_t + dt * out.x0_hat - (dt / std::sqrt(t)) * out.eps_hat;
  const double var = dt * (t - dt) / t;
  if (var > 0.0) {
    Rng rng(derive_seed(seed, stream_tag("reverse")));
    const double std_dev = std::sqrt(var);
    for (Eigen::Index r = 0; r < x.rows(); ++r)
      for (Eigen::Index c = 0; c < x.cols(); ++c)
        x(r, c) += std_dev * rng.gaussian();
  }
  return x;
}

FieldGrid reverse_chain(const FieldGrid& x_T, const Denoiser& denoiser,
                        const DiffusionSchedule& schedule, std::uint64_t seed,
                        const StepHook& hook) {
  schedule.validate();
  FieldGrid x = x_T;
  const int steps = schedule.num_steps();
  for (int k = 0; k < steps; ++k) {
    const double t = schedule.t_grid[k];
    const bool last = (k == steps - 1);
    // The destination eps_min is treated as 0: the final update one-shots
    // with dt = t, which has zero injected noise.
    const double dt = last ? t : t - schedule.t_grid[k + 1];
    const DenoiserOutput out = denoiser.denoise(x, t);
    x = reverse_step(x, out, t, dt,
                     derive_seed(seed, stream_tag("chain"), k));
    if (hook) hook(x, last ? 0.0 : schedule.t_grid[k + 1], k);
  }
  return x.min(1.0).max(0.0);
}

int RidgeDenoiserModel::bucket_of(double t) const {
  if (!(t > 0.0) || t > 1.0) throw BadTimestep("t must lie in (0, 1]");
  const int b = static_cast<int>(t * num_buckets);
  return std::min(b, num_buckets - 1);
}

namespace {

// Gathers the feature row for one pixel; zero padding beyond the border.
void fill_features(const FieldGrid& x_t, const ConditionTensor& cond,
                   double t, int r, int c, int radius, double* feat) {
  const int n = static_cast<int>(x_t.rows());
  const FieldGrid* planes[4] = {&x_t, &cond.layout, &cond.rss,
                                &cond.rss_dup};
  int idx = 0;
  for (const FieldGrid* plane : planes)
    for (int dr = -radius; dr <= radius; ++dr)
      for (int dc = -radius; dc <= radius; ++dc) {
        const int rr = r + dr, cc = c + dc;
        feat[idx++] = (rr < 0 || cc < 0 || rr >= n || cc >= n)
                          ? 0.0
                          : (*plane)(rr, cc);
      }
  feat[idx++] = t;
  feat[idx] = 1.0;
}

} // namespace

DenoiserOutput RidgeDenoiserModel::predict(const FieldGrid& x_t, double t,
                                           const ConditionTensor& cond) const {
  const int n = static_cast<int>(x_t.rows());
  if (cond.layout.rows() != n || x_t.cols() != n)
    throw ShapeMismatch("state/conditioning shapes disagree");
  const int f = feature_dim();
  const Eigen::MatrixXd& w = weights.at(bucket_of(t));
  if (w.rows() != f)
    throw ModelFormatError("weight block does not match the feature size");

  DenoiserOutput out;
  out.x0_hat = FieldGrid(n, n);
  out.eps_hat = FieldGrid(n, n);
  Eigen::VectorXd feat(f);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      fill_features(x_t, cond, t, r, c, patch_radius, feat.data());
      out.x0_hat(r, c) = w.col(0).dot(feat);
      out.eps_hat(r, c) = w.col(1).dot(feat);
    }
  return out;
}

RidgeDenoiserModel train_ridge_denoiser(const std::vector<TrainingScene>& data,
                                        int patch_radius, double ridge_lambda,
                                        std::uint64_t seed,
                                        int draws_per_bucket,
                                        int num_buckets) {
  if (data.empty()) throw ShapeMismatch("empty training set");
  if (patch_radius < 0) throw ShapeMismatch("patch radius must be >= 0");
  if (!(ridge_lambda >= 0.0))
    throw SingularSystem("ridge_lambda must be nonnegative");
  if (draws_per_bucket < 1 || num_buckets < 1)
    throw ShapeMismatch("draws_per_bucket and num_buckets must be >= 1");
  const int n = static_cast<int>(data.front().x0.rows());
  for (const auto& scene : data)
    if (scene.x0.rows() != n || scene.x0.cols() != n ||
        scene.cond.layout.rows() != n)
      throw ShapeMismatch("training scenes must share one grid size");

  RidgeDenoiserModel model;
  model.patch_radius = patch_radius;
  model.num_buckets = num_buckets;
  const int f = model.feature_dim();
  model.weights.resize(num_buckets);

  using RowMajorMatrix =
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  RowMajorMatrix features(static_cast<Eigen::Index>(n) * n, f);
  Eigen::MatrixXd targets(static_cast<Eigen::Index>(n) * n, 2);
  for (int b = 0; b < num_buckets; ++b) {
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(f, f);
    Eigen::MatrixXd moment = Eigen::MatrixXd::Zero(f, 2);
    const double lo = static_cast<double>(b) / num_buckets;
    const double hi = static_cast<double>(b + 1) / num_buckets;
    for (std::size_t s = 0; s < data.size(); ++s) {
      for (int d = 0; d < draws_per_bucket; ++d) {
        const std::uint64_t draw_seed = derive_seed(
            seed, stream_tag("ridge_train"),
            (static_cast<std::uint64_t>(b) * data.size() + s) *
                    static_cast<std::uint64_t>(draws_per_bucket) +
                d);
        Rng rng(draw_seed);
        const double t = std::max(rng.uniform(lo, hi), 1e-6);
        const double root_t = std::sqrt(t);
        const FieldGrid& x0 = data[s].x0;
        FieldGrid eps(n, n);
        for (int r = 0; r < n; ++r)
          for (int c = 0; c < n; ++c) eps(r, c) = rng.gaussian();
        const FieldGrid x_t = (1.0 - t) * x0 + root_t * eps;
        Eigen::Index row = 0;
        for (int r = 0; r < n; ++r)
          for (int c = 0; c < n; ++c, ++row) {
            fill_features(x_t, data[s].cond, t, r, c, patch_radius,
                          features.row(row).data());
            targets(row, 0) = x0(r, c);
            targets(row, 1) = eps(r, c);
          }
        gram.selfadjointView<Eigen::Lower>().rankUpdate(
            features.transpose(), 1.0);
        moment.noalias() += features.transpose() * targets;
      }
    }
    gram = gram.selfadjointView<Eigen::Lower>();
    gram.diagonal().array() += ridge_lambda;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    if (ldlt.info() != Eigen::Success)
      throw SingularSystem("ridge system is not solvable");
    Eigen::MatrixXd w = ldlt.solve(moment);
    if (!w.allFinite())
      throw SingularSystem("ridge solution is not finite");
    model.weights[b] = std::move(w);
  }
  return model;
}

namespace {

template <typename T>
void put_raw(std::string& out, const T& v) {
  const char* p = reinterpret_cast<const char*>(&v);
  out.append(p, sizeof(T));
}

template <typename T>
T take_raw(const std::string& bytes, std::size_t& off) {
  if (off + sizeof(T) > bytes.size())
    throw ModelFormatError("truncated model file");
  T v;
  std::memcpy(&v, bytes.data() + off, sizeof(T));
  off += sizeof(T);
  return v;
}

} // namespace

std::string RidgeDenoiserModel::serialize() const {
  std::string out = "RDLD";
  put_raw<std::uint32_t>(out, 1u);
  put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(num_buckets));
  put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(patch_radius));
  put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(feature_dim()));
  for (const auto& w : weights) {
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c)
        put_raw<double>(out, w(r, c));
  }
  return out;
}

RidgeDenoiserModel RidgeDenoiserModel::deserialize(const std::string& bytes) {
  if (bytes.size() < 4 || bytes.compare(0, 4, "RDLD") != 0)
    throw ModelFormatError("bad magic (expected RDLD)");
  std::size_t off = 4;
  const auto version = take_raw<std::uint32_t>(bytes, off);
  if (version != 1u) throw ModelFormatError("unsupported model version");
  RidgeDenoiserModel model;
  model.num_buckets =
      static_cast<int>(take_raw<std::uint32_t>(bytes, off));
  model.patch_radius =
      static_cast<int>(take_raw<std::uint32_t>(bytes, off));
  const auto fdim = static_cast<int>(take_raw<std::uint32_t>(bytes, off));
  if (model.num_buckets < 1 || model.patch_radius < 0 ||
      fdim != model.feature_dim())
    throw ModelFormatError("inconsistent model header");
  model.weights.resize(model.num_buckets);
  for (auto& w : model.weights) {
    w.resize(fdim, 2);
    for (Eigen::Index r = 0; r < fdim; ++r)
      for (Eigen::Index c = 0; c < 2; ++c)
        w(r, c) = take_raw<double>(bytes, off);
  }
  if (off != bytes.size()) throw ModelFormatError("trailing bytes in model");
  return model;
}

void RidgeDenoiserModel::save(const std::filesystem::path& path) const {
  write_file_atomic(path, serialize());
}

RidgeDenoiserModel RidgeDenoiserModel::load(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileNotFound("cannot open model: " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

std::vector<RadioMap> reconstruct_rm(const ConditionTensor& cond,
                                     const Denoiser& denoiser,
                                     const DiffusionSchedule& schedule,
                                     int ensemble, std::uint64_t seed,
                                     bool data_consistency) {
  if (ensemble < 1) throw ShapeMismatch("ensemble size must be >= 1");
  const int n = cond.size();
  const auto mask = cond.mask_points();
  std::vector<double> measured;
  measured.reserve(mask.size());
  for (const auto& p : mask) measured.push_back(cond.rss(p.row, p.col));

  std::vector<RadioMap> members;
  members.reserve(ensemble);
  for (int j = 0; j < ensemble; ++j) {
    const std::uint64_t member_seed =
        derive_seed(seed, stream_tag("member"), j);
    Rng init(derive_seed(member_seed, stream_tag("init")));
    FieldGrid x(n, n);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) x(r, c) = init.gaussian();

    StepHook hook;
    if (data_consistency) {
      hook = [&](FieldGrid& state, double t_now, int step) {
        // Re-impose measurements on their forward-diffused scale; at the
        // final step (t_now == 0) the exact values land in the output.
        Rng noise(derive_seed(member_seed, stream_tag("dc"), step));
        const double keep = 1.0 - t_now;
        const double spread = std::sqrt(t_now);
        for (std::size_t i = 0; i < mask.size(); ++i) {
          const double z = spread > 0.0 ? noise.gaussian() : 0.0;
          state(mask[i].row, mask[i].col) =
              keep * measured[i] + spread * z;
        }
      };
    }
    FieldGrid est = reverse_chain(x, denoiser, schedule, member_seed, hook);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c)
        if (cond.layout(r, c) > 0.5) est(r, c) = 0.0;

    RadioMap rm;
    rm.values = std::move(est);
    rm.normalized = true;
    members.push_back(std::move(rm));
  }
  return members;
}

RadioMap idw_reconstruct(const ConditionTensor& cond, double power) {
  if (!(power > 0.0)) throw ShapeMismatch("power must be positive");
  const int n = cond.size();
  const auto mask = cond.mask_points();
  RadioMap rm;
  rm.normalized = true;
  rm.values = FieldGrid::Zero(n, n);
  if (mask.empty()) return rm;

  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      if (cond.layout(r, c) > 0.5) continue;
      double num = 0.0, den = 0.0;
      bool exact = false;
      for (const auto& p : mask) {
        const double d2 = static_cast<double>(p.row - r) * (p.row - r) +
                          static_cast<double>(p.col - c) * (p.col - c);
        if (d2 == 0.0) {
          rm.values(r, c) = cond.rss(p.row, p.col);
          exact = true;
          break;
        }
        const double w = 1.0 / std::pow(d2, 0.5 * power);
        num += w * cond.rss(p.row, p.col);
        den += w;
      }
      if (!exact) rm.values(r, c) = num / den;
    }
  return rm;
}

} // namespace nlosloc
