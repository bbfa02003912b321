#pragma once

// Ground-truth linear difference inclusion: the true (A_k, B_k) is a convex
// combination of known vertices, chosen per step by a mixer.

#include <datalmi/dataset.hpp>
#include <datalmi/io.hpp>
#include <datalmi/linalg.hpp>

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

namespace datalmi {

inline constexpr double kBenchmarkKappa = 7.87;
inline constexpr double kBenchmarkDeltaMin = 0.1;
inline constexpr double kBenchmarkDeltaMax = 10.0;

/// A(delta) = [[1, 0.1], [0, 1 - 0.1 delta]], B = [[0], [0.1 kappa]].
inline SystemPair benchmark_system(double delta, double kappa = kBenchmarkKappa) {
  Matrix a(2, 2), b(2, 1);
  a << 1.0, 0.1, 0.0, 1.0 - 0.1 * delta;
  b << 0.0, 0.1 * kappa;
  return {a, b};
}

/// Piecewise-constant delta: the value of the last breakpoint at or before k.
class DeltaSchedule {
 public:
  DeltaSchedule() : DeltaSchedule(std::vector<std::pair<int, double>>{{0, 0.15}}) {}
  explicit DeltaSchedule(std::vector<std::pair<int, double>> breakpoints, double lo = kBenchmarkDeltaMin,
                         double hi = kBenchmarkDeltaMax)
      : bp_(std::move(breakpoints)) {
    if (bp_.empty()) throw std::invalid_argument("DeltaSchedule: no breakpoints");
    if (bp_.front().first != 0) throw std::invalid_argument("DeltaSchedule: first breakpoint must be at step 0");
    for (std::size_t i = 0; i < bp_.size(); ++i) {
      if (i > 0 && bp_[i].first <= bp_[i - 1].first)
        throw std::invalid_argument("DeltaSchedule: breakpoint steps must be strictly increasing");
      if (!(bp_[i].second >= lo && bp_[i].second <= hi))
        throw std::invalid_argument("DeltaSchedule: delta outside [" + io::format_double(lo) + ", " +
                                    io::format_double(hi) + "]");
    }
  }

  static DeltaSchedule constant(double delta) { return DeltaSchedule({{0, delta}}); }

  double at(int k) const {
    double d = bp_.front().second;
    for (const auto& [step, value] : bp_) {
      if (step > k) break;
      d = value;
    }
    return d;
  }

  const std::vector<std::pair<int, double>>& breakpoints() const { return bp_; }

 private:
  std::vector<std::pair<int, double>> bp_;
};

/// Maps a step index to convex weights over the vertices.
using Mixer = std::function<Vector(int)>;

class PlantModel {
 public:
  PlantModel(std::vector<SystemPair> vertices, Mixer mixer, Vector x0)
      : vertices_(std::move(vertices)), mixer_(std::move(mixer)), x_(std::move(x0)) {
    if (vertices_.empty()) throw DimensionError("PlantModel: no vertices");
    const auto n = vertices_.front().A.rows(), m = vertices_.front().B.cols();
    for (std::size_t v = 0; v < vertices_.size(); ++v) {
      const auto& s = vertices_[v];
      if (s.A.rows() != n || s.A.cols() != n || s.B.rows() != n || s.B.cols() != m)
        throw DimensionError("PlantModel: vertex dimensions differ", static_cast<long>(v));
    }
    if (x_.size() != n) throw DimensionError("PlantModel: initial state has the wrong dimension");
  }

  int state_dim() const { return static_cast<int>(vertices_.front().A.rows()); }
  int input_dim() const { return static_cast<int>(vertices_.front().B.cols()); }
  int step_index() const { return k_; }
  const Vector& state() const { return x_; }
  const std::vector<SystemPair>& vertices() const { return vertices_; }

  /// Validated weights: nonnegative and summing to one within 1e-12.
  Vector weights(int k) const {
    Vector w = mixer_(k);
    if (w.size() != static_cast<Eigen::Index>(vertices_.size()))
      throw DimensionError("PlantModel: mixer returned the wrong number of weights", k);
    if (w.minCoeff() < -1e-12 || std::abs(w.sum() - 1.0) > 1e-12)
      throw std::domain_error("PlantModel: mixer weights leave the simplex at step " + std::to_string(k));
    return w;
  }

  SystemPair realization(int k) const {
    const Vector w = weights(k);
    SystemPair s{Matrix::Zero(state_dim(), state_dim()), Matrix::Zero(state_dim(), input_dim())};
    for (std::size_t v = 0; v < vertices_.size(); ++v) {
      s.A += w(static_cast<Eigen::Index>(v)) * vertices_[v].A;
      s.B += w(static_cast<Eigen::Index>(v)) * vertices_[v].B;
    }
    return s;
  }

  const Vector& step(const Vector& u) {
    if (u.size() != input_dim()) throw DimensionError("step_plant: input has the wrong dimension", k_);
    const SystemPair s = realization(k_);
    x_ = s.A * x_ + s.B * u;
    ++k_;
    return x_;
  }

 private:
  std::vector<SystemPair> vertices_;
  Mixer mixer_;
  Vector x_;
  int k_ = 0;
};

inline Vector step_plant(PlantModel& plant, const Vector& u) { return plant.step(u); }

/// The angular positioning benchmark: vertices at the two delta extremes,
/// weights ((hi - delta) / (hi - lo), (delta - lo) / (hi - lo)).
struct BenchmarkPlant {
  double kappa = kBenchmarkKappa;
  DeltaSchedule schedule;
  double sampling_period = 0.1;
  double delta_lo = kBenchmarkDeltaMin;
  double delta_hi = kBenchmarkDeltaMax;

  PlantModel make(const Vector& x0) const {
    const double lo = delta_lo, hi = delta_hi;
    if (!(lo < hi)) throw std::invalid_argument("BenchmarkPlant: vertex deltas must satisfy lo < hi");
    for (const auto& [step, d] : schedule.breakpoints())
      if (d < lo || d > hi) throw std::invalid_argument("BenchmarkPlant: schedule leaves [lo, hi] at step " +
                                                        std::to_string(step));
    auto sched = schedule;
    Mixer mix = [sched, lo, hi](int k) {
      const double d = sched.at(k);
      Vector w(2);
      w << (hi - d) / (hi - lo), (d - lo) / (hi - lo);
      return w;
    };
    return PlantModel({benchmark_system(lo, kappa), benchmark_system(hi, kappa)}, std::move(mix), x0);
  }
};

/// Independent stream seed for (base, stream) via one splitmix64 round.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// x_{k+1} = A x_k + B u_k from x0 with u_k uniform on [u_lo, u_hi] componentwise.
inline TrajectoryDataset generate_offline_data(const SystemPair& vertex, int T, const Vector& x0, double u_lo,
                                               double u_hi, std::uint64_t seed) {
  if (T < 1) throw std::invalid_argument("generate_offline_data: T must be at least 1");
  if (!(u_lo <= u_hi)) throw std::invalid_argument("generate_offline_data: empty input range");
  const auto n = vertex.A.rows(), m = vertex.B.cols();
  if (x0.size() != n) throw DimensionError("generate_offline_data: x0 has the wrong dimension");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(u_lo, u_hi);
  Matrix xm(n, T), um(m, T), xp(n, T);
  Vector x = x0;
  for (int k = 0; k < T; ++k) {
    Vector u(m);
    for (Eigen::Index i = 0; i < m; ++i) u(i) = dist(rng);
    xm.col(k) = x;
    um.col(k) = u;
    x = vertex.A * x + vertex.B * u;
    xp.col(k) = x;
  }
  return TrajectoryDataset(xp, xm, um);
}

/// sum_{k=0}^{T_e} x_k^T Q x_k + u_k^T R u_k.
inline double true_cost(const std::vector<Vector>& xs, const std::vector<Vector>& us, const Matrix& Q,
                        const Matrix& R, int T_e) {
  if (T_e < 0) throw std::invalid_argument("true_cost: negative horizon");
  if (static_cast<int>(xs.size()) < T_e + 1 || static_cast<int>(us.size()) < T_e + 1)
    throw std::invalid_argument("true_cost: trajectory shorter than T_e + 1");
  double j = 0.0;
  for (int k = 0; k <= T_e; ++k) j += xs[static_cast<std::size_t>(k)].dot(Q * xs[static_cast<std::size_t>(k)]) +
                                     us[static_cast<std::size_t>(k)].dot(R * us[static_cast<std::size_t>(k)]);
  return j;
}

}  // namespace datalmi
