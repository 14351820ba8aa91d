#pragma once

// Gaussian random field samples on a uniform sensor grid over [0, 1].

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "bumpnet/error.hpp"

namespace bumpnet {

class GrfSampler {
 public:
  /// Squared-exponential covariance on `sensors` equispaced points (ends
  /// included). The diagonal jitter starts at `jitter` and grows tenfold until
  /// the Cholesky factorization succeeds, up to `max_jitter`.
  explicit GrfSampler(std::size_t sensors = 100, double length_scale = 0.2, double sigma = 1.0,
                      double jitter = 1e-10, double max_jitter = 1e-4)
      : length_scale_(length_scale), sigma_(sigma) {
    require(sensors >= 2, "GRF needs at least 2 sensors");
    require(length_scale > 0.0 && sigma > 0.0, "GRF length scale and scale factor must be positive");
    require(jitter > 0.0 && max_jitter >= jitter, "GRF jitter must be positive");
    x_.resize(sensors);
    for (std::size_t i = 0; i < sensors; ++i) x_[i] = static_cast<double>(i) / static_cast<double>(sensors - 1);
    Eigen::MatrixXd k(sensors, sensors);
    for (std::size_t i = 0; i < sensors; ++i)
      for (std::size_t j = 0; j < sensors; ++j) k(i, j) = kernel(x_[i], x_[j]);
    for (double eps = jitter; eps <= max_jitter * (1.0 + 1e-12); eps *= 10.0) {
      Eigen::MatrixXd kj = k;
      kj.diagonal().array() += eps;
      Eigen::LLT<Eigen::MatrixXd> llt(kj);
      if (llt.info() != Eigen::Success) continue;
      Eigen::MatrixXd l = llt.matrixL().toDenseMatrix();
      if (l.allFinite()) {
        chol_ = std::move(l);
        jitter_ = eps;
        return;
      }
    }
    throw NumericalError("GRF covariance is not positive definite even with jitter " + std::to_string(max_jitter));
  }

  double kernel(double a, double b) const {
    const double d = a - b;
    return sigma_ * sigma_ * std::exp(-d * d / (2.0 * length_scale_ * length_scale_));
  }

  std::size_t sensor_count() const { return x_.size(); }
  const std::vector<double>& sensors() const { return x_; }
  double length_scale() const { return length_scale_; }
  double sigma() const { return sigma_; }
  /// Jitter actually added to the diagonal.
  double jitter() const { return jitter_; }

  /// `count` draws f = L z, one per row, row-major count x sensors.
  std::vector<double> sample(std::size_t count, std::uint64_t seed) const {
    const std::size_t m = x_.size();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> out(count * m);
    Eigen::VectorXd z(m);
    for (std::size_t r = 0; r < count; ++r) {
      for (std::size_t i = 0; i < m; ++i) z(i) = normal(rng);
      Eigen::Map<Eigen::VectorXd>(out.data() + r * m, m) = chol_ * z;
    }
    return out;
  }

 private:
  std::vector<double> x_;
  double length_scale_;
  double sigma_;
  double jitter_ = 0.0;
  Eigen::MatrixXd chol_;
};

}  // namespace bumpnet
