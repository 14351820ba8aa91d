#pragma once

// Adam, the step-decay learning-rate schedule, amplitude pruning and the
// generic training loop that ties them together.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "bumpnet/assembly.hpp"
#include "bumpnet/error.hpp"
#include "bumpnet/model.hpp"

namespace bumpnet {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class AdamState {
 public:
  AdamState() = default;
  AdamState(std::size_t size, AdamConfig cfg = {}) : cfg_(cfg), m_(size, 0.0), v_(size, 0.0) {}

  std::size_t size() const { return m_.size(); }
  std::size_t steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }
  std::span<const double> first_moment() const { return m_; }
  std::span<const double> second_moment() const { return v_; }

  /// Bias-corrected Adam descent step on theta.
  void step(std::span<double> theta, std::span<const double> grad, double lr) {
    require(theta.size() == m_.size() && grad.size() == m_.size(), "adam: parameter/gradient length mismatch");
    for (double g : grad)
      if (!std::isfinite(g)) throw NumericalError("adam: non-finite gradient");
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < m_.size(); ++k) {
      m_[k] = cfg_.beta1 * m_[k] + (1.0 - cfg_.beta1) * grad[k];
      v_[k] = cfg_.beta2 * v_[k] + (1.0 - cfg_.beta2) * grad[k] * grad[k];
      const double mhat = m_[k] / c1;
      const double vhat = v_[k] / c2;
      theta[k] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }

  /// Ascent step (gradient sign flipped), used for self-adaptive weights.
  void ascend(std::span<double> theta, std::span<const double> grad, double lr) {
    std::vector<double> neg(grad.begin(), grad.end());
    for (double& g : neg) g = -g;
    step(theta, neg, lr);
  }

 private:
  AdamConfig cfg_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::size_t t_ = 0;
};

inline void adam_step(std::span<double> theta, std::span<const double> grad, AdamState& state, double lr) {
  state.step(theta, grad, lr);
}

/// rate(t) = initial * decay^floor(t / interval).
struct LrSchedule {
  double initial = 1e-3;
  double decay = 0.9;
  std::size_t interval = 1000;

  double rate(std::size_t step) const {
    return initial * std::pow(decay, static_cast<double>(step / interval));
  }
};

struct PruneConfig {
  enum class Mode { None, Threshold, Fraction };
  Mode mode = Mode::None;
  double value = 0.0;         // q for Threshold, rho for Fraction
  std::size_t interval = 0;   // steps between rounds
  std::size_t rounds = 0;

  bool active() const { return mode != Mode::None && interval > 0 && rounds > 0; }
};

inline const char* to_string(PruneConfig::Mode m) {
  switch (m) {
    case PruneConfig::Mode::Threshold: return "threshold";
    case PruneConfig::Mode::Fraction: return "fraction";
    default: return "none";
  }
}

struct PruneResult {
  std::vector<std::size_t> removed;  // indices in the model before pruning
};

/// Bumps to remove, selected by smallest |h| (ties: lowest index first).
/// Never selects every bump.
inline std::vector<std::size_t> select_prunable(const BumpNetModel& model, const PruneConfig& cfg) {
  require(model.include_heights(), "pruning needs bump heights");
  const std::size_t m = model.bump_count();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(model.height(a)) < std::abs(model.height(b));
  });
  std::size_t count = 0;
  if (cfg.mode == PruneConfig::Mode::Fraction) {
    require(cfg.value > 0.0 && cfg.value < 1.0, "prune fraction must lie in (0, 1)");
    count = static_cast<std::size_t>(std::ceil(cfg.value * static_cast<double>(m) - 1e-9));
  } else if (cfg.mode == PruneConfig::Mode::Threshold) {
    require(cfg.value > 0.0, "prune threshold must be positive");
    while (count < m && std::abs(model.height(order[count])) < cfg.value) ++count;
  }
  count = std::min(count, m - 1);
  std::vector<std::size_t> out(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count));
  std::sort(out.begin(), out.end());
  return out;
}

/// Removes low-amplitude bumps and resets the optimizer for the smaller model.
inline PruneResult prune(BumpNetModel& model, AdamState& state, const PruneConfig& cfg) {
  require(model.bump_count() > 1, "cannot prune a model with a single bump");
  PruneResult res{select_prunable(model, cfg)};
  if (!res.removed.empty()) model.remove_bumps(res.removed);
  state = AdamState(model.parameter_count(), state.config());
  return res;
}

struct TraceRow {
  std::size_t step = 0;
  double lr = 0.0;
  double total = 0.0;
  double residual = 0.0;
  double boundary = 0.0;
  std::size_t bump_count = 0;
};

struct LossTrace {
  std::vector<TraceRow> rows;
  std::vector<std::size_t> prune_steps;  // steps after which a prune happened

  double final_loss() const { return rows.empty() ? 0.0 : rows.back().total; }

  /// Mean total loss over the first / last `fraction` of the trace.
  double window_mean(bool tail, double fraction = 0.1) const {
    if (rows.empty()) return 0.0;
    const std::size_t w = std::max<std::size_t>(1, static_cast<std::size_t>(fraction * static_cast<double>(rows.size())));
    const std::size_t begin = tail ? rows.size() - w : 0;
    double s = 0.0;
    for (std::size_t i = begin; i < begin + w; ++i) s += rows[i].total;
    return s / static_cast<double>(w);
  }

  void write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write trace file " + path);
    out << "step,lr,total_loss,residual_loss,boundary_loss,bump_count\n";
    char buf[256];
    for (const auto& r : rows) {
      std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g,%zu\n", r.step, r.lr, r.total, r.residual,
                    r.boundary, r.bump_count);
      out << buf;
    }
  }
};

struct TrainOptions {
  std::size_t epochs = 1000;
  LrSchedule schedule;
  AdamConfig adam;
  PruneConfig prune;
};

template <class Objective>
concept HasPostStep = requires(Objective& o, double lr) { o.post_step(lr); };

/// Algorithm: per step compile frames (with Jacobians), evaluate loss and
/// gradient, take an Adam step, optionally prune. The objective is called as
/// obj(model, compiled, grad) -> LossParts with grad zero-initialized.
template <class Objective>
LossTrace train(BumpNetModel& model, Objective& obj, const TrainOptions& opt) {
  LossTrace trace;
  trace.rows.reserve(opt.epochs);
  AdamState adam(model.parameter_count(), opt.adam);
  std::vector<double> grad;
  std::size_t rounds = 0;
  for (std::size_t step = 0; step < opt.epochs; ++step) {
    const double lr = opt.schedule.rate(step);
    const CompiledModel cm(model, true);
    grad.assign(model.parameter_count(), 0.0);
    const LossParts loss = obj(model, cm, grad);
    trace.rows.push_back({step, lr, loss.total, loss.residual, loss.boundary, model.bump_count()});
    if (!std::isfinite(loss.total))
      throw NumericalError("training diverged at step " + std::to_string(step) + " (loss is not finite)");
    adam.step(model.raw(), grad, lr);
    if constexpr (HasPostStep<Objective>) obj.post_step(lr);
    if (opt.prune.active() && rounds < opt.prune.rounds && (step + 1) % opt.prune.interval == 0 &&
        step + 1 < opt.epochs && model.bump_count() > 1) {
      prune(model, adam, opt.prune);
      trace.prune_steps.push_back(step);
      ++rounds;
    }
  }
  return trace;
}

// ---------------------------------------------------------------------------
// Regression (mean squared error on tabular data).

struct RegressionData {
  std::size_t dim = 0;
  std::vector<double> points;  // row-major N x dim
  std::vector<double> values;
  std::vector<double> scale;   // optional: prediction = scale_k * model(x_k)

  std::size_t size() const { return values.size(); }
  const double* point(std::size_t k) const { return points.data() + k * dim; }
};

class RegressionObjective {
 public:
  RegressionObjective(const RegressionData& data, std::size_t threads = 1) : data_(data), threads_(threads) {
    require(data.size() > 0, "regression data is empty");
    require(data.points.size() == data.size() * data.dim, "regression points/values disagree in length");
    require(data.scale.empty() || data.scale.size() == data.size(), "regression scale has wrong length");
  }

  LossParts operator()(const BumpNetModel& model, const CompiledModel& cm, std::span<double> grad) const {
    require(model.dim() == data_.dim, "regression data dimension does not match model");
    const double inv_n = 1.0 / static_cast<double>(data_.size());
    const bool want_grad = !grad.empty();
    auto acc = assemble(cm, data_.size(), want_grad, threads_, [&](std::size_t k, PointEvaluator& ev) {
      const double* x = data_.point(k);
      const double w = data_.scale.empty() ? 1.0 : data_.scale[k];
      const PointJet u = ev.eval(0, 0, x);
      const double r = w * u.u - data_.values[k];
      if (ev.with_grad()) {
        PointJet s;
        s.u = 2.0 * r * w * inv_n;
        ev.seed(0, 0, x, s);
      }
      return std::array<double, 2>{r * r * inv_n, 0.0};
    });
    if (want_grad) cm.chain_to_raw(acc.frame_adj, acc.amp_adj, grad);
    return {acc.residual, acc.residual, 0.0};
  }

 private:
  const RegressionData& data_;
  std::size_t threads_;
};

/// Mean squared error of the model on the data.
inline double regression_mse(const BumpNetModel& model, const RegressionData& data) {
  const CompiledModel cm(model);
  RegressionObjective obj(data);
  return obj(model, cm, {}).total;
}

/// Fits the model to the data with Adam; returns the loss trace.
inline LossTrace train_regression(BumpNetModel& model, const RegressionData& data, const TrainOptions& opt,
                                  std::size_t threads = 1) {
  RegressionObjective obj(data, threads);
  return train(model, obj, opt);
}

}  // namespace bumpnet
