#pragma once

// Loss/gradient assembly over point sets on top of CompiledModel.
//
// A loss is a sum of per-item terms. Each item evaluates the model at one or
// more points through a PointEvaluator, returns its loss contribution, and
// seeds the adjoints of the outputs it used. Items are processed in fixed
// chunks; partial sums are reduced in chunk order.

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "bumpnet/compiled.hpp"
#include "bumpnet/parallel.hpp"

namespace bumpnet {

struct LossParts {
  double total = 0.0;
  double residual = 0.0;
  double boundary = 0.0;
};

class PointEvaluator {
 public:
  static constexpr std::size_t kSlots = 2;

  PointEvaluator(const CompiledModel& cm, bool with_grad) : cm_(cm), with_grad_(with_grad) {
    for (auto& c : cache_) c.resize(cm.cache_size());
    if (with_grad) {
      frame_adj_.assign(cm.bump_count() * cm.frame_size(), 0.0);
      amp_adj_.assign(cm.bump_count(), 0.0);
    }
  }

  /// Evaluates at x (optionally with per-bump amplitudes), remembering the
  /// intermediates in `slot` for a following seed() call.
  PointJet eval(std::size_t slot, int order, const double* x, const double* amps = nullptr) {
    return cm_.forward(order, x, amps, cache_[slot].data());
  }

  /// Back-propagates adjoint seeds for the outputs of eval(slot, ...).
  void seed(std::size_t slot, int order, const double* x, const PointJet& s, const double* amps = nullptr,
            double* amp_adj_out = nullptr) {
    if (!with_grad_) return;
    cm_.backward(order, x, amps, cache_[slot].data(), s, frame_adj_.data(),
                 amp_adj_out ? amp_adj_out : amp_adj_.data());
  }

  bool with_grad() const { return with_grad_; }
  std::vector<double>& frame_adj() { return frame_adj_; }
  std::vector<double>& amp_adj() { return amp_adj_; }

 private:
  const CompiledModel& cm_;
  bool with_grad_;
  std::array<std::vector<double>, kSlots> cache_;
  std::vector<double> frame_adj_;
  std::vector<double> amp_adj_;
};

struct AssembledLoss {
  double residual = 0.0;
  double boundary = 0.0;
  std::vector<double> frame_adj;
  std::vector<double> amp_adj;
};

/// item(index, evaluator) -> std::array<double, 2>{residual part, boundary part}.
template <class Item>
AssembledLoss assemble(const CompiledModel& cm, std::size_t items, bool with_grad, std::size_t threads, Item&& item) {
  const std::size_t chunks = chunk_count(items);
  std::vector<AssembledLoss> partial(chunks);
  for_each_chunk(items, threads, [&](std::size_t c, std::size_t begin, std::size_t end) {
    PointEvaluator ev(cm, with_grad);
    AssembledLoss& out = partial[c];
    for (std::size_t i = begin; i < end; ++i) {
      const auto parts = item(i, ev);
      out.residual += parts[0];
      out.boundary += parts[1];
    }
    if (with_grad) {
      out.frame_adj = std::move(ev.frame_adj());
      out.amp_adj = std::move(ev.amp_adj());
    }
  });
  AssembledLoss total;
  if (with_grad) {
    total.frame_adj.assign(cm.bump_count() * cm.frame_size(), 0.0);
    total.amp_adj.assign(cm.bump_count(), 0.0);
  }
  for (const auto& p : partial) {
    total.residual += p.residual;
    total.boundary += p.boundary;
    if (!with_grad) continue;
    for (std::size_t k = 0; k < total.frame_adj.size(); ++k) total.frame_adj[k] += p.frame_adj[k];
    for (std::size_t k = 0; k < total.amp_adj.size(); ++k) total.amp_adj[k] += p.amp_adj[k];
  }
  return total;
}

}  // namespace bumpnet
