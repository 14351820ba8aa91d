#pragma once

// Fully connected network: tanh on hidden layers, identity on the output.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "bumpnet/error.hpp"

namespace bumpnet {

class Mlp {
 public:
  /// Activations of one forward pass, kept for backward().
  struct Workspace {
    std::vector<std::vector<double>> act;  // act[0] is the input, act.back() the output
  };

  Mlp() = default;

  /// Glorot-uniform weights, zero biases.
  Mlp(std::vector<std::size_t> widths, std::uint64_t seed) : widths_(std::move(widths)) {
    validate();
    params_.assign(count(widths_), 0.0);
    std::mt19937_64 rng(seed);
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
      const std::size_t in = widths_[l], out = widths_[l + 1];
      const double a = std::sqrt(6.0 / static_cast<double>(in + out));
      std::uniform_real_distribution<double> u(-a, a);
      for (std::size_t k = 0; k < in * out; ++k) params_[off + k] = u(rng);
      off += in * out + out;
    }
  }

  Mlp(std::vector<std::size_t> widths, std::vector<double> params)
      : widths_(std::move(widths)), params_(std::move(params)) {
    validate();
    require(params_.size() == count(widths_), "MLP parameter vector has the wrong length");
  }

  /// sum over layers of (w_in + 1) * w_out
  static std::size_t count(const std::vector<std::size_t>& widths) {
    std::size_t c = 0;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) c += (widths[l] + 1) * widths[l + 1];
    return c;
  }

  const std::vector<std::size_t>& widths() const { return widths_; }
  std::size_t input_size() const { return widths_.front(); }
  std::size_t output_size() const { return widths_.back(); }
  std::size_t parameter_count() const { return params_.size(); }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  void forward(std::span<const double> in, Workspace& ws) const {
    require(in.size() == input_size(), "MLP input has length " + std::to_string(in.size()) + ", expected " +
                                           std::to_string(input_size()));
    const std::size_t layers = widths_.size() - 1;
    ws.act.resize(layers + 1);
    ws.act[0].assign(in.begin(), in.end());
    std::size_t off = 0;
    for (std::size_t l = 0; l < layers; ++l) {
      const std::size_t ni = widths_[l], no = widths_[l + 1];
      const double* w = params_.data() + off;
      const double* b = w + ni * no;
      const auto& x = ws.act[l];
      auto& y = ws.act[l + 1];
      y.resize(no);
      for (std::size_t o = 0; o < no; ++o) {
        double s = b[o];
        const double* row = w + o * ni;
        for (std::size_t i = 0; i < ni; ++i) s += row[i] * x[i];
        y[o] = l + 1 < layers ? std::tanh(s) : s;
      }
      off += ni * no + no;
    }
  }

  std::vector<double> operator()(std::span<const double> in) const {
    Workspace ws;
    forward(in, ws);
    return ws.act.back();
  }

  /// Adds d(out_adj . output)/dparams into `grad`.
  void backward(const Workspace& ws, std::span<const double> out_adj, std::span<double> grad) const {
    require(out_adj.size() == output_size() && grad.size() == params_.size(), "MLP backward: size mismatch");
    const std::size_t layers = widths_.size() - 1;
    std::vector<double> delta(out_adj.begin(), out_adj.end()), prev;
    std::size_t off = params_.size();
    for (std::size_t l = layers; l-- > 0;) {
      const std::size_t ni = widths_[l], no = widths_[l + 1];
      off -= ni * no + no;
      const double* w = params_.data() + off;
      double* gw = grad.data() + off;
      double* gb = gw + ni * no;
      const auto& x = ws.act[l];
      for (std::size_t o = 0; o < no; ++o) {
        gb[o] += delta[o];
        for (std::size_t i = 0; i < ni; ++i) gw[o * ni + i] += delta[o] * x[i];
      }
      if (l == 0) break;
      prev.assign(ni, 0.0);
      for (std::size_t o = 0; o < no; ++o)
        for (std::size_t i = 0; i < ni; ++i) prev[i] += w[o * ni + i] * delta[o];
      for (std::size_t i = 0; i < ni; ++i) prev[i] *= 1.0 - x[i] * x[i];  // x = tanh(.) on hidden layers
      delta.swap(prev);
    }
  }

  bool operator==(const Mlp&) const = default;

 private:
  void validate() const {
    require(widths_.size() >= 2, "MLP needs at least an input and an output width");
    for (std::size_t w : widths_) require(w >= 1, "MLP layer widths must be positive");
  }

  std::vector<std::size_t> widths_;
  std::vector<double> params_;  // per layer: W (out x in, row-major), then b (out)
};

}  // namespace bumpnet
