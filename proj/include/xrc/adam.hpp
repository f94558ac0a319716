#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "xrc/tensor.hpp"

namespace xrc {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment buffers, one per parameter tensor, in the same
/// order as the parameter list they were initialized from.
template <typename T>
struct AdamState {
  AdamConfig cfg;
  i64 t = 0;
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;

  template <typename Params>
  static AdamState init(Params& params, const AdamConfig& cfg) {
    AdamState st;
    st.cfg = cfg;
    params.visit([&](const std::string&, Tensor<T>& p) {
      st.m.push_back(zeros<T>(p.shape()));
      st.v.push_back(zeros<T>(p.shape()));
    });
    return st;
  }
};

/// One Adam update over a flat parameter list:
///   m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2
///   theta <- theta - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
/// Throws when any gradient entry is not finite, naming the parameter.
template <typename T>
void adam_step(const std::vector<std::string>& names,
               const std::vector<Tensor<T>*>& params,
               const std::vector<Tensor<T>>& grads, AdamState<T>& st) {
  if (params.size() != grads.size() || params.size() != st.m.size()) {
    fail("adam_step: got ", grads.size(), " gradients for ", params.size(),
         " parameters (state has ", st.m.size(), ")");
  }
  st.t += 1;
  const T b1 = static_cast<T>(st.cfg.beta1);
  const T b2 = static_cast<T>(st.cfg.beta2);
  const T corr1 = static_cast<T>(1.0 - std::pow(st.cfg.beta1, static_cast<double>(st.t)));
  const T corr2 = static_cast<T>(1.0 - std::pow(st.cfg.beta2, static_cast<double>(st.t)));
  const T lr = static_cast<T>(st.cfg.lr);
  const T eps = static_cast<T>(st.cfg.eps);

  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor<T>& p = *params[k];
    const Tensor<T>& g = grads[k];
    if (g.shape() != p.shape()) {
      fail("adam_step: gradient shape ", g.shape().str(), " != parameter ",
           names.empty() ? std::to_string(k) : names[k], " shape ",
           p.shape().str());
    }
    Tensor<T>& m = st.m[k];
    Tensor<T>& v = st.v[k];
    for (i64 i = 0; i < p.numel(); ++i) {
      const T gi = g.data()[i];
      if (!std::isfinite(static_cast<double>(gi))) {
        fail("adam_step: non-finite gradient in parameter ",
             names.empty() ? std::to_string(k) : names[k], " at element ", i);
      }
      m.data()[i] = b1 * m.data()[i] + (T(1) - b1) * gi;
      v.data()[i] = b2 * v.data()[i] + (T(1) - b2) * gi * gi;
      const T mhat = m.data()[i] / corr1;
      const T vhat = v.data()[i] / corr2;
      p.data()[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

}  // namespace xrc
