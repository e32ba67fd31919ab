// Copyright 2026 The mimicenh Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef MIMICENH_NN_H_
#define MIMICENH_NN_H_

#include <cstdint>
#include <string>
#include <vector>

#include "mimicenh/autodiff.h"
#include "mimicenh/rng.h"
#include "mimicenh/tensor.h"

namespace mimicenh {

// x [Cin,L], w [Cout,Cin,K], b [Cout] -> [Cout, (L+2p-K)/s + 1]
ad::Var conv1d(const ad::Var& x, const ad::Var& w, const ad::Var& b, int stride,
               int pad);

// x [Cin,L], w [Cin,Cout,K], b [Cout] -> [Cout, (L-1)*s - 2p + K + out_pad]
ad::Var conv_transpose1d(const ad::Var& x, const ad::Var& w, const ad::Var& b,
                         int stride, int pad, int out_pad);

// x [Cin,T,F], w [Cout,Cin,Kt,Kf], b [Cout], stride over time only.
ad::Var conv2d(const ad::Var& x, const ad::Var& w, const ad::Var& b,
               int stride_t, int pad_t, int pad_f);

// Ordered, named parameter registry. Registration order is the canonical
// order used for fingerprints and checkpoints.
class ParamStore {
 public:
  ad::Var create(const std::string& name, Tensor init, bool trainable = true);
  const std::vector<ad::Var>& params() const { return params_; }
  void set_trainable(bool trainable);
  bool all_trainable() const;
  int64_t total_size() const;
  void zero_grads();

 private:
  std::vector<ad::Var> params_;
};

// U(-a, a) with a = gain * sqrt(3 / fan_in); He-style bound.
Tensor init_uniform_fanin(Rng& rng, std::vector<int64_t> shape, int64_t fan_in,
                          double gain);
double leaky_relu_gain(double negative_slope);

struct AdamConfig {
  double learning_rate = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}
  // Rejects frozen parameters: registering a non-trainable Var is a bug
  // in the caller's training setup, not a soft condition.
  void register_params(const std::vector<ad::Var>& ps);
  void zero_grad();
  void step();
  int64_t steps_taken() const { return t_; }

 private:
  struct Slot {
    ad::Var p;
    Tensor m, v;
  };
  AdamConfig cfg_;
  std::vector<Slot> slots_;
  int64_t t_ = 0;
};

}  // namespace mimicenh

#endif  // MIMICENH_NN_H_
