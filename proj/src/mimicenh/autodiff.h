// Copyright 2026 The mimicenh Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Minimal reverse-mode autodiff over Tensor. A fresh graph is built per
// training step; parameters are long-lived leaf nodes whose gradients
// accumulate until the optimizer clears them. Frozen parameters keep
// requires_grad=false: ops still evaluate through them but skip writing
// their gradients, which is what lets a frozen teacher pass gradients
// back to its inputs only.

#ifndef MIMICENH_AUTODIFF_H_
#define MIMICENH_AUTODIFF_H_

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "mimicenh/tensor.h"

namespace mimicenh {
namespace ad {

class Node;
using Var = std::shared_ptr<Node>;

class Node {
 public:
  Tensor value;
  Tensor grad;  // allocated on first accumulate
  bool requires_grad = false;
  bool grad_allocated = false;
  std::string name;  // set for parameters
  std::vector<Var> parents;
  std::function<void(Node&)> backward_fn;

  void ensure_grad() {
    if (!grad_allocated) {
      grad = Tensor(value.shape());
      grad_allocated = true;
    }
  }
  void clear_grad() {
    if (grad_allocated) grad.fill(0.0);
  }
};

Var make_leaf(Tensor value, bool requires_grad = false, std::string name = "");
Var constant(Tensor value);

// Reverse pass from a scalar root. Seeds d(root)/d(root)=1 and walks the
// graph in reverse topological order.
void backward(const Var& root);

// ---- elementwise / structural ops ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var leaky_relu(const Var& a, double negative_slope);
Var square(const Var& a);
Var sqrt_elem(const Var& a);
Var mean_all(const Var& a);                   // -> scalar
Var sub_scalar_var(const Var& x, const Var& s);  // x - s, s scalar
Var div_scalar_var(const Var& x, const Var& s);  // x / s, s scalar
Var reshape(const Var& x, std::vector<int64_t> shape);
Var slice_axis0(const Var& x, int64_t begin, int64_t end);
Var pad_axis0_edge(const Var& x, int64_t total);   // replicate last row
Var pad_last_zero(const Var& x, int64_t total);    // zero-pad last axis (2-D)
Var slice_last(const Var& x, int64_t begin, int64_t end);  // last axis (2-D)
Var mean_last_axis(const Var& x);             // drop last axis by averaging
// parts: G tensors [T,S] -> [T*G, S]; output row t*G+g is part g's row t.
Var interleave_rows(const std::vector<Var>& parts);
// x [C,T], w [S,C], b [S] -> [T,S]
Var affine_time(const Var& x, const Var& w, const Var& b);
// x [C,T,F], w [S,C*F], b [S] -> [T,S]; the affine input for frame t is
// the flattened (channel, frequency) feature at that time slot.
Var affine_time_freq(const Var& x, const Var& w, const Var& b);

}  // namespace ad
}  // namespace mimicenh

#endif  // MIMICENH_AUTODIFF_H_
