// Copyright 2026 The mimicenh Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mimicenh/autodiff.h"

#include <cmath>
#include <unordered_set>

#include "mimicenh/common.h"

namespace mimicenh {
namespace ad {
namespace {

Var make_op(Tensor value, std::vector<Var> parents,
            std::function<void(Node&)> backward_fn) {
  auto out = std::make_shared<Node>();
  out->value = std::move(value);
  bool needs = false;
  for (const auto& p : parents) needs = needs || p->requires_grad;
  out->requires_grad = needs;
  if (needs) {
    out->parents = std::move(parents);
    out->backward_fn = std::move(backward_fn);
  }
  return out;
}

// Accumulate target for a parent, or nullptr if it does not need grads.
Tensor* grad_dst(const Var& p) {
  if (!p->requires_grad) return nullptr;
  p->ensure_grad();
  return &p->grad;
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (!a->value.same_shape(b->value))
    throw ValidationError(std::string(op) + ": shape mismatch " +
                          a->value.shape_str() + " vs " + b->value.shape_str());
}

}  // namespace

Var make_leaf(Tensor value, bool requires_grad, std::string name) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  n->name = std::move(name);
  return n;
}

Var constant(Tensor value) { return make_leaf(std::move(value), false); }

void backward(const Var& root) {
  if (root->value.numel() != 1)
    throw ValidationError("backward: root must be scalar");
  if (!root->requires_grad) return;

  // Post-order DFS; reversed it yields consumers before producers.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* p = node->parents[idx++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->ensure_grad();
  root->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->grad_allocated) n->backward_fn(*n);
  }
}

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  Tensor v(a->value.shape());
  const int64_t n = v.numel();
  for (int64_t i = 0; i < n; ++i) v[i] = a->value[i] + b->value[i];
  return make_op(std::move(v), {a, b}, [a, b](Node& out) {
    const int64_t n = out.grad.numel();
    if (Tensor* ga = grad_dst(a))
      for (int64_t i = 0; i < n; ++i) (*ga)[i] += out.grad[i];
    if (Tensor* gb = grad_dst(b))
      for (int64_t i = 0; i < n; ++i) (*gb)[i] += out.grad[i];
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  Tensor v(a->value.shape());
  const int64_t n = v.numel();
  for (int64_t i = 0; i < n; ++i) v[i] = a->value[i] - b->value[i];
  return make_op(std::move(v), {a, b}, [a, b](Node& out) {
    const int64_t n = out.grad.numel();
    if (Tensor* ga = grad_dst(a))
      for (int64_t i = 0; i < n; ++i) (*ga)[i] += out.grad[i];
    if (Tensor* gb = grad_dst(b))
      for (int64_t i = 0; i < n; ++i) (*gb)[i] -= out.grad[i];
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  Tensor v(a->value.shape());
  const int64_t n = v.numel();
  for (int64_t i = 0; i < n; ++i) v[i] = a->value[i] * b->value[i];
  return make_op(std::move(v), {a, b}, [a, b](Node& out) {
    const int64_t n = out.grad.numel();
    if (Tensor* ga = grad_dst(a))
      for (int64_t i = 0; i < n; ++i) (*ga)[i] += out.grad[i] * b->value[i];
    if (Tensor* gb = grad_dst(b))
      for (int64_t i = 0; i < n; ++i) (*gb)[i] += out.grad[i] * a->value[i];
  });
}

Var scale(const Var& a, double s) {
  Tensor v(a->value.shape());
  const int64_t n = v.numel();
  for (int64_t i = 0; i < n; ++i) v[i] = a->value[i] * s;
  return make_op(std::move(v), {a}, [a, s](Node& out) {
    if (Tensor* ga = grad_dst(a)) {
      const int64_t n = out.grad.numel();
      for (int64_t i = 0; i < n; ++i) (*ga)[i] += out.grad[i] * s;
    }
  });
}

Var add_scalar(const Var& a, double s) {
  Tensor v(a->value.shape());
  const int64_t n = v.numel();
  for (int64_t i = 0; i < n; ++i) v[i] = a->value[i] + s;
  return make_op(std::move(v), {a}, [a](Node& out) {
    if (Tensor* ga = grad_dst(a)) {
      const int64_t n = out.grad.numel();
      for (int64_t i = 0; i < n; ++i) (*ga)[i] += out.grad[i];
    }
  });
}

Var leaky_relu(const Var& a, double negative_slope) {
  Tensor v(a->value.shape());
  const int64_t n = v.numel();
  for (int64_t i = 0; i < n; ++i) {
    double x = a->value[i];
    v[i] = x >= 0.0 ? x : negative_slope * x;
  }
  return make_op(std::move(v), {a}, [a, negative_slope](Node& out) {
    if (Tensor* ga = grad_dst(a)) {
      const int64_t n = out.grad.numel();
      for (int64_t i = 0; i < n; ++i)
        (*ga)[i] += out.grad[i] * (a->value[i] >= 0.0 ? 1.0 : negative_slope);
    }
  });
}

Var square(const Var& a) {
  Tensor v(a->value.shape());
  const int64_t n = v.numel();
  for (int64_t i = 0; i < n; ++i) v[i] = a->value[i] * a->value[i];
  return make_op(std::move(v), {a}, [a](Node& out) {
    if (Tensor* ga = grad_dst(a)) {
      const int64_t n = out.grad.numel();
      for (int64_t i = 0; i < n; ++i) (*ga)[i] += out.grad[i] * 2.0 * a->value[i];
    }
  });
}

Var sqrt_elem(const Var& a) {
  Tensor v(a->value.shape());
  const int64_t n = v.numel();
  for (int64_t i = 0; i < n; ++i) v[i] = std::sqrt(a->value[i]);
  auto out = make_op(std::move(v), {a}, nullptr);
  if (out->requires_grad) {
    out->backward_fn = [a](Node& out_node) {
      if (Tensor* ga = grad_dst(a)) {
        const int64_t n = out_node.grad.numel();
        for (int64_t i = 0; i < n; ++i)
          (*ga)[i] += out_node.grad[i] * 0.5 / out_node.value[i];
      }
    };
  }
  return out;
}

Var mean_all(const Var& a) {
  const int64_t n = a->value.numel();
  double s = 0.0;
  for (int64_t i = 0; i < n; ++i) s += a->value[i];
  return make_op(Tensor::scalar(s / static_cast<double>(n)), {a}, [a, n](Node& out) {
    if (Tensor* ga = grad_dst(a)) {
      const double g = out.grad[0] / static_cast<double>(n);
      for (int64_t i = 0; i < n; ++i) (*ga)[i] += g;
    }
  });
}

Var sub_scalar_var(const Var& x, const Var& s) {
  if (s->value.numel() != 1) throw ValidationError("sub_scalar_var: s must be scalar");
  Tensor v(x->value.shape());
  const int64_t n = v.numel();
  const double sv = s->value[0];
  for (int64_t i = 0; i < n; ++i) v[i] = x->value[i] - sv;
  return make_op(std::move(v), {x, s}, [x, s](Node& out) {
    const int64_t n = out.grad.numel();
    if (Tensor* gx = grad_dst(x))
      for (int64_t i = 0; i < n; ++i) (*gx)[i] += out.grad[i];
    if (Tensor* gs = grad_dst(s)) {
      double acc = 0.0;
      for (int64_t i = 0; i < n; ++i) acc += out.grad[i];
      (*gs)[0] -= acc;
    }
  });
}

Var div_scalar_var(const Var& x, const Var& s) {
  if (s->value.numel() != 1) throw ValidationError("div_scalar_var: s must be scalar");
  Tensor v(x->value.shape());
  const int64_t n = v.numel();
  const double sv = s->value[0];
  for (int64_t i = 0; i < n; ++i) v[i] = x->value[i] / sv;
  return make_op(std::move(v), {x, s}, [x, s](Node& out) {
    const int64_t n = out.grad.numel();
    const double sv = s->value[0];
    if (Tensor* gx = grad_dst(x))
      for (int64_t i = 0; i < n; ++i) (*gx)[i] += out.grad[i] / sv;
    if (Tensor* gs = grad_dst(s)) {
      double acc = 0.0;
      for (int64_t i = 0; i < n; ++i) acc += out.grad[i] * x->value[i];
      (*gs)[0] -= acc / (sv * sv);
    }
  });
}

Var reshape(const Var& x, std::vector<int64_t> shape) {
  Tensor v = x->value.reshaped(std::move(shape));
  return make_op(std::move(v), {x}, [x](Node& out) {
    if (Tensor* gx = grad_dst(x)) {
      const int64_t n = out.grad.numel();
      for (int64_t i = 0; i < n; ++i) (*gx)[i] += out.grad[i];
    }
  });
}

namespace {
int64_t row_stride(const Tensor& t) {
  int64_t s = 1;
  for (int i = 1; i < t.ndim(); ++i) s *= t.dim(i);
  return s;
}
}  // namespace

Var slice_axis0(const Var& x, int64_t begin, int64_t end) {
  const int64_t rows = x->value.dim(0);
  if (begin < 0 || end > rows || begin >= end)
    throw ValidationError("slice_axis0: bad range");
  const int64_t stride = row_stride(x->value);
  std::vector<int64_t> shape = x->value.shape();
  shape[0] = end - begin;
  Tensor v(shape);
  const double* src = x->value.data() + begin * stride;
  for (int64_t i = 0; i < v.numel(); ++i) v[i] = src[i];
  return make_op(std::move(v), {x}, [x, begin, stride](Node& out) {
    if (Tensor* gx = grad_dst(x)) {
      double* dst = gx->data() + begin * stride;
      const int64_t n = out.grad.numel();
      for (int64_t i = 0; i < n; ++i) dst[i] += out.grad[i];
    }
  });
}

Var pad_axis0_edge(const Var& x, int64_t total) {
  const int64_t rows = x->value.dim(0);
  if (total < rows) throw ValidationError("pad_axis0_edge: total < rows");
  if (total == rows) return x;
  const int64_t stride = row_stride(x->value);
  std::vector<int64_t> shape = x->value.shape();
  shape[0] = total;
  Tensor v(shape);
  for (int64_t r = 0; r < total; ++r) {
    const int64_t src_r = r < rows ? r : rows - 1;
    const double* src = x->value.data() + src_r * stride;
    double* dst = v.data() + r * stride;
    for (int64_t i = 0; i < stride; ++i) dst[i] = src[i];
  }
  return make_op(std::move(v), {x}, [x, rows, total, stride](Node& out) {
    if (Tensor* gx = grad_dst(x)) {
      for (int64_t r = 0; r < total; ++r) {
        const int64_t dst_r = r < rows ? r : rows - 1;
        double* dst = gx->data() + dst_r * stride;
        const double* src = out.grad.data() + r * stride;
        for (int64_t i = 0; i < stride; ++i) dst[i] += src[i];
      }
    }
  });
}

Var pad_last_zero(const Var& x, int64_t total) {
  if (x->value.ndim() != 2) throw ValidationError("pad_last_zero: expects 2-D");
  const int64_t rows = x->value.dim(0), cols = x->value.dim(1);
  if (total < cols) throw ValidationError("pad_last_zero: total < cols");
  if (total == cols) return x;
  Tensor v({rows, total});
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t c = 0; c < cols; ++c) v.at2(r, c) = x->value.at2(r, c);
  return make_op(std::move(v), {x}, [x, rows, cols, total](Node& out) {
    if (Tensor* gx = grad_dst(x)) {
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t c = 0; c < cols; ++c)
          gx->at2(r, c) += out.grad[r * total + c];
    }
  });
}

Var slice_last(const Var& x, int64_t begin, int64_t end) {
  if (x->value.ndim() != 2) throw ValidationError("slice_last: expects 2-D");
  const int64_t rows = x->value.dim(0), cols = x->value.dim(1);
  if (begin < 0 || end > cols || begin >= end)
    throw ValidationError("slice_last: bad range");
  Tensor v({rows, end - begin});
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t c = begin; c < end; ++c) v.at2(r, c - begin) = x->value.at2(r, c);
  return make_op(std::move(v), {x}, [x, rows, cols, begin, end](Node& out) {
    if (Tensor* gx = grad_dst(x)) {
      const int64_t w = end - begin;
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t c = 0; c < w; ++c)
          gx->data()[r * cols + begin + c] += out.grad[r * w + c];
    }
  });
}

Var mean_last_axis(const Var& x) {
  const int nd = x->value.ndim();
  if (nd < 2) throw ValidationError("mean_last_axis: needs >= 2 dims");
  const int64_t last = x->value.dim(nd - 1);
  std::vector<int64_t> shape(x->value.shape().begin(), x->value.shape().end() - 1);
  Tensor v(shape);
  const int64_t outer = v.numel();
  for (int64_t o = 0; o < outer; ++o) {
    const double* src = x->value.data() + o * last;
    double s = 0.0;
    for (int64_t i = 0; i < last; ++i) s += src[i];
    v[o] = s / static_cast<double>(last);
  }
  return make_op(std::move(v), {x}, [x, outer, last](Node& out) {
    if (Tensor* gx = grad_dst(x)) {
      for (int64_t o = 0; o < outer; ++o) {
        const double g = out.grad[o] / static_cast<double>(last);
        double* dst = gx->data() + o * last;
        for (int64_t i = 0; i < last; ++i) dst[i] += g;
      }
    }
  });
}

Var interleave_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ValidationError("interleave_rows: no parts");
  const int64_t g_count = static_cast<int64_t>(parts.size());
  const int64_t t = parts[0]->value.dim(0);
  const int64_t s = parts[0]->value.dim(1);
  for (const auto& p : parts)
    if (p->value.dim(0) != t || p->value.dim(1) != s)
      throw ValidationError("interleave_rows: part shape mismatch");
  Tensor v({t * g_count, s});
  for (int64_t g = 0; g < g_count; ++g)
    for (int64_t r = 0; r < t; ++r)
      for (int64_t c = 0; c < s; ++c)
        v.at2(r * g_count + g, c) = parts[static_cast<size_t>(g)]->value.at2(r, c);
  std::vector<Var> parents(parts.begin(), parts.end());
  return make_op(std::move(v), std::move(parents), [parts, g_count, t, s](Node& out) {
    for (int64_t g = 0; g < g_count; ++g) {
      if (Tensor* gp = grad_dst(parts[static_cast<size_t>(g)])) {
        for (int64_t r = 0; r < t; ++r)
          for (int64_t c = 0; c < s; ++c)
            gp->at2(r, c) += out.grad[(r * g_count + g) * s + c];
      }
    }
  });
}

Var affine_time(const Var& x, const Var& w, const Var& b) {
  const int64_t c = x->value.dim(0), t = x->value.dim(1);
  const int64_t s = w->value.dim(0);
  if (w->value.dim(1) != c || b->value.numel() != s)
    throw ValidationError("affine_time: shape mismatch");
  Tensor v({t, s});
  for (int64_t ti = 0; ti < t; ++ti)
    for (int64_t si = 0; si < s; ++si) {
      double acc = b->value[si];
      for (int64_t ci = 0; ci < c; ++ci)
        acc += w->value.at2(si, ci) * x->value.at2(ci, ti);
      v.at2(ti, si) = acc;
    }
  return make_op(std::move(v), {x, w, b}, [x, w, b, c, t, s](Node& out) {
    if (Tensor* gx = grad_dst(x)) {
      for (int64_t ci = 0; ci < c; ++ci)
        for (int64_t ti = 0; ti < t; ++ti) {
          double acc = 0.0;
          for (int64_t si = 0; si < s; ++si)
            acc += w->value.at2(si, ci) * out.grad[ti * s + si];
          gx->at2(ci, ti) += acc;
        }
    }
    if (Tensor* gw = grad_dst(w)) {
      for (int64_t si = 0; si < s; ++si)
        for (int64_t ci = 0; ci < c; ++ci) {
          double acc = 0.0;
          for (int64_t ti = 0; ti < t; ++ti)
            acc += out.grad[ti * s + si] * x->value.at2(ci, ti);
          gw->at2(si, ci) += acc;
        }
    }
    if (Tensor* gb = grad_dst(b)) {
      for (int64_t si = 0; si < s; ++si) {
        double acc = 0.0;
        for (int64_t ti = 0; ti < t; ++ti) acc += out.grad[ti * s + si];
        (*gb)[si] += acc;
      }
    }
  });
}

Var affine_time_freq(const Var& x, const Var& w, const Var& b) {
  if (x->value.ndim() != 3) throw ValidationError("affine_time_freq: x must be [C,T,F]");
  const int64_t c = x->value.dim(0), t = x->value.dim(1), f = x->value.dim(2);
  const int64_t s = w->value.dim(0);
  if (w->value.dim(1) != c * f || b->value.numel() != s)
    throw ValidationError("affine_time_freq: shape mismatch");
  Tensor v({t, s});
  for (int64_t ti = 0; ti < t; ++ti)
    for (int64_t si = 0; si < s; ++si) {
      double acc = b->value[si];
      const double* wrow = w->value.data() + si * c * f;
      for (int64_t ci = 0; ci < c; ++ci) {
        const double* xrow = x->value.data() + (ci * t + ti) * f;
        const double* wseg = wrow + ci * f;
        for (int64_t fi = 0; fi < f; ++fi) acc += wseg[fi] * xrow[fi];
      }
      v.at2(ti, si) = acc;
    }
  return make_op(std::move(v), {x, w, b}, [x, w, b, c, t, f, s](Node& out) {
    if (Tensor* gx = grad_dst(x)) {
      for (int64_t ci = 0; ci < c; ++ci)
        for (int64_t ti = 0; ti < t; ++ti) {
          double* grow = gx->data() + (ci * t + ti) * f;
          for (int64_t si = 0; si < s; ++si) {
            const double g = out.grad[ti * s + si];
            const double* wseg = w->value.data() + si * c * f + ci * f;
            for (int64_t fi = 0; fi < f; ++fi) grow[fi] += g * wseg[fi];
          }
        }
    }
    if (Tensor* gw = grad_dst(w)) {
      for (int64_t si = 0; si < s; ++si) {
        double* wrow = gw->data() + si * c * f;
        for (int64_t ti = 0; ti < t; ++ti) {
          const double g = out.grad[ti * s + si];
          for (int64_t ci = 0; ci < c; ++ci) {
            const double* xrow = x->value.data() + (ci * t + ti) * f;
            double* wseg = wrow + ci * f;
            for (int64_t fi = 0; fi < f; ++fi) wseg[fi] += g * xrow[fi];
          }
        }
      }
    }
    if (Tensor* gb = grad_dst(b)) {
      for (int64_t si = 0; si < s; ++si) {
        double acc = 0.0;
        for (int64_t ti = 0; ti < t; ++ti) acc += out.grad[ti * s + si];
        (*gb)[si] += acc;
      }
    }
  });
}

}  // namespace ad
}  // namespace mimicenh
