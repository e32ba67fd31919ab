// Copyright 2026 The mimicenh Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mimicenh/nn.h"

#include <cmath>
#include <memory>

#include "mimicenh/common.h"
#include "mimicenh/threading.h"

namespace mimicenh {
namespace {

using ad::Node;
using ad::Var;

// ---------------------------------------------------------------- helpers

// Zero-padded copy of every channel: [C][L] -> [C][L+2p].
std::vector<double> pad_channels(const double* x, int64_t c, int64_t l, int64_t p) {
  const int64_t lp = l + 2 * p;
  std::vector<double> xp(static_cast<size_t>(c * lp), 0.0);
  for (int64_t ic = 0; ic < c; ++ic) {
    const double* src = x + ic * l;
    double* dst = xp.data() + ic * lp + p;
    for (int64_t i = 0; i < l; ++i) dst[i] = src[i];
  }
  return xp;
}

// Even/odd phase split so stride-2 access becomes unit stride:
// ph[c][q][u] = xp[c][2u+q]. Both phases padded to lph slots.
std::vector<double> phase_split(const std::vector<double>& xp, int64_t c,
                                int64_t lp, int64_t lph) {
  std::vector<double> ph(static_cast<size_t>(c * 2 * lph), 0.0);
  for (int64_t ic = 0; ic < c; ++ic) {
    const double* src = xp.data() + ic * lp;
    double* p0 = ph.data() + (ic * 2 + 0) * lph;
    double* p1 = ph.data() + (ic * 2 + 1) * lph;
    for (int64_t i = 0; i < lp; ++i) {
      if (i & 1)
        p1[i >> 1] = src[i];
      else
        p0[i >> 1] = src[i];
    }
  }
  return ph;
}

void axpy(double a, const double* x, double* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double dot(const double* a, const double* b, int64_t n) {
  double s = 0.0;
  for (int64_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

// ------------------------------------------------------------------ conv1d

struct Conv1dDims {
  int64_t cin, lin, cout, k, stride, pad, lout, lp, lph;
};

Conv1dDims conv1d_dims(const Tensor& x, const Tensor& w, int stride, int pad) {
  if (x.ndim() != 2 || w.ndim() != 3)
    throw ValidationError("conv1d: x must be [C,L], w [Cout,Cin,K]");
  Conv1dDims d;
  d.cin = x.dim(0);
  d.lin = x.dim(1);
  d.cout = w.dim(0);
  d.k = w.dim(2);
  d.stride = stride;
  d.pad = pad;
  if (w.dim(1) != d.cin) throw ValidationError("conv1d: channel mismatch");
  const int64_t span = d.lin + 2 * pad - d.k;
  if (span < 0) throw ValidationError("conv1d: input shorter than kernel");
  d.lout = span / stride + 1;  // floor semantics
  d.lp = d.lin + 2 * pad;
  d.lph = d.lp / 2 + 1;
  return d;
}

void conv1d_forward(const Conv1dDims& d, const double* x, const double* w,
                    const double* b, double* out) {
  auto xp = pad_channels(x, d.cin, d.lin, d.pad);
  std::vector<double> ph;
  if (d.stride == 2) ph = phase_split(xp, d.cin, d.lp, d.lph);
  parallel_for(d.cout, [&](int64_t oc) {
    double* o = out + oc * d.lout;
    for (int64_t t = 0; t < d.lout; ++t) o[t] = b[oc];
    for (int64_t ic = 0; ic < d.cin; ++ic) {
      const double* wrow = w + (oc * d.cin + ic) * d.k;
      for (int64_t k = 0; k < d.k; ++k) {
        const double* src =
            d.stride == 2
                ? ph.data() + (ic * 2 + (k & 1)) * d.lph + (k >> 1)
                : xp.data() + ic * d.lp + k;
        if (d.stride <= 2) {
          axpy(wrow[k], src, o, d.lout);
        } else {
          const double* base = xp.data() + ic * d.lp + k;
          for (int64_t t = 0; t < d.lout; ++t) o[t] += wrow[k] * base[t * d.stride];
        }
      }
    }
  });
}

void conv1d_backward_data(const Conv1dDims& d, const double* gout,
                          const double* w, double* gx) {
  parallel_for(d.cin, [&](int64_t ic) {
    std::vector<double> gph(static_cast<size_t>(2 * d.lph), 0.0);
    std::vector<double> gxp(static_cast<size_t>(d.lp), 0.0);
    for (int64_t oc = 0; oc < d.cout; ++oc) {
      const double* wrow = w + (oc * d.cin + ic) * d.k;
      const double* go = gout + oc * d.lout;
      for (int64_t k = 0; k < d.k; ++k) {
        if (d.stride == 2) {
          axpy(wrow[k], go, gph.data() + (k & 1) * d.lph + (k >> 1), d.lout);
        } else if (d.stride == 1) {
          axpy(wrow[k], go, gxp.data() + k, d.lout);
        } else {
          for (int64_t t = 0; t < d.lout; ++t) gxp[t * d.stride + k] += wrow[k] * go[t];
        }
      }
    }
    if (d.stride == 2) {
      for (int64_t i = 0; i < d.lp; ++i)
        gxp[i] = gph[(i & 1) * d.lph + (i >> 1)];
    }
    double* dst = gx + ic * d.lin;
    for (int64_t i = 0; i < d.lin; ++i) dst[i] += gxp[i + d.pad];
  });
}

void conv1d_backward_weights(const Conv1dDims& d, const double* gout,
                             const double* x, double* gw, double* gb) {
  auto xp = pad_channels(x, d.cin, d.lin, d.pad);
  std::vector<double> ph;
  if (d.stride == 2) ph = phase_split(xp, d.cin, d.lp, d.lph);
  parallel_for(d.cout, [&](int64_t oc) {
    const double* go = gout + oc * d.lout;
    for (int64_t ic = 0; ic < d.cin; ++ic) {
      double* gwrow = gw + (oc * d.cin + ic) * d.k;
      for (int64_t k = 0; k < d.k; ++k) {
        if (d.stride == 2) {
          gwrow[k] += dot(go, ph.data() + (ic * 2 + (k & 1)) * d.lph + (k >> 1), d.lout);
        } else if (d.stride == 1) {
          gwrow[k] += dot(go, xp.data() + ic * d.lp + k, d.lout);
        } else {
          double acc = 0.0;
          const double* base = xp.data() + ic * d.lp + k;
          for (int64_t t = 0; t < d.lout; ++t) acc += go[t] * base[t * d.stride];
          gwrow[k] += acc;
        }
      }
    }
    double acc = 0.0;
    for (int64_t t = 0; t < d.lout; ++t) acc += go[t];
    gb[oc] += acc;
  });
}

// ------------------------------------------------------- conv_transpose1d

struct ConvT1dDims {
  int64_t cin, lin, cout, k, stride, pad, out_pad, lout, lfull, lph;
};

ConvT1dDims convt1d_dims(const Tensor& x, const Tensor& w, int stride, int pad,
                         int out_pad) {
  if (x.ndim() != 2 || w.ndim() != 3)
    throw ValidationError("conv_transpose1d: x must be [C,L], w [Cin,Cout,K]");
  ConvT1dDims d;
  d.cin = x.dim(0);
  d.lin = x.dim(1);
  d.cout = w.dim(1);
  d.k = w.dim(2);
  d.stride = stride;
  d.pad = pad;
  d.out_pad = out_pad;
  if (w.dim(0) != d.cin) throw ValidationError("conv_transpose1d: channel mismatch");
  d.lfull = (d.lin - 1) * stride + d.k;
  d.lout = d.lfull - 2 * pad + out_pad;
  if (d.lout <= 0) throw ValidationError("conv_transpose1d: nonpositive output length");
  d.lph = d.lfull / 2 + 2;
  return d;
}

void convt1d_forward(const ConvT1dDims& d, const double* x, const double* w,
                     const double* b, double* out) {
  parallel_for(d.cout, [&](int64_t oc) {
    std::vector<double> full(static_cast<size_t>(d.lfull), 0.0);
    std::vector<double> fph;
    if (d.stride == 2) fph.assign(static_cast<size_t>(2 * d.lph), 0.0);
    for (int64_t ic = 0; ic < d.cin; ++ic) {
      const double* wrow = w + (ic * d.cout + oc) * d.k;
      const double* xrow = x + ic * d.lin;
      for (int64_t k = 0; k < d.k; ++k) {
        if (d.stride == 2) {
          axpy(wrow[k], xrow, fph.data() + (k & 1) * d.lph + (k >> 1), d.lin);
        } else if (d.stride == 1) {
          axpy(wrow[k], xrow, full.data() + k, d.lin);
        } else {
          for (int64_t t = 0; t < d.lin; ++t) full[t * d.stride + k] += wrow[k] * xrow[t];
        }
      }
    }
    if (d.stride == 2) {
      for (int64_t i = 0; i < d.lfull; ++i)
        full[i] = fph[(i & 1) * d.lph + (i >> 1)];
    }
    double* o = out + oc * d.lout;
    for (int64_t j = 0; j < d.lout; ++j) {
      const int64_t i = j + d.pad;
      o[j] = b[oc] + (i < d.lfull ? full[i] : 0.0);
    }
  });
}

// gfull: gradient over the uncropped support, [Cout][lfull].
std::vector<double> convt1d_gfull(const ConvT1dDims& d, const double* gout) {
  std::vector<double> gfull(static_cast<size_t>(d.cout * d.lfull), 0.0);
  for (int64_t oc = 0; oc < d.cout; ++oc) {
    const double* go = gout + oc * d.lout;
    double* gf = gfull.data() + oc * d.lfull;
    for (int64_t j = 0; j < d.lout; ++j) {
      const int64_t i = j + d.pad;
      if (i < d.lfull) gf[i] = go[j];
    }
  }
  return gfull;
}

std::vector<double> phase_split_rows(const std::vector<double>& rows, int64_t c,
                                     int64_t l, int64_t lph) {
  std::vector<double> ph(static_cast<size_t>(c * 2 * lph), 0.0);
  for (int64_t ic = 0; ic < c; ++ic) {
    const double* src = rows.data() + ic * l;
    double* p0 = ph.data() + (ic * 2 + 0) * lph;
    double* p1 = ph.data() + (ic * 2 + 1) * lph;
    for (int64_t i = 0; i < l; ++i) {
      if (i & 1)
        p1[i >> 1] = src[i];
      else
        p0[i >> 1] = src[i];
    }
  }
  return ph;
}

void convt1d_backward_data(const ConvT1dDims& d, const std::vector<double>& gfull,
                           const double* w, double* gx) {
  std::vector<double> gph;
  if (d.stride == 2) gph = phase_split_rows(gfull, d.cout, d.lfull, d.lph);
  parallel_for(d.cin, [&](int64_t ic) {
    double* gxr = gx + ic * d.lin;
    for (int64_t oc = 0; oc < d.cout; ++oc) {
      const double* wrow = w + (ic * d.cout + oc) * d.k;
      for (int64_t k = 0; k < d.k; ++k) {
        if (d.stride == 2) {
          const double* src = gph.data() + (oc * 2 + (k & 1)) * d.lph + (k >> 1);
          axpy(wrow[k], src, gxr, d.lin);
        } else if (d.stride == 1) {
          axpy(wrow[k], gfull.data() + oc * d.lfull + k, gxr, d.lin);
        } else {
          const double* gf = gfull.data() + oc * d.lfull;
          for (int64_t t = 0; t < d.lin; ++t) gxr[t] += wrow[k] * gf[t * d.stride + k];
        }
      }
    }
  });
}

// Bias gradient is handled by the caller over the cropped output.
void convt1d_backward_weights(const ConvT1dDims& d, const std::vector<double>& gfull,
                              const double* x, double* gw) {
  std::vector<double> gph;
  if (d.stride == 2) gph = phase_split_rows(gfull, d.cout, d.lfull, d.lph);
  parallel_for(d.cin, [&](int64_t ic) {
    const double* xrow = x + ic * d.lin;
    for (int64_t oc = 0; oc < d.cout; ++oc) {
      double* gwrow = gw + (ic * d.cout + oc) * d.k;
      for (int64_t k = 0; k < d.k; ++k) {
        if (d.stride == 2) {
          gwrow[k] += dot(xrow, gph.data() + (oc * 2 + (k & 1)) * d.lph + (k >> 1), d.lin);
        } else if (d.stride == 1) {
          gwrow[k] += dot(xrow, gfull.data() + oc * d.lfull + k, d.lin);
        } else {
          double acc = 0.0;
          const double* gf = gfull.data() + oc * d.lfull;
          for (int64_t t = 0; t < d.lin; ++t) acc += xrow[t] * gf[t * d.stride + k];
          gwrow[k] += acc;
        }
      }
    }
  });
}

// ------------------------------------------------------------------ conv2d

struct Conv2dDims {
  int64_t cin, t, f, cout, kt, kf, stride_t, pad_t, pad_f, tout, fout, tp, fp;
};

Conv2dDims conv2d_dims(const Tensor& x, const Tensor& w, int stride_t, int pad_t,
                       int pad_f) {
  if (x.ndim() != 3 || w.ndim() != 4)
    throw ValidationError("conv2d: x must be [C,T,F], w [Cout,Cin,Kt,Kf]");
  Conv2dDims d;
  d.cin = x.dim(0);
  d.t = x.dim(1);
  d.f = x.dim(2);
  d.cout = w.dim(0);
  d.kt = w.dim(2);
  d.kf = w.dim(3);
  d.stride_t = stride_t;
  d.pad_t = pad_t;
  d.pad_f = pad_f;
  if (w.dim(1) != d.cin) throw ValidationError("conv2d: channel mismatch");
  const int64_t span = d.t + 2 * pad_t - d.kt;
  if (span < 0) throw ValidationError("conv2d: time span shorter than kernel");
  d.tout = span / stride_t + 1;  // floor semantics
  d.fout = d.f + 2 * pad_f - d.kf + 1;
  if (d.fout <= 0) throw ValidationError("conv2d: frequency span too small");
  d.tp = d.t + 2 * pad_t;
  d.fp = d.f + 2 * pad_f;
  return d;
}

std::vector<double> pad_2d(const double* x, const Conv2dDims& d) {
  std::vector<double> xp(static_cast<size_t>(d.cin * d.tp * d.fp), 0.0);
  for (int64_t ic = 0; ic < d.cin; ++ic)
    for (int64_t t = 0; t < d.t; ++t) {
      const double* src = x + (ic * d.t + t) * d.f;
      double* dst = xp.data() + (ic * d.tp + t + d.pad_t) * d.fp + d.pad_f;
      for (int64_t f = 0; f < d.f; ++f) dst[f] = src[f];
    }
  return xp;
}

void conv2d_forward(const Conv2dDims& d, const double* x, const double* w,
                    const double* b, double* out) {
  auto xp = pad_2d(x, d);
  parallel_for(d.cout, [&](int64_t oc) {
    for (int64_t to = 0; to < d.tout; ++to) {
      double* orow = out + (oc * d.tout + to) * d.fout;
      for (int64_t f = 0; f < d.fout; ++f) orow[f] = b[oc];
      for (int64_t ic = 0; ic < d.cin; ++ic)
        for (int64_t kt = 0; kt < d.kt; ++kt) {
          const double* xrow =
              xp.data() + (ic * d.tp + to * d.stride_t + kt) * d.fp;
          const double* wrow = w + ((oc * d.cin + ic) * d.kt + kt) * d.kf;
          for (int64_t kf = 0; kf < d.kf; ++kf)
            axpy(wrow[kf], xrow + kf, orow, d.fout);
        }
    }
  });
}

void conv2d_backward_data(const Conv2dDims& d, const double* gout,
                          const double* w, double* gx) {
  parallel_for(d.cin, [&](int64_t ic) {
    std::vector<double> gxp(static_cast<size_t>(d.tp * d.fp), 0.0);
    for (int64_t oc = 0; oc < d.cout; ++oc)
      for (int64_t to = 0; to < d.tout; ++to) {
        const double* grow = gout + (oc * d.tout + to) * d.fout;
        for (int64_t kt = 0; kt < d.kt; ++kt) {
          double* xrow = gxp.data() + (to * d.stride_t + kt) * d.fp;
          const double* wrow = w + ((oc * d.cin + ic) * d.kt + kt) * d.kf;
          for (int64_t kf = 0; kf < d.kf; ++kf)
            axpy(wrow[kf], grow, xrow + kf, d.fout);
        }
      }
    for (int64_t t = 0; t < d.t; ++t) {
      double* dst = gx + (ic * d.t + t) * d.f;
      const double* src = gxp.data() + (t + d.pad_t) * d.fp + d.pad_f;
      for (int64_t f = 0; f < d.f; ++f) dst[f] += src[f];
    }
  });
}

void conv2d_backward_weights(const Conv2dDims& d, const double* gout,
                             const double* x, double* gw, double* gb) {
  auto xp = pad_2d(x, d);
  parallel_for(d.cout, [&](int64_t oc) {
    double bias_acc = 0.0;
    for (int64_t to = 0; to < d.tout; ++to) {
      const double* grow = gout + (oc * d.tout + to) * d.fout;
      for (int64_t f = 0; f < d.fout; ++f) bias_acc += grow[f];
      for (int64_t ic = 0; ic < d.cin; ++ic)
        for (int64_t kt = 0; kt < d.kt; ++kt) {
          const double* xrow =
              xp.data() + (ic * d.tp + to * d.stride_t + kt) * d.fp;
          double* gwrow = gw + ((oc * d.cin + ic) * d.kt + kt) * d.kf;
          for (int64_t kf = 0; kf < d.kf; ++kf)
            gwrow[kf] += dot(grow, xrow + kf, d.fout);
        }
    }
    gb[oc] += bias_acc;
  });
}

}  // namespace

// --------------------------------------------------------- Var-level ops

ad::Var conv1d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
  const Conv1dDims d = conv1d_dims(x->value, w->value, stride, pad);
  if (b->value.numel() != d.cout) throw ValidationError("conv1d: bias size");
  Tensor out({d.cout, d.lout});
  conv1d_forward(d, x->value.data(), w->value.data(), b->value.data(), out.data());

  auto node = std::make_shared<Node>();
  node->value = std::move(out);
  node->requires_grad = x->requires_grad || w->requires_grad || b->requires_grad;
  if (node->requires_grad) {
    node->parents = {x, w, b};
    node->backward_fn = [x, w, b, d](Node& n) {
      if (x->requires_grad) {
        x->ensure_grad();
        conv1d_backward_data(d, n.grad.data(), w->value.data(), x->grad.data());
      }
      if (w->requires_grad || b->requires_grad) {
        w->ensure_grad();
        b->ensure_grad();
        conv1d_backward_weights(d, n.grad.data(), x->value.data(), w->grad.data(),
                                b->grad.data());
      }
    };
  }
  return node;
}

ad::Var conv_transpose1d(const Var& x, const Var& w, const Var& b, int stride,
                         int pad, int out_pad) {
  const ConvT1dDims d = convt1d_dims(x->value, w->value, stride, pad, out_pad);
  if (b->value.numel() != d.cout) throw ValidationError("conv_transpose1d: bias size");
  Tensor out({d.cout, d.lout});
  convt1d_forward(d, x->value.data(), w->value.data(), b->value.data(), out.data());

  auto node = std::make_shared<Node>();
  node->value = std::move(out);
  node->requires_grad = x->requires_grad || w->requires_grad || b->requires_grad;
  if (node->requires_grad) {
    node->parents = {x, w, b};
    node->backward_fn = [x, w, b, d](Node& n) {
      auto gfull = convt1d_gfull(d, n.grad.data());
      if (x->requires_grad) {
        x->ensure_grad();
        convt1d_backward_data(d, gfull, w->value.data(), x->grad.data());
      }
      if (w->requires_grad || b->requires_grad) {
        w->ensure_grad();
        b->ensure_grad();
        convt1d_backward_weights(d, gfull, x->value.data(), w->grad.data());
        // bias gradient: plain sum over the cropped output
        for (int64_t oc = 0; oc < d.cout; ++oc) {
          double acc = 0.0;
          const double* go = n.grad.data() + oc * d.lout;
          for (int64_t j = 0; j < d.lout; ++j) acc += go[j];
          b->grad[oc] += acc;
        }
      }
    };
  }
  return node;
}

ad::Var conv2d(const Var& x, const Var& w, const Var& b, int stride_t, int pad_t,
               int pad_f) {
  const Conv2dDims d = conv2d_dims(x->value, w->value, stride_t, pad_t, pad_f);
  if (b->value.numel() != d.cout) throw ValidationError("conv2d: bias size");
  Tensor out({d.cout, d.tout, d.fout});
  conv2d_forward(d, x->value.data(), w->value.data(), b->value.data(), out.data());

  auto node = std::make_shared<Node>();
  node->value = std::move(out);
  node->requires_grad = x->requires_grad || w->requires_grad || b->requires_grad;
  if (node->requires_grad) {
    node->parents = {x, w, b};
    node->backward_fn = [x, w, b, d](Node& n) {
      if (x->requires_grad) {
        x->ensure_grad();
        conv2d_backward_data(d, n.grad.data(), w->value.data(), x->grad.data());
      }
      if (w->requires_grad || b->requires_grad) {
        w->ensure_grad();
        b->ensure_grad();
        conv2d_backward_weights(d, n.grad.data(), x->value.data(), w->grad.data(),
                                b->grad.data());
      }
    };
  }
  return node;
}

// -------------------------------------------------------------- ParamStore

ad::Var ParamStore::create(const std::string& name, Tensor init, bool trainable) {
  for (const auto& p : params_)
    if (p->name == name) throw ConfigError("duplicate parameter name: " + name);
  auto v = ad::make_leaf(std::move(init), trainable, name);
  params_.push_back(v);
  return v;
}

void ParamStore::set_trainable(bool trainable) {
  for (auto& p : params_) p->requires_grad = trainable;
}

bool ParamStore::all_trainable() const {
  for (const auto& p : params_)
    if (!p->requires_grad) return false;
  return true;
}

int64_t ParamStore::total_size() const {
  int64_t n = 0;
  for (const auto& p : params_) n += p->value.numel();
  return n;
}

void ParamStore::zero_grads() {
  for (auto& p : params_) p->clear_grad();
}

// -------------------------------------------------------------------- init

Tensor init_uniform_fanin(Rng& rng, std::vector<int64_t> shape, int64_t fan_in,
                          double gain) {
  Tensor t(std::move(shape));
  const double a = gain * std::sqrt(3.0 / static_cast<double>(fan_in));
  rng.fill_uniform(t.data(), t.numel(), -a, a);
  return t;
}

double leaky_relu_gain(double negative_slope) {
  return std::sqrt(2.0 / (1.0 + negative_slope * negative_slope));
}

// -------------------------------------------------------------------- Adam

void Adam::register_params(const std::vector<ad::Var>& ps) {
  for (const auto& p : ps) {
    if (!p->requires_grad)
      throw ConfigError("optimizer: attempted to register frozen parameter '" +
                        p->name + "'");
    slots_.push_back({p, Tensor(p->value.shape()), Tensor(p->value.shape())});
  }
}

void Adam::zero_grad() {
  for (auto& s : slots_) s.p->clear_grad();
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (auto& s : slots_) {
    const int64_t n = s.p->value.numel();
    const bool has_grad = s.p->grad_allocated;
    for (int64_t i = 0; i < n; ++i) {
      const double g = has_grad ? s.p->grad[i] : 0.0;
      s.m[i] = cfg_.beta1 * s.m[i] + (1.0 - cfg_.beta1) * g;
      s.v[i] = cfg_.beta2 * s.v[i] + (1.0 - cfg_.beta2) * g * g;
      const double mh = s.m[i] / bc1;
      const double vh = s.v[i] / bc2;
      s.p->value[i] -= cfg_.learning_rate * mh / (std::sqrt(vh) + cfg_.eps);
    }
  }
}

}  // namespace mimicenh
