// Copyright 2026 the udcsim authors
// SPDX-License-Identifier: Apache-2.0

#include "udc/nn/autodiff.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "udc/error.hpp"

namespace udc::nn {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

namespace {

thread_local bool g_grad_enabled = true;

Var make_node(Tensor val, std::vector<Var> inputs, std::function<void(Node&)> fn) {
  auto node = std::make_shared<Node>();
  node->val = std::move(val);
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& in : inputs) needs = needs || in->needs_grad;
  }
  node->needs_grad = needs;
  if (needs) {
    node->inputs = std::move(inputs);
    node->backward_fn = std::move(fn);
  }
  return node;
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (!a->val.same_shape(b->val))
    throw DimensionError(std::string(op) + ": operand shapes differ");
}

}  // namespace

void Parameter::zero_grad() {
  if (grad.size() != value.size()) grad = Tensor(value.n, value.c, value.h, value.w);
  std::fill(grad.data.begin(), grad.data.end(), 0.0);
}

Tensor& Node::ensure_grad() {
  if (grad.size() != val.size()) grad = Tensor(val.n, val.c, val.h, val.w);
  return grad;
}

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

bool grad_enabled() { return g_grad_enabled; }

Var constant(Tensor t) {
  auto node = std::make_shared<Node>();
  node->val = std::move(t);
  return node;
}

Var leaf(Parameter* p) {
  auto node = std::make_shared<Node>();
  node->val = p->value;
  node->param = p;
  node->needs_grad = g_grad_enabled && p->trainable;
  return node;
}

Var input(Tensor t, bool needs_grad) {
  auto node = std::make_shared<Node>();
  node->val = std::move(t);
  node->needs_grad = g_grad_enabled && needs_grad;
  return node;
}

Var detach(const Var& x) { return constant(x->val); }

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  Tensor out = a->val;
  for (size_t i = 0; i < out.size(); ++i) out.data[i] += b->val.data[i];
  return make_node(std::move(out), {a, b}, [](Node& self) {
    for (int k = 0; k < 2; ++k) {
      auto& in = self.inputs[k];
      if (!in->needs_grad) continue;
      Tensor& g = in->ensure_grad();
      for (size_t i = 0; i < g.size(); ++i) g.data[i] += self.grad.data[i];
    }
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  Tensor out = a->val;
  for (size_t i = 0; i < out.size(); ++i) out.data[i] -= b->val.data[i];
  return make_node(std::move(out), {a, b}, [](Node& self) {
    if (self.inputs[0]->needs_grad) {
      Tensor& g = self.inputs[0]->ensure_grad();
      for (size_t i = 0; i < g.size(); ++i) g.data[i] += self.grad.data[i];
    }
    if (self.inputs[1]->needs_grad) {
      Tensor& g = self.inputs[1]->ensure_grad();
      for (size_t i = 0; i < g.size(); ++i) g.data[i] -= self.grad.data[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  Tensor out = a->val;
  for (size_t i = 0; i < out.size(); ++i) out.data[i] *= b->val.data[i];
  return make_node(std::move(out), {a, b}, [](Node& self) {
    const Tensor& av = self.inputs[0]->val;
    const Tensor& bv = self.inputs[1]->val;
    if (self.inputs[0]->needs_grad) {
      Tensor& g = self.inputs[0]->ensure_grad();
      for (size_t i = 0; i < g.size(); ++i) g.data[i] += self.grad.data[i] * bv.data[i];
    }
    if (self.inputs[1]->needs_grad) {
      Tensor& g = self.inputs[1]->ensure_grad();
      for (size_t i = 0; i < g.size(); ++i) g.data[i] += self.grad.data[i] * av.data[i];
    }
  });
}

Var affine(const Var& x, double scale, double shift) {
  Tensor out = x->val;
  for (double& v : out.data) v = scale * v + shift;
  return make_node(std::move(out), {x}, [scale](Node& self) {
    if (!self.inputs[0]->needs_grad) return;
    Tensor& g = self.inputs[0]->ensure_grad();
    for (size_t i = 0; i < g.size(); ++i) g.data[i] += scale * self.grad.data[i];
  });
}

Var relu(const Var& x) {
  Tensor out = x->val;
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  return make_node(std::move(out), {x}, [](Node& self) {
    if (!self.inputs[0]->needs_grad) return;
    Tensor& g = self.inputs[0]->ensure_grad();
    for (size_t i = 0; i < g.size(); ++i) {
      if (self.val.data[i] > 0.0) g.data[i] += self.grad.data[i];
    }
  });
}

Var sigmoid(const Var& x) {
  Tensor out = x->val;
  for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
  return make_node(std::move(out), {x}, [](Node& self) {
    if (!self.inputs[0]->needs_grad) return;
    Tensor& g = self.inputs[0]->ensure_grad();
    for (size_t i = 0; i < g.size(); ++i) {
      double y = self.val.data[i];
      g.data[i] += self.grad.data[i] * y * (1.0 - y);
    }
  });
}

Var softplus(const Var& x) {
  Tensor out = x->val;
  for (double& v : out.data) v = v > 30.0 ? v : std::log1p(std::exp(v));
  return make_node(std::move(out), {x}, [](Node& self) {
    if (!self.inputs[0]->needs_grad) return;
    const Tensor& xv = self.inputs[0]->val;
    Tensor& g = self.inputs[0]->ensure_grad();
    for (size_t i = 0; i < g.size(); ++i) {
      g.data[i] += self.grad.data[i] / (1.0 + std::exp(-xv.data[i]));
    }
  });
}

Var abs_val(const Var& x) {
  Tensor out = x->val;
  for (double& v : out.data) v = std::abs(v);
  return make_node(std::move(out), {x}, [](Node& self) {
    if (!self.inputs[0]->needs_grad) return;
    const Tensor& xv = self.inputs[0]->val;
    Tensor& g = self.inputs[0]->ensure_grad();
    for (size_t i = 0; i < g.size(); ++i) {
      double s = xv.data[i] > 0.0 ? 1.0 : (xv.data[i] < 0.0 ? -1.0 : 0.0);
      g.data[i] += self.grad.data[i] * s;
    }
  });
}

Var sqrt_val(const Var& x) {
  Tensor out = x->val;
  for (double& v : out.data) v = std::sqrt(v);
  return make_node(std::move(out), {x}, [](Node& self) {
    if (!self.inputs[0]->needs_grad) return;
    Tensor& g = self.inputs[0]->ensure_grad();
    for (size_t i = 0; i < g.size(); ++i) {
      g.data[i] += self.grad.data[i] * 0.5 / self.val.data[i];
    }
  });
}

namespace {

inline int reflect_index(int i, int n) {
  if (n == 1) return 0;
  int period = 2 * (n - 1);
  i = std::abs(i) % period;
  return i < n ? i : period - i;
}

}  // namespace

Var reflect_pad(const Var& x, int r) {
  const Tensor& xv = x->val;
  if (r < 0) throw RangeError("reflect_pad: negative padding");
  if (r >= xv.h || r >= xv.w)
    throw DimensionError("reflect_pad: padding must be smaller than the spatial size");
  Tensor out(xv.n, xv.c, xv.h + 2 * r, xv.w + 2 * r);
  for (int in = 0; in < xv.n; ++in) {
    for (int c = 0; c < xv.c; ++c) {
      for (int y = 0; y < out.h; ++y) {
        int sy = reflect_index(y - r, xv.h);
        for (int xx = 0; xx < out.w; ++xx) {
          out.at(in, c, y, xx) = xv.at(in, c, sy, reflect_index(xx - r, xv.w));
        }
      }
    }
  }
  return make_node(std::move(out), {x}, [r](Node& self) {
    if (!self.inputs[0]->needs_grad) return;
    Tensor& g = self.inputs[0]->ensure_grad();
    for (int in = 0; in < g.n; ++in) {
      for (int c = 0; c < g.c; ++c) {
        for (int y = 0; y < self.val.h; ++y) {
          int sy = reflect_index(y - r, g.h);
          for (int xx = 0; xx < self.val.w; ++xx) {
            g.at(in, c, sy, reflect_index(xx - r, g.w)) += self.grad.at(in, c, y, xx);
          }
        }
      }
    }
  });
}

Var quantize_st(const Var& x, int bits) {
  if (bits < 1 || bits > 16) throw RangeError("quantize_st: bits must lie in [1, 16]");
  const double levels = static_cast<double>((1u << bits) - 1u);
  Tensor out = x->val;
  for (double& v : out.data) {
    v = std::round(std::clamp(v, 0.0, 1.0) * levels) / levels;
  }
  return make_node(std::move(out), {x}, [](Node& self) {
    if (!self.inputs[0]->needs_grad) return;
    Tensor& g = self.inputs[0]->ensure_grad();
    for (size_t i = 0; i < g.size(); ++i) g.data[i] += self.grad.data[i];
  });
}

Var mean_all(const Var& x) {
  Tensor out(1, 1, 1, 1);
  double acc = 0.0;
  for (double v : x->val.data) acc += v;
  out.data[0] = acc / static_cast<double>(x->val.size());
  return make_node(std::move(out), {x}, [](Node& self) {
    if (!self.inputs[0]->needs_grad) return;
    Tensor& g = self.inputs[0]->ensure_grad();
    double d = self.grad.data[0] / static_cast<double>(g.size());
    for (double& v : g.data) v += d;
  });
}

Var mul_channel(const Var& x, const Var& s) {
  const Tensor& xv = x->val;
  const Tensor& sv = s->val;
  if (sv.n != xv.n || sv.c != xv.c || sv.h != 1 || sv.w != 1)
    throw DimensionError("mul_channel: gains must be (N,C,1,1)");
  Tensor out = xv;
  size_t hw = static_cast<size_t>(xv.h) * xv.w;
  for (int in = 0; in < xv.n; ++in) {
    for (int ic = 0; ic < xv.c; ++ic) {
      double g = sv.at(in, ic, 0, 0);
      double* p = out.data.data() + (static_cast<size_t>(in) * xv.c + ic) * hw;
      for (size_t i = 0; i < hw; ++i) p[i] *= g;
    }
  }
  return make_node(std::move(out), {x, s}, [](Node& self) {
    const Tensor& xv = self.inputs[0]->val;
    const Tensor& sv = self.inputs[1]->val;
    size_t hw = static_cast<size_t>(xv.h) * xv.w;
    if (self.inputs[0]->needs_grad) {
      Tensor& gx = self.inputs[0]->ensure_grad();
      for (int in = 0; in < xv.n; ++in) {
        for (int ic = 0; ic < xv.c; ++ic) {
          double g = sv.at(in, ic, 0, 0);
          size_t base = (static_cast<size_t>(in) * xv.c + ic) * hw;
          for (size_t i = 0; i < hw; ++i)
            gx.data[base + i] += self.grad.data[base + i] * g;
        }
      }
    }
    if (self.inputs[1]->needs_grad) {
      Tensor& gs = self.inputs[1]->ensure_grad();
      for (int in = 0; in < xv.n; ++in) {
        for (int ic = 0; ic < xv.c; ++ic) {
          size_t base = (static_cast<size_t>(in) * xv.c + ic) * hw;
          double acc = 0.0;
          for (size_t i = 0; i < hw; ++i)
            acc += self.grad.data[base + i] * xv.data[base + i];
          gs.at(in, ic, 0, 0) += acc;
        }
      }
    }
  });
}

Var global_avg_pool(const Var& x) {
  const Tensor& xv = x->val;
  Tensor out(xv.n, xv.c, 1, 1);
  size_t hw = static_cast<size_t>(xv.h) * xv.w;
  for (int in = 0; in < xv.n; ++in) {
    for (int ic = 0; ic < xv.c; ++ic) {
      const double* p = xv.data.data() + (static_cast<size_t>(in) * xv.c + ic) * hw;
      double acc = 0.0;
      for (size_t i = 0; i < hw; ++i) acc += p[i];
      out.at(in, ic, 0, 0) = acc / static_cast<double>(hw);
    }
  }
  return make_node(std::move(out), {x}, [](Node& self) {
    if (!self.inputs[0]->needs_grad) return;
    Tensor& g = self.inputs[0]->ensure_grad();
    size_t hw = static_cast<size_t>(g.h) * g.w;
    for (int in = 0; in < g.n; ++in) {
      for (int ic = 0; ic < g.c; ++ic) {
        double d = self.grad.at(in, ic, 0, 0) / static_cast<double>(hw);
        double* p = g.data.data() + (static_cast<size_t>(in) * g.c + ic) * hw;
        for (size_t i = 0; i < hw; ++i) p[i] += d;
      }
    }
  });
}

Var softmax_spatial(const Var& x) {
  const Tensor& xv = x->val;
  if (xv.c != 1) throw DimensionError("softmax_spatial: expected a single channel");
  Tensor out = xv;
  size_t hw = static_cast<size_t>(xv.h) * xv.w;
  for (int in = 0; in < xv.n; ++in) {
    double* p = out.data.data() + static_cast<size_t>(in) * hw;
    double mx = *std::max_element(p, p + hw);
    double sum = 0.0;
    for (size_t i = 0; i < hw; ++i) {
      p[i] = std::exp(p[i] - mx);
      sum += p[i];
    }
    for (size_t i = 0; i < hw; ++i) p[i] /= sum;
  }
  return make_node(std::move(out), {x}, [](Node& self) {
    if (!self.inputs[0]->needs_grad) return;
    Tensor& g = self.inputs[0]->ensure_grad();
    size_t hw = static_cast<size_t>(g.h) * g.w;
    for (int in = 0; in < g.n; ++in) {
      const double* y = self.val.data.data() + static_cast<size_t>(in) * hw;
      const double* dy = self.grad.data.data() + static_cast<size_t>(in) * hw;
      double dot = 0.0;
      for (size_t i = 0; i < hw; ++i) dot += dy[i] * y[i];
      double* gp = g.data.data() + static_cast<size_t>(in) * hw;
      for (size_t i = 0; i < hw; ++i) gp[i] += y[i] * (dy[i] - dot);
    }
  });
}

Var weighted_pool(const Var& wp, const Var& f) {
  const Tensor& wv = wp->val;
  const Tensor& fv = f->val;
  if (wv.c != 1 || wv.n != fv.n || wv.h != fv.h || wv.w != fv.w)
    throw DimensionError("weighted_pool: weight map must be (N,1,H,W) matching features");
  Tensor out(fv.n, fv.c, 1, 1);
  size_t hw = static_cast<size_t>(fv.h) * fv.w;
  for (int in = 0; in < fv.n; ++in) {
    const double* w = wv.data.data() + static_cast<size_t>(in) * hw;
    for (int ic = 0; ic < fv.c; ++ic) {
      const double* p = fv.data.data() + (static_cast<size_t>(in) * fv.c + ic) * hw;
      double acc = 0.0;
      for (size_t i = 0; i < hw; ++i) acc += w[i] * p[i];
      out.at(in, ic, 0, 0) = acc;
    }
  }
  return make_node(std::move(out), {wp, f}, [](Node& self) {
    const Tensor& wv = self.inputs[0]->val;
    const Tensor& fv = self.inputs[1]->val;
    size_t hw = static_cast<size_t>(fv.h) * fv.w;
    if (self.inputs[0]->needs_grad) {
      Tensor& gw = self.inputs[0]->ensure_grad();
      for (int in = 0; in < fv.n; ++in) {
        double* gp = gw.data.data() + static_cast<size_t>(in) * hw;
        for (int ic = 0; ic < fv.c; ++ic) {
          double d = self.grad.at(in, ic, 0, 0);
          const double* p = fv.data.data() + (static_cast<size_t>(in) * fv.c + ic) * hw;
          for (size_t i = 0; i < hw; ++i) gp[i] += d * p[i];
        }
      }
    }
    if (self.inputs[1]->needs_grad) {
      Tensor& gf = self.inputs[1]->ensure_grad();
      for (int in = 0; in < fv.n; ++in) {
        const double* w = wv.data.data() + static_cast<size_t>(in) * hw;
        for (int ic = 0; ic < fv.c; ++ic) {
          double d = self.grad.at(in, ic, 0, 0);
          double* gp = gf.data.data() + (static_cast<size_t>(in) * fv.c + ic) * hw;
          for (size_t i = 0; i < hw; ++i) gp[i] += d * w[i];
        }
      }
    }
  });
}

Var concat_channels(const Var& a, const Var& b) {
  const Tensor& av = a->val;
  const Tensor& bv = b->val;
  if (av.n != bv.n || av.h != bv.h || av.w != bv.w)
    throw DimensionError("concat_channels: spatial shapes differ");
  Tensor out(av.n, av.c + bv.c, av.h, av.w);
  size_t hw = static_cast<size_t>(av.h) * av.w;
  for (int in = 0; in < av.n; ++in) {
    std::copy(av.sample(in), av.sample(in) + static_cast<size_t>(av.c) * hw,
              out.sample(in));
    std::copy(bv.sample(in), bv.sample(in) + static_cast<size_t>(bv.c) * hw,
              out.sample(in) + static_cast<size_t>(av.c) * hw);
  }
  int ca = av.c;
  return make_node(std::move(out), {a, b}, [ca](Node& self) {
    size_t hw = static_cast<size_t>(self.val.h) * self.val.w;
    for (int k = 0; k < 2; ++k) {
      auto& in = self.inputs[k];
      if (!in->needs_grad) continue;
      Tensor& g = in->ensure_grad();
      size_t off = k == 0 ? 0 : static_cast<size_t>(ca) * hw;
      size_t len = static_cast<size_t>(g.c) * hw;
      for (int n = 0; n < g.n; ++n) {
        const double* src = self.grad.sample(n) + off;
        double* dst = g.sample(n);
        for (size_t i = 0; i < len; ++i) dst[i] += src[i];
      }
    }
  });
}

Var slice_channels(const Var& x, int c0, int c1) {
  const Tensor& xv = x->val;
  if (c0 < 0 || c1 > xv.c || c0 >= c1) throw RangeError("slice_channels: bad range");
  Tensor out(xv.n, c1 - c0, xv.h, xv.w);
  size_t hw = static_cast<size_t>(xv.h) * xv.w;
  for (int in = 0; in < xv.n; ++in) {
    std::copy(xv.sample(in) + static_cast<size_t>(c0) * hw,
              xv.sample(in) + static_cast<size_t>(c1) * hw, out.sample(in));
  }
  return make_node(std::move(out), {x}, [c0](Node& self) {
    if (!self.inputs[0]->needs_grad) return;
    Tensor& g = self.inputs[0]->ensure_grad();
    size_t hw = static_cast<size_t>(g.h) * g.w;
    size_t len = static_cast<size_t>(self.val.c) * hw;
    for (int n = 0; n < g.n; ++n) {
      const double* src = self.grad.sample(n);
      double* dst = g.sample(n) + static_cast<size_t>(c0) * hw;
      for (size_t i = 0; i < len; ++i) dst[i] += src[i];
    }
  });
}

namespace {

// Gathers conv patches of sample `xs` into a (Cin*K*K) x (OH*OW) row-major matrix.
void im2col(const double* xs, int cin, int h, int w, int k, int stride, int pad,
            int oh, int ow, double* col) {
  for (int c = 0; c < cin; ++c) {
    const double* plane = xs + static_cast<size_t>(c) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* row = col + (static_cast<size_t>(c) * k * k + ky * k + kx) *
                                (static_cast<size_t>(oh) * ow);
        for (int oy = 0; oy < oh; ++oy) {
          int sy = oy * stride + ky - pad;
          double* dst = row + static_cast<size_t>(oy) * ow;
          if (sy < 0 || sy >= h) {
            std::fill(dst, dst + ow, 0.0);
            continue;
          }
          const double* srow = plane + static_cast<size_t>(sy) * w;
          for (int ox = 0; ox < ow; ++ox) {
            int sx = ox * stride + kx - pad;
            dst[ox] = (sx >= 0 && sx < w) ? srow[sx] : 0.0;
          }
        }
      }
    }
  }
}

void col2im(const double* col, int cin, int h, int w, int k, int stride, int pad,
            int oh, int ow, double* xs) {
  for (int c = 0; c < cin; ++c) {
    double* plane = xs + static_cast<size_t>(c) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* row = col + (static_cast<size_t>(c) * k * k + ky * k + kx) *
                                      (static_cast<size_t>(oh) * ow);
        for (int oy = 0; oy < oh; ++oy) {
          int sy = oy * stride + ky - pad;
          if (sy < 0 || sy >= h) continue;
          const double* srow = row + static_cast<size_t>(oy) * ow;
          double* drow = plane + static_cast<size_t>(sy) * w;
          for (int ox = 0; ox < ow; ++ox) {
            int sx = ox * stride + kx - pad;
            if (sx >= 0 && sx < w) drow[sx] += srow[ox];
          }
        }
      }
    }
  }
}

}  // namespace

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
  const Tensor& xv = x->val;
  const Tensor& wv = w->val;
  const Tensor& bv = b->val;
  if (wv.c != xv.c) throw DimensionError("conv2d: weight input channels mismatch");
  if (wv.h != wv.w) throw DimensionError("conv2d: kernel must be square");
  if (bv.n != 1 || bv.c != wv.n || bv.h != 1 || bv.w != 1)
    throw DimensionError("conv2d: bias must be (1,Cout,1,1)");
  const int k = wv.h, cin = xv.c, cout = wv.n;
  const int oh = (xv.h + 2 * pad - k) / stride + 1;
  const int ow = (xv.w + 2 * pad - k) / stride + 1;
  if (oh < 1 || ow < 1) throw DimensionError("conv2d: output would be empty");
  const size_t ohw = static_cast<size_t>(oh) * ow;
  const size_t ckk = static_cast<size_t>(cin) * k * k;
  const bool direct = (k == 1 && stride == 1 && pad == 0);

  Tensor out(xv.n, cout, oh, ow);
  CMapMat wm(wv.data.data(), cout, static_cast<Eigen::Index>(ckk));
  std::vector<double> col;
  if (!direct) col.resize(ckk * ohw);
  for (int in = 0; in < xv.n; ++in) {
    const double* cold;
    if (direct) {
      cold = xv.sample(in);
    } else {
      im2col(xv.sample(in), cin, xv.h, xv.w, k, stride, pad, oh, ow, col.data());
      cold = col.data();
    }
    CMapMat cm(cold, static_cast<Eigen::Index>(ckk), static_cast<Eigen::Index>(ohw));
    MapMat om(out.sample(in), cout, static_cast<Eigen::Index>(ohw));
    om.noalias() = wm * cm;
    for (int oc = 0; oc < cout; ++oc) om.row(oc).array() += bv.data[oc];
  }

  return make_node(std::move(out), {x, w, b}, [stride, pad](Node& self) {
    const Tensor& xv = self.inputs[0]->val;
    const Tensor& wv = self.inputs[1]->val;
    const int k = wv.h, cin = xv.c, cout = wv.n;
    const int oh = self.val.h, ow = self.val.w;
    const size_t ohw = static_cast<size_t>(oh) * ow;
    const size_t ckk = static_cast<size_t>(cin) * k * k;
    const bool direct = (k == 1 && stride == 1 && pad == 0);
    const bool need_x = self.inputs[0]->needs_grad;
    const bool need_w = self.inputs[1]->needs_grad;
    const bool need_b = self.inputs[2]->needs_grad;

    CMapMat wm(wv.data.data(), cout, static_cast<Eigen::Index>(ckk));
    std::vector<double> col, dcol;
    if (!direct) {
      if (need_w) col.resize(ckk * ohw);
      if (need_x) dcol.resize(ckk * ohw);
    }
    for (int in = 0; in < xv.n; ++in) {
      CMapMat dym(self.grad.sample(in), cout, static_cast<Eigen::Index>(ohw));
      if (need_w) {
        const double* cold;
        if (direct) {
          cold = xv.sample(in);
        } else {
          im2col(xv.sample(in), cin, xv.h, xv.w, k, stride, pad, oh, ow, col.data());
          cold = col.data();
        }
        CMapMat cm(cold, static_cast<Eigen::Index>(ckk), static_cast<Eigen::Index>(ohw));
        Tensor& gw = self.inputs[1]->ensure_grad();
        MapMat gwm(gw.data.data(), cout, static_cast<Eigen::Index>(ckk));
        gwm.noalias() += dym * cm.transpose();
      }
      if (need_b) {
        Tensor& gb = self.inputs[2]->ensure_grad();
        for (int oc = 0; oc < cout; ++oc) gb.data[oc] += dym.row(oc).sum();
      }
      if (need_x) {
        Tensor& gx = self.inputs[0]->ensure_grad();
        if (direct) {
          MapMat gxm(gx.sample(in), static_cast<Eigen::Index>(ckk),
                     static_cast<Eigen::Index>(ohw));
          gxm.noalias() += wm.transpose() * dym;
        } else {
          MapMat dcm(dcol.data(), static_cast<Eigen::Index>(ckk),
                     static_cast<Eigen::Index>(ohw));
          dcm.noalias() = wm.transpose() * dym;
          col2im(dcol.data(), cin, xv.h, xv.w, k, stride, pad, oh, ow, gx.sample(in));
        }
      }
    }
  });
}

Var depthwise_conv2d(const Var& x, const Var& w, const Var& b, int pad) {
  const Tensor& xv = x->val;
  const Tensor& wv = w->val;
  const Tensor& bv = b->val;
  if (wv.n != xv.c || wv.c != 1 || wv.h != wv.w)
    throw DimensionError("depthwise_conv2d: weight must be (C,1,K,K)");
  if (bv.n != 1 || bv.c != xv.c || bv.h != 1 || bv.w != 1)
    throw DimensionError("depthwise_conv2d: bias must be (1,C,1,1)");
  const int k = wv.h, h = xv.h, w_ = xv.w;
  const int oh = h + 2 * pad - k + 1;
  const int ow = w_ + 2 * pad - k + 1;
  if (oh < 1 || ow < 1) throw DimensionError("depthwise_conv2d: output would be empty");

  Tensor out(xv.n, xv.c, oh, ow);
  for (int in = 0; in < xv.n; ++in) {
    for (int c = 0; c < xv.c; ++c) {
      const double* plane = xv.data.data() + (static_cast<size_t>(in) * xv.c + c) *
                                                 (static_cast<size_t>(h) * w_);
      const double* ker = wv.data.data() + static_cast<size_t>(c) * k * k;
      double* op = out.data.data() +
                   (static_cast<size_t>(in) * xv.c + c) * (static_cast<size_t>(oh) * ow);
      double bias = bv.data[c];
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          double acc = bias;
          for (int ky = 0; ky < k; ++ky) {
            int sy = oy + ky - pad;
            if (sy < 0 || sy >= h) continue;
            for (int kx = 0; kx < k; ++kx) {
              int sx = ox + kx - pad;
              if (sx < 0 || sx >= w_) continue;
              acc += ker[ky * k + kx] * plane[static_cast<size_t>(sy) * w_ + sx];
            }
          }
          op[static_cast<size_t>(oy) * ow + ox] = acc;
        }
      }
    }
  }

  return make_node(std::move(out), {x, w, b}, [pad](Node& self) {
    const Tensor& xv = self.inputs[0]->val;
    const Tensor& wv = self.inputs[1]->val;
    const int k = wv.h, h = xv.h, w_ = xv.w;
    const int oh = self.val.h, ow = self.val.w;
    const bool need_x = self.inputs[0]->needs_grad;
    const bool need_w = self.inputs[1]->needs_grad;
    const bool need_b = self.inputs[2]->needs_grad;
    for (int in = 0; in < xv.n; ++in) {
      for (int c = 0; c < xv.c; ++c) {
        size_t pbase = (static_cast<size_t>(in) * xv.c + c) * (static_cast<size_t>(h) * w_);
        size_t obase = (static_cast<size_t>(in) * xv.c + c) * (static_cast<size_t>(oh) * ow);
        const double* plane = xv.data.data() + pbase;
        const double* ker = wv.data.data() + static_cast<size_t>(c) * k * k;
        const double* dy = self.grad.data.data() + obase;
        for (int oy = 0; oy < oh; ++oy) {
          for (int ox = 0; ox < ow; ++ox) {
            double d = dy[static_cast<size_t>(oy) * ow + ox];
            if (need_b) self.inputs[2]->ensure_grad().data[c] += d;
            for (int ky = 0; ky < k; ++ky) {
              int sy = oy + ky - pad;
              if (sy < 0 || sy >= h) continue;
              for (int kx = 0; kx < k; ++kx) {
                int sx = ox + kx - pad;
                if (sx < 0 || sx >= w_) continue;
                size_t si = static_cast<size_t>(sy) * w_ + sx;
                if (need_w)
                  self.inputs[1]->ensure_grad().data[static_cast<size_t>(c) * k * k +
                                                     ky * k + kx] += d * plane[si];
                if (need_x)
                  self.inputs[0]->ensure_grad().data[pbase + si] += d * ker[ky * k + kx];
              }
            }
          }
        }
      }
    }
  });
}

Var pixel_shuffle(const Var& x, int r) {
  const Tensor& xv = x->val;
  if (r < 1 || xv.c % (r * r) != 0)
    throw DimensionError("pixel_shuffle: channels not divisible by r^2");
  const int co = xv.c / (r * r);
  Tensor out(xv.n, co, xv.h * r, xv.w * r);
  for (int in = 0; in < xv.n; ++in) {
    for (int c = 0; c < co; ++c) {
      for (int dy = 0; dy < r; ++dy) {
        for (int dx = 0; dx < r; ++dx) {
          int ci = c * r * r + dy * r + dx;
          for (int yy = 0; yy < xv.h; ++yy) {
            for (int xx = 0; xx < xv.w; ++xx) {
              out.at(in, c, yy * r + dy, xx * r + dx) = xv.at(in, ci, yy, xx);
            }
          }
        }
      }
    }
  }
  return make_node(std::move(out), {x}, [r](Node& self) {
    if (!self.inputs[0]->needs_grad) return;
    Tensor& g = self.inputs[0]->ensure_grad();
    const int co = self.val.c;
    for (int in = 0; in < g.n; ++in) {
      for (int c = 0; c < co; ++c) {
        for (int dy = 0; dy < r; ++dy) {
          for (int dx = 0; dx < r; ++dx) {
            int ci = c * r * r + dy * r + dx;
            for (int yy = 0; yy < g.h; ++yy) {
              for (int xx = 0; xx < g.w; ++xx) {
                g.at(in, ci, yy, xx) += self.grad.at(in, c, yy * r + dy, xx * r + dx);
              }
            }
          }
        }
      }
    }
  });
}

Var batch_norm(const Var& x, const Var& gamma, const Var& beta, BnBuffers& buffers,
               NormMode mode, double momentum, double eps) {
  const Tensor& xv = x->val;
  const int C = xv.c;
  if (gamma->val.size() != static_cast<size_t>(C) ||
      beta->val.size() != static_cast<size_t>(C))
    throw DimensionError("batch_norm: affine parameters must have C entries");

  std::vector<double> mean(C), ivstd(C);
  size_t hw = static_cast<size_t>(xv.h) * xv.w;
  double m_count = static_cast<double>(xv.n) * static_cast<double>(hw);

  if (mode == NormMode::minibatch) {
    for (int c = 0; c < C; ++c) {
      double acc = 0.0;
      for (int in = 0; in < xv.n; ++in) {
        const double* p = xv.data.data() + (static_cast<size_t>(in) * C + c) * hw;
        for (size_t i = 0; i < hw; ++i) acc += p[i];
      }
      mean[c] = acc / m_count;
      double vacc = 0.0;
      for (int in = 0; in < xv.n; ++in) {
        const double* p = xv.data.data() + (static_cast<size_t>(in) * C + c) * hw;
        for (size_t i = 0; i < hw; ++i) {
          double d = p[i] - mean[c];
          vacc += d * d;
        }
      }
      double var = vacc / m_count;
      ivstd[c] = 1.0 / std::sqrt(var + eps);
      buffers.running_mean->value.data[c] =
          (1.0 - momentum) * buffers.running_mean->value.data[c] + momentum * mean[c];
      buffers.running_var->value.data[c] =
          (1.0 - momentum) * buffers.running_var->value.data[c] + momentum * var;
    }
    buffers.ready = true;
  } else {
    if (!buffers.ready)
      throw StateError("batch_norm: frozen mode requested before any statistics were recorded");
    for (int c = 0; c < C; ++c) {
      mean[c] = buffers.running_mean->value.data[c];
      ivstd[c] = 1.0 / std::sqrt(buffers.running_var->value.data[c] + eps);
    }
  }

  Tensor out = xv;
  for (int in = 0; in < xv.n; ++in) {
    for (int c = 0; c < C; ++c) {
      double* p = out.data.data() + (static_cast<size_t>(in) * C + c) * hw;
      double g = gamma->val.data[c], bppp = beta->val.data[c];
      for (size_t i = 0; i < hw; ++i) p[i] = g * (p[i] - mean[c]) * ivstd[c] + bppp;
    }
  }

  bool minibatch = mode == NormMode::minibatch;
  return make_node(std::move(out), {x, gamma, beta},
                   [mean, ivstd, minibatch](Node& self) {
    const Tensor& xv = self.inputs[0]->val;
    const Tensor& gv = self.inputs[1]->val;
    const int C = xv.c;
    size_t hw = static_cast<size_t>(xv.h) * xv.w;
    double m_count = static_cast<double>(xv.n) * static_cast<double>(hw);
    const bool need_x = self.inputs[0]->needs_grad;
    const bool need_g = self.inputs[1]->needs_grad;
    const bool need_b = self.inputs[2]->needs_grad;
    for (int c = 0; c < C; ++c) {
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (int in = 0; in < xv.n; ++in) {
        size_t base = (static_cast<size_t>(in) * C + c) * hw;
        for (size_t i = 0; i < hw; ++i) {
          double dy = self.grad.data[base + i];
          double xhat = (xv.data[base + i] - mean[c]) * ivstd[c];
          sum_dy += dy;
          sum_dy_xhat += dy * xhat;
        }
      }
      if (need_g) self.inputs[1]->ensure_grad().data[c] += sum_dy_xhat;
      if (need_b) self.inputs[2]->ensure_grad().data[c] += sum_dy;
      if (!need_x) continue;
      Tensor& gx = self.inputs[0]->ensure_grad();
      double g = gv.data[c];
      if (minibatch) {
        for (int in = 0; in < xv.n; ++in) {
          size_t base = (static_cast<size_t>(in) * C + c) * hw;
          for (size_t i = 0; i < hw; ++i) {
            double dy = self.grad.data[base + i];
            double xhat = (xv.data[base + i] - mean[c]) * ivstd[c];
            gx.data[base + i] += g * ivstd[c] *
                                 (dy - sum_dy / m_count - xhat * sum_dy_xhat / m_count);
          }
        }
      } else {
        for (int in = 0; in < xv.n; ++in) {
          size_t base = (static_cast<size_t>(in) * C + c) * hw;
          for (size_t i = 0; i < hw; ++i) {
            gx.data[base + i] += self.grad.data[base + i] * g * ivstd[c];
          }
        }
      }
    }
  });
}

Var layer_norm_ch(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const Tensor& xv = x->val;
  const int C = xv.c;
  if (gamma->val.size() != static_cast<size_t>(C) ||
      beta->val.size() != static_cast<size_t>(C))
    throw DimensionError("layer_norm_ch: affine parameters must have C entries");
  size_t hw = static_cast<size_t>(xv.h) * xv.w;
  Tensor out = xv;
  Tensor mu(xv.n, 1, xv.h, xv.w), iv(xv.n, 1, xv.h, xv.w);
  for (int in = 0; in < xv.n; ++in) {
    for (size_t i = 0; i < hw; ++i) {
      double acc = 0.0;
      for (int c = 0; c < C; ++c) acc += xv.data[(static_cast<size_t>(in) * C + c) * hw + i];
      double m = acc / C;
      double vacc = 0.0;
      for (int c = 0; c < C; ++c) {
        double d = xv.data[(static_cast<size_t>(in) * C + c) * hw + i] - m;
        vacc += d * d;
      }
      double istd = 1.0 / std::sqrt(vacc / C + eps);
      mu.data[static_cast<size_t>(in) * hw + i] = m;
      iv.data[static_cast<size_t>(in) * hw + i] = istd;
      for (int c = 0; c < C; ++c) {
        size_t idx = (static_cast<size_t>(in) * C + c) * hw + i;
        out.data[idx] = gamma->val.data[c] * (xv.data[idx] - m) * istd + beta->val.data[c];
      }
    }
  }
  return make_node(std::move(out), {x, gamma, beta}, [mu, iv](Node& self) {
    const Tensor& xv = self.inputs[0]->val;
    const Tensor& gv = self.inputs[1]->val;
    const int C = xv.c;
    size_t hw = static_cast<size_t>(xv.h) * xv.w;
    const bool need_x = self.inputs[0]->needs_grad;
    const bool need_g = self.inputs[1]->needs_grad;
    const bool need_b = self.inputs[2]->needs_grad;
    for (int in = 0; in < xv.n; ++in) {
      for (size_t i = 0; i < hw; ++i) {
        double m = mu.data[static_cast<size_t>(in) * hw + i];
        double istd = iv.data[static_cast<size_t>(in) * hw + i];
        double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
        for (int c = 0; c < C; ++c) {
          size_t idx = (static_cast<size_t>(in) * C + c) * hw + i;
          double dy = self.grad.data[idx];
          double xhat = (xv.data[idx] - m) * istd;
          double dxhat = dy * gv.data[c];
          sum_dxhat += dxhat;
          sum_dxhat_xhat += dxhat * xhat;
          if (need_g) self.inputs[1]->ensure_grad().data[c] += dy * xhat;
          if (need_b) self.inputs[2]->ensure_grad().data[c] += dy;
        }
        if (!need_x) continue;
        Tensor& gx = self.inputs[0]->ensure_grad();
        for (int c = 0; c < C; ++c) {
          size_t idx = (static_cast<size_t>(in) * C + c) * hw + i;
          double xhat = (xv.data[idx] - m) * istd;
          double dxhat = self.grad.data[idx] * gv.data[c];
          gx.data[idx] +=
              istd * (dxhat - sum_dxhat / C - xhat * sum_dxhat_xhat / C);
        }
      }
    }
  });
}

void backward(const Var& root) {
  if (root->val.size() != 1)
    throw DimensionError("backward: root must be a scalar");
  if (!root->needs_grad) return;

  std::vector<Node*> topo;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->inputs.size()) {
      Node* child = node->inputs[idx].get();
      ++idx;
      if (child->needs_grad && !visited.count(child)) {
        visited.insert(child);
        stack.emplace_back(child, 0);
      }
    } else {
      topo.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* node : topo) {
    Tensor& g = node->ensure_grad();
    std::fill(g.data.begin(), g.data.end(), 0.0);
  }
  root->grad.data[0] = 1.0;

  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    Node* node = *it;
    if (node->backward_fn) node->backward_fn(*node);
  }

  for (Node* node : topo) {
    if (node->param && node->param->trainable) {
      Parameter* p = node->param;
      if (p->grad.size() != p->value.size())
        p->grad = Tensor(p->value.n, p->value.c, p->value.h, p->value.w);
      for (size_t i = 0; i < p->grad.size(); ++i)
        p->grad.data[i] += node->grad.data[i];
    }
  }
}

}  // namespace udc::nn
