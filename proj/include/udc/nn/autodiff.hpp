// Copyright 2026 the udcsim authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "udc/nn/tensor.hpp"

namespace udc::nn {

/// Learnable (or buffer) tensor with gradient and Adam state.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;     // same shape as value once allocated
  Tensor m, v;     // optimizer moments, sized lazily
  bool trainable = true;

  void zero_grad();
};

struct Node;
using Var = std::shared_ptr<Node>;

/// One vertex of the reverse-mode tape.
struct Node {
  Tensor val;
  Tensor grad;  // allocated during backward
  bool needs_grad = false;
  Parameter* param = nullptr;  // set on parameter leaves
  std::vector<Var> inputs;
  std::function<void(Node&)> backward_fn;

  Tensor& ensure_grad();
};

/// While alive, newly built nodes never require gradients.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

bool grad_enabled();

// Leaf constructors.
Var constant(Tensor t);
Var leaf(Parameter* p);                          // tracks grad if trainable
Var input(Tensor t, bool needs_grad = false);    // caller reads node->grad
Var detach(const Var& x);

// Elementwise and structural ops. All return new nodes.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var affine(const Var& x, double scale, double shift);
Var relu(const Var& x);
Var sigmoid(const Var& x);
Var softplus(const Var& x);
Var abs_val(const Var& x);
Var sqrt_val(const Var& x);
Var mean_all(const Var& x);  // (1,1,1,1)

/// Mirror padding by r on every side (edge sample not repeated).
Var reflect_pad(const Var& x, int r);

/// Clamp to [0,1] and round to 2^bits - 1 levels; gradient passes straight
/// through (identity), the usual surrogate for hard rounding.
Var quantize_st(const Var& x, int bits);

/// Broadcast multiply by per-channel gains s of shape (N,C,1,1).
Var mul_channel(const Var& x, const Var& s);
Var global_avg_pool(const Var& x);  // (N,C,1,1)
/// Softmax over the spatial positions of a (N,1,H,W) map.
Var softmax_spatial(const Var& x);
/// out[n,c] = sum_hw wp[n,0,h,w] * f[n,c,h,w], shapes (N,1,H,W) x (N,C,H,W) -> (N,C,1,1).
Var weighted_pool(const Var& wp, const Var& f);

Var concat_channels(const Var& a, const Var& b);
Var slice_channels(const Var& x, int c0, int c1);  // [c0, c1)

/// Dense conv, weight (Cout,Cin,K,K), bias (1,Cout,1,1), zero padding.
Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad);
/// Depthwise conv, weight (C,1,K,K), bias (1,C,1,1), stride 1, zero padding.
Var depthwise_conv2d(const Var& x, const Var& w, const Var& b, int pad);
/// Rearranges (N, C*r^2, H, W) to (N, C, H*r, W*r).
Var pixel_shuffle(const Var& x, int r);

enum class NormMode { minibatch, frozen };

struct BnBuffers {
  Parameter* running_mean = nullptr;  // (1,C,1,1), non-trainable
  Parameter* running_var = nullptr;   // biased variance
  bool ready = false;                 // set once minibatch stats were recorded
};

/// Channel-wise normalization over (N,H,W). In minibatch mode batch statistics
/// are used and running buffers updated in place; in frozen mode the buffers
/// are read (StateError if never filled).
Var batch_norm(const Var& x, const Var& gamma, const Var& beta, BnBuffers& buffers,
               NormMode mode, double momentum, double eps);

/// Per-position normalization over channels with per-channel affine.
Var layer_norm_ch(const Var& x, const Var& gamma, const Var& beta, double eps);

/// Reverse pass from a scalar root. Accumulates into Parameter::grad of every
/// trainable parameter leaf reachable from root; input leaves keep their
/// gradient in node->grad.
void backward(const Var& root);

}  // namespace udc::nn
