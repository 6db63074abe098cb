#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "evlab/tensor.hpp"

// Layer forward/backward kernels. All kernels are shape-checked, allocate
// their outputs, and are deterministic: accumulation order is fixed and
// independent of the build host. Convolution is 3x3, stride 1, zero "same"
// padding; pooling and upsampling work on 2x2 blocks. Templates are
// instantiated with float for training and double for gradient checking.

namespace evlab::ops {

namespace detail {

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ValidationError(msg);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// conv2d: weight [Cout,Cin,3,3], bias [Cout], input [N,Cin,H,W] -> [N,Cout,H,W]
//
// Per output element the sum is ordered bias, then (ci, ky, kx) ascending,
// which keeps results bit-identical to a direct per-element loop.
// ---------------------------------------------------------------------------

template <typename T>
TensorT<T> conv2d_fwd(const TensorT<T>& in, const TensorT<T>& w, const TensorT<T>& b) {
  detail::require(in.rank() == 4, "conv2d: input must be 4D, got " + shape_str(in.shape));
  detail::require(w.rank() == 4 && w.dim(2) == 3 && w.dim(3) == 3,
                  "conv2d: weight must be [Cout,Cin,3,3], got " + shape_str(w.shape));
  detail::require(w.dim(1) == in.dim(1),
                  "conv2d: channel mismatch, weight " + shape_str(w.shape) + " input " +
                      shape_str(in.shape));
  detail::require(b.rank() == 1 && b.dim(0) == w.dim(0), "conv2d: bias/weight mismatch");

  const std::size_t N = in.dim(0), Cin = in.dim(1), H = in.dim(2), W = in.dim(3);
  const std::size_t Cout = w.dim(0);
  TensorT<T> out({N, Cout, H, W});

  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t co = 0; co < Cout; ++co) {
      T* op = out.data.data() + ((n * Cout + co) * H) * W;
      const T bias = b.data[co];
      for (std::size_t i = 0; i < H * W; ++i) op[i] = bias;
      for (std::size_t ci = 0; ci < Cin; ++ci) {
        const T* ip = in.data.data() + ((n * Cin + ci) * H) * W;
        const T* wp = w.data.data() + ((co * Cin + ci) * 9);
        for (int ky = 0; ky < 3; ++ky) {
          const std::size_t y0 = ky == 0 ? 1 : 0;
          const std::size_t y1 = ky == 2 ? H - 1 : H;
          for (int kx = 0; kx < 3; ++kx) {
            const T wv = wp[ky * 3 + kx];
            const std::size_t x0 = kx == 0 ? 1 : 0;
            const std::size_t x1 = kx == 2 ? W - 1 : W;
            for (std::size_t y = y0; y < y1; ++y) {
              const T* src = ip + (y + static_cast<std::size_t>(ky) - 1) * W + (kx - 1);
              T* dst = op + y * W;
              for (std::size_t x = x0; x < x1; ++x) dst[x] += wv * src[x];
            }
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
struct Conv2dGrads {
  TensorT<T> input;
  TensorT<T> weight;
  TensorT<T> bias;
};

template <typename T>
Conv2dGrads<T> conv2d_bwd(const TensorT<T>& grad_out, const TensorT<T>& in,
                          const TensorT<T>& w) {
  detail::require(grad_out.rank() == 4 && in.rank() == 4 && w.rank() == 4,
                  "conv2d_bwd: rank mismatch");
  const std::size_t N = in.dim(0), Cin = in.dim(1), H = in.dim(2), W = in.dim(3);
  const std::size_t Cout = w.dim(0);
  detail::require(grad_out.shape == std::vector<std::size_t>({N, Cout, H, W}),
                  "conv2d_bwd: grad_out shape " + shape_str(grad_out.shape) +
                      " does not match saved context");
  detail::require(w.dim(1) == Cin && w.dim(2) == 3 && w.dim(3) == 3,
                  "conv2d_bwd: weight shape mismatch");

  Conv2dGrads<T> g;
  g.input = TensorT<T>({N, Cin, H, W});
  g.weight = TensorT<T>({Cout, Cin, 3, 3});
  g.bias = TensorT<T>({Cout});

  // grad_bias[co] = sum of grad_out channel co
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t co = 0; co < Cout; ++co) {
      const T* gp = grad_out.data.data() + ((n * Cout + co) * H) * W;
      T acc = 0;
      for (std::size_t i = 0; i < H * W; ++i) acc += gp[i];
      g.bias.data[co] += acc;
    }
  }

  // grad_weight[co,ci,ky,kx] = sum_{n,y,x} grad_out[n,co,y,x] * in[n,ci,y+ky-1,x+kx-1]
  for (std::size_t co = 0; co < Cout; ++co) {
    for (std::size_t ci = 0; ci < Cin; ++ci) {
      T* gw = g.weight.data.data() + (co * Cin + ci) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        const std::size_t y0 = ky == 0 ? 1 : 0;
        const std::size_t y1 = ky == 2 ? H - 1 : H;
        for (int kx = 0; kx < 3; ++kx) {
          const std::size_t x0 = kx == 0 ? 1 : 0;
          const std::size_t x1 = kx == 2 ? W - 1 : W;
          T a0 = 0, a1 = 0, a2 = 0, a3 = 0;
          for (std::size_t n = 0; n < N; ++n) {
            const T* gp = grad_out.data.data() + ((n * Cout + co) * H) * W;
            const T* ip = in.data.data() + ((n * Cin + ci) * H) * W;
            for (std::size_t y = y0; y < y1; ++y) {
              const T* gr = gp + y * W;
              const T* sr = ip + (y + static_cast<std::size_t>(ky) - 1) * W + (kx - 1);
              std::size_t x = x0;
              for (; x + 4 <= x1; x += 4) {
                a0 += gr[x] * sr[x];
                a1 += gr[x + 1] * sr[x + 1];
                a2 += gr[x + 2] * sr[x + 2];
                a3 += gr[x + 3] * sr[x + 3];
              }
              for (; x < x1; ++x) a0 += gr[x] * sr[x];
            }
          }
          gw[ky * 3 + kx] = (a0 + a1) + (a2 + a3);
        }
      }
    }
  }

  // grad_input[n,ci,y,x] = sum_{co,ky,kx} w[co,ci,ky,kx] * grad_out[n,co,y-ky+1,x-kx+1]
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t ci = 0; ci < Cin; ++ci) {
      T* dst_plane = g.input.data.data() + ((n * Cin + ci) * H) * W;
      for (std::size_t co = 0; co < Cout; ++co) {
        const T* gp = grad_out.data.data() + ((n * Cout + co) * H) * W;
        const T* wp = w.data.data() + ((co * Cin + ci) * 9);
        for (int ky = 0; ky < 3; ++ky) {
          // y - ky + 1 must land in [0, H)
          const std::size_t y0 = ky == 2 ? 1 : 0;
          const std::size_t y1 = ky == 0 ? H - 1 : H;
          for (int kx = 0; kx < 3; ++kx) {
            const T wv = wp[ky * 3 + kx];
            const std::size_t x0 = kx == 2 ? 1 : 0;
            const std::size_t x1 = kx == 0 ? W - 1 : W;
            for (std::size_t y = y0; y < y1; ++y) {
              const T* src = gp + (y - static_cast<std::size_t>(ky) + 1) * W + (1 - kx);
              T* dst = dst_plane + y * W;
              for (std::size_t x = x0; x < x1; ++x) dst[x] += wv * src[x];
            }
          }
        }
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// maxpool2: 2x2 window, stride 2. argmax keeps the winning offset (0..3 in
// raster order within the window, first max wins on ties) for the backward
// routing.
// ---------------------------------------------------------------------------

template <typename T>
std::pair<TensorT<T>, std::vector<std::uint8_t>> maxpool2_fwd(const TensorT<T>& in) {
  detail::require(in.rank() == 4, "maxpool2: input must be 4D");
  const std::size_t N = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
  detail::require(H % 2 == 0 && W % 2 == 0,
                  "maxpool2: odd spatial dims " + shape_str(in.shape));
  TensorT<T> out({N, C, H / 2, W / 2});
  std::vector<std::uint8_t> argmax(out.numel());

  std::size_t o = 0;
  for (std::size_t nc = 0; nc < N * C; ++nc) {
    const T* plane = in.data.data() + nc * H * W;
    for (std::size_t oy = 0; oy < H / 2; ++oy) {
      const T* r0 = plane + (2 * oy) * W;
      const T* r1 = r0 + W;
      for (std::size_t ox = 0; ox < W / 2; ++ox, ++o) {
        const T v[4] = {r0[2 * ox], r0[2 * ox + 1], r1[2 * ox], r1[2 * ox + 1]};
        int best = 0;
        for (int k = 1; k < 4; ++k)
          if (v[k] > v[best]) best = k;
        out.data[o] = v[best];
        argmax[o] = static_cast<std::uint8_t>(best);
      }
    }
  }
  return {std::move(out), std::move(argmax)};
}

template <typename T>
TensorT<T> maxpool2_bwd(const TensorT<T>& grad_out, const std::vector<std::uint8_t>& argmax) {
  detail::require(grad_out.rank() == 4, "maxpool2_bwd: grad must be 4D");
  detail::require(argmax.size() == grad_out.numel(), "maxpool2_bwd: argmax size mismatch");
  const std::size_t N = grad_out.dim(0), C = grad_out.dim(1);
  const std::size_t Ho = grad_out.dim(2), Wo = grad_out.dim(3);
  TensorT<T> gin({N, C, Ho * 2, Wo * 2});

  std::size_t o = 0;
  for (std::size_t nc = 0; nc < N * C; ++nc) {
    T* plane = gin.data.data() + nc * (Ho * 2) * (Wo * 2);
    for (std::size_t oy = 0; oy < Ho; ++oy) {
      for (std::size_t ox = 0; ox < Wo; ++ox, ++o) {
        const int k = argmax[o];
        const std::size_t y = 2 * oy + static_cast<std::size_t>(k / 2);
        const std::size_t x = 2 * ox + static_cast<std::size_t>(k % 2);
        plane[y * (Wo * 2) + x] += grad_out.data[o];
      }
    }
  }
  return gin;
}

// ---------------------------------------------------------------------------
// upsample2: nearest neighbor, each input pixel replicated into a 2x2 block.
// ---------------------------------------------------------------------------

template <typename T>
TensorT<T> upsample2_fwd(const TensorT<T>& in) {
  detail::require(in.rank() == 4, "upsample2: input must be 4D");
  const std::size_t N = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
  TensorT<T> out({N, C, H * 2, W * 2});
  for (std::size_t nc = 0; nc < N * C; ++nc) {
    const T* ip = in.data.data() + nc * H * W;
    T* op = out.data.data() + nc * (H * 2) * (W * 2);
    for (std::size_t y = 0; y < H * 2; ++y) {
      const T* src = ip + (y / 2) * W;
      T* dst = op + y * (W * 2);
      for (std::size_t x = 0; x < W * 2; ++x) dst[x] = src[x / 2];
    }
  }
  return out;
}

template <typename T>
TensorT<T> upsample2_bwd(const TensorT<T>& grad_out) {
  detail::require(grad_out.rank() == 4, "upsample2_bwd: grad must be 4D");
  const std::size_t N = grad_out.dim(0), C = grad_out.dim(1);
  const std::size_t Ho = grad_out.dim(2), Wo = grad_out.dim(3);
  detail::require(Ho % 2 == 0 && Wo % 2 == 0, "upsample2_bwd: odd grad dims");
  TensorT<T> gin({N, C, Ho / 2, Wo / 2});
  for (std::size_t nc = 0; nc < N * C; ++nc) {
    const T* gp = grad_out.data.data() + nc * Ho * Wo;
    T* ip = gin.data.data() + nc * (Ho / 2) * (Wo / 2);
    for (std::size_t y = 0; y < Ho; ++y) {
      const T* src = gp + y * Wo;
      T* dst = ip + (y / 2) * (Wo / 2);
      for (std::size_t x = 0; x < Wo; ++x) dst[x / 2] += src[x];
    }
  }
  return gin;
}

// ---------------------------------------------------------------------------
// activations
// ---------------------------------------------------------------------------

template <typename T>
TensorT<T> relu_fwd(const TensorT<T>& in) {
  TensorT<T> out = in;
  out.grad.clear();
  for (auto& v : out.data)
    if (v < T(0)) v = T(0);
  return out;
}

/// Gradient passes where the saved input is > 0; the subgradient at 0 is 0.
template <typename T>
TensorT<T> relu_bwd(const TensorT<T>& grad_out, const TensorT<T>& saved_in) {
  detail::require(grad_out.shape == saved_in.shape, "relu_bwd: shape mismatch");
  TensorT<T> gin(grad_out.shape);
  for (std::size_t i = 0; i < gin.numel(); ++i)
    gin.data[i] = saved_in.data[i] > T(0) ? grad_out.data[i] : T(0);
  return gin;
}

template <typename T>
TensorT<T> sigmoid_fwd(const TensorT<T>& in) {
  TensorT<T> out(in.shape);
  for (std::size_t i = 0; i < in.numel(); ++i) {
    const T x = in.data[i];
    if (x >= T(0)) {
      out.data[i] = T(1) / (T(1) + std::exp(-x));
    } else {
      const T e = std::exp(x);
      out.data[i] = e / (T(1) + e);
    }
  }
  return out;
}

template <typename T>
TensorT<T> sigmoid_bwd(const TensorT<T>& grad_out, const TensorT<T>& saved_out) {
  detail::require(grad_out.shape == saved_out.shape, "sigmoid_bwd: shape mismatch");
  TensorT<T> gin(grad_out.shape);
  for (std::size_t i = 0; i < gin.numel(); ++i) {
    const T s = saved_out.data[i];
    gin.data[i] = grad_out.data[i] * s * (T(1) - s);
  }
  return gin;
}

// ---------------------------------------------------------------------------
// fully connected: input [N,F], weight [O,F], bias [O] -> [N,O]
// ---------------------------------------------------------------------------

template <typename T>
TensorT<T> fc_fwd(const TensorT<T>& in, const TensorT<T>& w, const TensorT<T>& b) {
  detail::require(in.rank() == 2, "fc: input must be 2D, got " + shape_str(in.shape));
  detail::require(w.rank() == 2 && w.dim(1) == in.dim(1),
                  "fc: weight " + shape_str(w.shape) + " does not match input " +
                      shape_str(in.shape));
  detail::require(b.rank() == 1 && b.dim(0) == w.dim(0), "fc: bias mismatch");
  const std::size_t N = in.dim(0), F = in.dim(1), O = w.dim(0);
  TensorT<T> out({N, O});
  for (std::size_t n = 0; n < N; ++n) {
    const T* x = in.data.data() + n * F;
    for (std::size_t o = 0; o < O; ++o) {
      const T* wr = w.data.data() + o * F;
      T a0 = 0, a1 = 0, a2 = 0, a3 = 0;
      std::size_t f = 0;
      for (; f + 4 <= F; f += 4) {
        a0 += wr[f] * x[f];
        a1 += wr[f + 1] * x[f + 1];
        a2 += wr[f + 2] * x[f + 2];
        a3 += wr[f + 3] * x[f + 3];
      }
      for (; f < F; ++f) a0 += wr[f] * x[f];
      out.data[n * O + o] = b.data[o] + (a0 + a1) + (a2 + a3);
    }
  }
  return out;
}

template <typename T>
struct FcGrads {
  TensorT<T> input;
  TensorT<T> weight;
  TensorT<T> bias;
};

template <typename T>
FcGrads<T> fc_bwd(const TensorT<T>& grad_out, const TensorT<T>& in, const TensorT<T>& w,
                  bool need_input_grad = true) {
  const std::size_t N = in.dim(0), F = in.dim(1), O = w.dim(0);
  detail::require(grad_out.shape == std::vector<std::size_t>({N, O}),
                  "fc_bwd: grad shape mismatch");
  FcGrads<T> g;
  g.weight = TensorT<T>({O, F});
  g.bias = TensorT<T>({O});
  for (std::size_t n = 0; n < N; ++n) {
    const T* go = grad_out.data.data() + n * O;
    const T* x = in.data.data() + n * F;
    for (std::size_t o = 0; o < O; ++o) {
      const T gv = go[o];
      g.bias.data[o] += gv;
      T* gw = g.weight.data.data() + o * F;
      for (std::size_t f = 0; f < F; ++f) gw[f] += gv * x[f];
    }
  }
  if (need_input_grad) {
    g.input = TensorT<T>({N, F});
    for (std::size_t n = 0; n < N; ++n) {
      const T* go = grad_out.data.data() + n * O;
      T* gx = g.input.data.data() + n * F;
      for (std::size_t o = 0; o < O; ++o) {
        const T gv = go[o];
        const T* wr = w.data.data() + o * F;
        for (std::size_t f = 0; f < F; ++f) gx[f] += gv * wr[f];
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// losses: scalar value plus gradient of the mean w.r.t. predictions
// ---------------------------------------------------------------------------

template <typename T>
struct LossResult {
  double value = 0.0;
  TensorT<T> grad;
};

inline constexpr double kBceClamp = 1e-7;

/// Binary cross-entropy, -mean(t log p + (1-t) log(1-p)), natural log.
/// Predictions are clamped to [1e-7, 1-1e-7] to survive saturated sigmoids.
template <typename T>
LossResult<T> bce_loss(const TensorT<T>& pred, const TensorT<T>& target) {
  detail::require(pred.shape == target.shape, "bce_loss: shape mismatch");
  detail::require(pred.numel() > 0, "bce_loss: empty input");
  LossResult<T> r;
  r.grad = TensorT<T>(pred.shape);
  const double n = static_cast<double>(pred.numel());
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    double p = static_cast<double>(pred.data[i]);
    if (p < kBceClamp) p = kBceClamp;
    if (p > 1.0 - kBceClamp) p = 1.0 - kBceClamp;
    const double t = static_cast<double>(target.data[i]);
    sum += t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
    r.grad.data[i] = static_cast<T>((p - t) / (p * (1.0 - p)) / n);
  }
  r.value = -sum / n;
  return r;
}

template <typename T>
LossResult<T> mse_loss(const TensorT<T>& pred, const TensorT<T>& target) {
  detail::require(pred.shape == target.shape, "mse_loss: shape mismatch");
  detail::require(pred.numel() > 0, "mse_loss: empty input");
  LossResult<T> r;
  r.grad = TensorT<T>(pred.shape);
  const double n = static_cast<double>(pred.numel());
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    const double d = static_cast<double>(pred.data[i]) - static_cast<double>(target.data[i]);
    sum += d * d;
    r.grad.data[i] = static_cast<T>(2.0 * d / n);
  }
  r.value = sum / n;
  return r;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

template <typename T>
struct AdamState {
  std::vector<T> m;
  std::vector<T> v;
  std::uint64_t t = 0;
};

/// One Adam update with bias correction. Moment buffers are sized lazily on
/// the first call; the step counter lives in the state.
template <typename T>
void adam_step(std::span<T> params, std::span<const T> grads, AdamState<T>& state,
               double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
  detail::require(params.size() == grads.size(), "adam_step: param/grad size mismatch");
  if (state.m.empty()) {
    state.m.assign(params.size(), T(0));
    state.v.assign(params.size(), T(0));
  }
  detail::require(state.m.size() == params.size(), "adam_step: state size mismatch");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = static_cast<double>(grads[i]);
    const double m = beta1 * static_cast<double>(state.m[i]) + (1.0 - beta1) * g;
    const double v = beta2 * static_cast<double>(state.v[i]) + (1.0 - beta2) * g * g;
    state.m[i] = static_cast<T>(m);
    state.v[i] = static_cast<T>(v);
    const double update = lr * (m / bc1) / (std::sqrt(v / bc2) + eps);
    params[i] = static_cast<T>(static_cast<double>(params[i]) - update);
  }
}

}  // namespace evlab::ops
