/* Copyright 2026 The DSTN Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include "dstn/ops.hpp"

#include <Eigen/Core>

#include <cmath>
#include <string>

namespace dstn::ops {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

// dst = a * b, or dst += a * b. Eigen dispatches vector-shaped and very small
// products to kernels whose summation order follows pointer alignment, so
// those go through a fixed-order loop; the blocked GEMM path is
// layout-independent.
template <typename A, typename B, typename D>
void matmul(const A& a, const B& b, D&& dst, bool accumulate) {
  const int64_t rows = a.rows(), cols = b.cols(), depth = a.cols();
  if (rows == 1 || cols == 1 || rows + cols + depth < 32) {
    for (int64_t i = 0; i < rows; ++i) {
      for (int64_t j = 0; j < cols; ++j) {
        double acc = 0.0;
        for (int64_t k = 0; k < depth; ++k) acc += double(a(i, k)) * double(b(k, j));
        dst(i, j) = static_cast<float>(accumulate ? dst(i, j) + acc : acc);
      }
    }
    return;
  }
  if (accumulate) {
    dst.noalias() += a * b;
  } else {
    dst.noalias() = a * b;
  }
}

template <typename V>
double ordered_sum(const V& v) {
  double s = 0.0;
  for (int64_t i = 0; i < v.size(); ++i) s += v(i);
  return s;
}

void require_rank(const Var& x, size_t rank, const char* op) {
  if (x.value().rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " +
                     std::to_string(rank) + ", got " +
                     shape_string(x.shape()));
  }
}

// cols[(c*k + ki)*k + kj][oh*out_w + ow] = img[c][oh*s - p + ki][ow*s - p + kj]
void im2col(const float* img, int64_t channels, int64_t height, int64_t width,
            int kernel, int stride, int padding, int64_t out_h, int64_t out_w,
            float* cols) {
  for (int64_t c = 0; c < channels; ++c) {
    const float* plane = img + c * height * width;
    for (int ki = 0; ki < kernel; ++ki) {
      for (int kj = 0; kj < kernel; ++kj) {
        float* row = cols + ((c * kernel + ki) * kernel + kj) * out_h * out_w;
        for (int64_t oh = 0; oh < out_h; ++oh) {
          const int64_t ih = oh * stride - padding + ki;
          float* dst = row + oh * out_w;
          if (ih < 0 || ih >= height) {
            std::fill(dst, dst + out_w, 0.0f);
            continue;
          }
          const float* src = plane + ih * width;
          for (int64_t ow = 0; ow < out_w; ++ow) {
            const int64_t iw = ow * stride - padding + kj;
            dst[ow] = (iw >= 0 && iw < width) ? src[iw] : 0.0f;
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-add columns back into the image.
void col2im(const float* cols, int64_t channels, int64_t height, int64_t width,
            int kernel, int stride, int padding, int64_t out_h, int64_t out_w,
            float* img) {
  for (int64_t c = 0; c < channels; ++c) {
    float* plane = img + c * height * width;
    for (int ki = 0; ki < kernel; ++ki) {
      for (int kj = 0; kj < kernel; ++kj) {
        const float* row =
            cols + ((c * kernel + ki) * kernel + kj) * out_h * out_w;
        for (int64_t oh = 0; oh < out_h; ++oh) {
          const int64_t ih = oh * stride - padding + ki;
          if (ih < 0 || ih >= height) continue;
          const float* src = row + oh * out_w;
          float* dst = plane + ih * width;
          for (int64_t ow = 0; ow < out_w; ++ow) {
            const int64_t iw = ow * stride - padding + kj;
            if (iw >= 0 && iw < width) dst[iw] += src[ow];
          }
        }
      }
    }
  }
}

template <typename Fn>
Var unary(const Var& x, Fn&& forward_fn, BackwardFn backward) {
  Tensor out(x.shape());
  const float* in = x.value().data();
  float* o = out.data();
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) o[i] = forward_fn(in[i]);
  return make_result(std::move(out), {x}, std::move(backward));
}

}  // namespace

Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride,
           int padding) {
  require_rank(x, 4, "conv2d");
  require_rank(weight, 4, "conv2d weight");
  const int64_t batch = x.shape()[0], channels = x.shape()[1];
  const int64_t height = x.shape()[2], width = x.shape()[3];
  const int64_t out_c = weight.shape()[0];
  const int kernel = static_cast<int>(weight.shape()[2]);
  if (weight.shape()[1] != channels || weight.shape()[3] != kernel) {
    throw ShapeError("conv2d: weight " + shape_string(weight.shape()) +
                     " incompatible with input " + shape_string(x.shape()));
  }
  const int64_t out_h = conv_out_size(height, kernel, stride, padding);
  const int64_t out_w = conv_out_size(width, kernel, stride, padding);
  if (out_h <= 0 || out_w <= 0) {
    throw ShapeError("conv2d: input " + shape_string(x.shape()) +
                     " smaller than kernel " + std::to_string(kernel));
  }
  const int64_t ckk = channels * kernel * kernel;
  const int64_t spatial = out_h * out_w;

  Tensor out({batch, out_c, out_h, out_w});
  std::vector<float> cols(static_cast<size_t>(ckk * spatial));
  ConstMatMap w(weight.value().data(), out_c, ckk);
  for (int64_t n = 0; n < batch; ++n) {
    im2col(x.value().data() + n * channels * height * width, channels, height,
           width, kernel, stride, padding, out_h, out_w, cols.data());
    MatMap o(out.data() + n * out_c * spatial, out_c, spatial);
    matmul(w, ConstMatMap(cols.data(), ckk, spatial), o, false);
    if (bias.defined()) {
      for (int64_t c = 0; c < out_c; ++c) o.row(c).array() += bias.value()[c];
    }
  }

  return make_result(
      std::move(out), {x, weight, bias.defined() ? bias : Var()},
      [=](Node& self) {
        Node& xn = *self.inputs[0];
        Node& wn = *self.inputs[1];
        Node* bn = self.inputs[2] ? self.inputs[2].get() : nullptr;
        std::vector<float> col(static_cast<size_t>(ckk * spatial));
        std::vector<float> dcol(static_cast<size_t>(ckk * spatial));
        ConstMatMap wm(wn.value.data(), out_c, ckk);
        for (int64_t n = 0; n < batch; ++n) {
          ConstMatMap g(self.grad.data() + n * out_c * spatial, out_c, spatial);
          const float* xin = xn.value.data() + n * channels * height * width;
          if (wn.requires_grad) {
            im2col(xin, channels, height, width, kernel, stride, padding,
                   out_h, out_w, col.data());
            MatMap dw(wn.grad_buffer().data(), out_c, ckk);
            matmul(g, ConstMatMap(col.data(), ckk, spatial).transpose(), dw, true);
          }
          if (bn && bn->requires_grad) {
            float* db = bn->grad_buffer().data();
            for (int64_t c = 0; c < out_c; ++c) db[c] += static_cast<float>(ordered_sum(g.row(c)));
          }
          if (xn.requires_grad) {
            MatMap dc(dcol.data(), ckk, spatial);
            matmul(wm.transpose(), g, dc, false);
            col2im(dcol.data(), channels, height, width, kernel, stride,
                   padding, out_h, out_w,
                   xn.grad_buffer().data() + n * channels * height * width);
          }
        }
      });
}

Var conv_transpose2d(const Var& x, const Var& weight, const Var& bias,
                     int stride, int padding, int output_padding) {
  require_rank(x, 4, "conv_transpose2d");
  require_rank(weight, 4, "conv_transpose2d weight");
  const int64_t batch = x.shape()[0], in_c = x.shape()[1];
  const int64_t height = x.shape()[2], width = x.shape()[3];
  const int64_t out_c = weight.shape()[1];
  const int kernel = static_cast<int>(weight.shape()[2]);
  if (weight.shape()[0] != in_c || weight.shape()[3] != kernel) {
    throw ShapeError("conv_transpose2d: weight " +
                     shape_string(weight.shape()) + " incompatible with input " +
                     shape_string(x.shape()));
  }
  if (output_padding >= stride && output_padding > 0) {
    throw ShapeError("conv_transpose2d: output_padding must be < stride");
  }
  const int64_t out_h = (height - 1) * stride - 2 * padding + kernel + output_padding;
  const int64_t out_w = (width - 1) * stride - 2 * padding + kernel + output_padding;
  if (out_h <= 0 || out_w <= 0) {
    throw ShapeError("conv_transpose2d: empty output for input " +
                     shape_string(x.shape()));
  }
  const int64_t okk = out_c * kernel * kernel;
  const int64_t spatial = height * width;

  Tensor out({batch, out_c, out_h, out_w});
  std::vector<float> cols(static_cast<size_t>(okk * spatial));
  ConstMatMap w(weight.value().data(), in_c, okk);
  for (int64_t n = 0; n < batch; ++n) {
    MatMap c(cols.data(), okk, spatial);
    matmul(w.transpose(),
           ConstMatMap(x.value().data() + n * in_c * spatial, in_c, spatial), c, false);
    float* o = out.data() + n * out_c * out_h * out_w;
    col2im(cols.data(), out_c, out_h, out_w, kernel, stride, padding, height,
           width, o);
    if (bias.defined()) {
      for (int64_t ch = 0; ch < out_c; ++ch) {
        const float b = bias.value()[ch];
        float* plane = o + ch * out_h * out_w;
        for (int64_t i = 0; i < out_h * out_w; ++i) plane[i] += b;
      }
    }
  }

  return make_result(
      std::move(out), {x, weight, bias.defined() ? bias : Var()},
      [=](Node& self) {
        Node& xn = *self.inputs[0];
        Node& wn = *self.inputs[1];
        Node* bn = self.inputs[2] ? self.inputs[2].get() : nullptr;
        std::vector<float> gcol(static_cast<size_t>(okk * spatial));
        ConstMatMap wm(wn.value.data(), in_c, okk);
        for (int64_t n = 0; n < batch; ++n) {
          const float* g = self.grad.data() + n * out_c * out_h * out_w;
          im2col(g, out_c, out_h, out_w, kernel, stride, padding, height,
                 width, gcol.data());
          ConstMatMap gc(gcol.data(), okk, spatial);
          if (wn.requires_grad) {
            MatMap dw(wn.grad_buffer().data(), in_c, okk);
            matmul(ConstMatMap(xn.value.data() + n * in_c * spatial, in_c, spatial),
                   gc.transpose(), dw, true);
          }
          if (xn.requires_grad) {
            MatMap dx(xn.grad_buffer().data() + n * in_c * spatial, in_c, spatial);
            matmul(wm, gc, dx, true);
          }
          if (bn && bn->requires_grad) {
            float* db = bn->grad_buffer().data();
            for (int64_t ch = 0; ch < out_c; ++ch) {
              const float* plane = g + ch * out_h * out_w;
              double s = 0.0;
              for (int64_t i = 0; i < out_h * out_w; ++i) s += plane[i];
              db[ch] += static_cast<float>(s);
            }
          }
        }
      });
}

Var reflection_pad2d(const Var& x, int pad) {
  require_rank(x, 4, "reflection_pad2d");
  const int64_t batch = x.shape()[0], channels = x.shape()[1];
  const int64_t height = x.shape()[2], width = x.shape()[3];
  if (pad >= height || pad >= width) {
    throw ShapeError("reflection_pad2d: pad " + std::to_string(pad) +
                     " too large for " + shape_string(x.shape()));
  }
  const int64_t out_h = height + 2 * pad, out_w = width + 2 * pad;
  auto reflect = [](int64_t i, int64_t n) {
    if (i < 0) return -i;
    if (i >= n) return 2 * n - 2 - i;
    return i;
  };
  std::vector<int64_t> row_src(static_cast<size_t>(out_h));
  std::vector<int64_t> col_src(static_cast<size_t>(out_w));
  for (int64_t h = 0; h < out_h; ++h) row_src[h] = reflect(h - pad, height);
  for (int64_t w = 0; w < out_w; ++w) col_src[w] = reflect(w - pad, width);

  Tensor out({batch, channels, out_h, out_w});
  const float* in = x.value().data();
  float* o = out.data();
  for (int64_t p = 0; p < batch * channels; ++p) {
    const float* src = in + p * height * width;
    float* dst = o + p * out_h * out_w;
    for (int64_t h = 0; h < out_h; ++h) {
      const float* srow = src + row_src[h] * width;
      for (int64_t w = 0; w < out_w; ++w) dst[h * out_w + w] = srow[col_src[w]];
    }
  }
  return make_result(std::move(out), {x}, [=](Node& self) {
    Node& xn = *self.inputs[0];
    float* dx = xn.grad_buffer().data();
    const float* g = self.grad.data();
    for (int64_t p = 0; p < batch * channels; ++p) {
      float* dst = dx + p * height * width;
      const float* src = g + p * out_h * out_w;
      for (int64_t h = 0; h < out_h; ++h) {
        float* drow = dst + row_src[h] * width;
        for (int64_t w = 0; w < out_w; ++w) drow[col_src[w]] += src[h * out_w + w];
      }
    }
  });
}

namespace {

// Zero-mean, unit-variance groups: (n, c) planes when per_sample, otherwise
// channel c across the whole batch.
Var normalize(const Var& x, float eps, bool per_sample) {
  require_rank(x, 4, per_sample ? "instance_norm" : "batch_norm");
  const int64_t batch = x.shape()[0], channels = x.shape()[1];
  const int64_t plane = x.shape()[2] * x.shape()[3];
  const int64_t groups = per_sample ? batch * channels : channels;
  const int64_t per_group = per_sample ? plane : batch * plane;

  // Visits every (flat offset) of group g as contiguous plane runs.
  auto for_each_plane = [=](int64_t g, auto&& fn) {
    if (per_sample) {
      fn(g * plane);
    } else {
      for (int64_t n = 0; n < batch; ++n) fn((n * channels + g) * plane);
    }
  };

  Tensor out(x.shape());
  std::vector<float> inv_std(static_cast<size_t>(groups));
  const float* in = x.value().data();
  float* o = out.data();
  for (int64_t g = 0; g < groups; ++g) {
    double sum = 0.0;
    for_each_plane(g, [&](int64_t off) {
      for (int64_t i = 0; i < plane; ++i) sum += in[off + i];
    });
    const double mean = sum / static_cast<double>(per_group);
    double sq = 0.0;
    for_each_plane(g, [&](int64_t off) {
      for (int64_t i = 0; i < plane; ++i) {
        const double d = in[off + i] - mean;
        sq += d * d;
      }
    });
    const double var = sq / static_cast<double>(per_group);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[g] = static_cast<float>(is);
    for_each_plane(g, [&](int64_t off) {
      for (int64_t i = 0; i < plane; ++i) {
        o[off + i] = static_cast<float>((in[off + i] - mean) * is);
      }
    });
  }

  return make_result(std::move(out), {x}, [=](Node& self) {
      Node& xn = *self.inputs[0];
      const float* y = self.value.data();
      const float* g = self.grad.data();
      float* dx = xn.grad_buffer().data();
      for (int64_t grp = 0; grp < groups; ++grp) {
        double mean_g = 0.0, mean_gy = 0.0;
        for_each_plane(grp, [&](int64_t off) {
          for (int64_t i = 0; i < plane; ++i) {
            mean_g += g[off + i];
            mean_gy += static_cast<double>(g[off + i]) * y[off + i];
          }
        });
        mean_g /= static_cast<double>(per_group);
        mean_gy /= static_cast<double>(per_group);
        const double is = inv_std[grp];
        for_each_plane(grp, [&](int64_t off) {
          for (int64_t i = 0; i < plane; ++i) {
            dx[off + i] += static_cast<float>(
                is * (g[off + i] - mean_g - y[off + i] * mean_gy));
          }
        });
      }
  });
}

}  // namespace

Var instance_norm(const Var& x, float eps) { return normalize(x, eps, true); }
Var batch_norm(const Var& x, float eps) { return normalize(x, eps, false); }

Var relu(const Var& x) {
  return unary(x, [](float v) { return v < 0.0f ? 0.0f : v; }, [](Node& self) {
    Node& xn = *self.inputs[0];
    const float* in = xn.value.data();
    const float* g = self.grad.data();
    float* dx = xn.grad_buffer().data();
    for (int64_t i = 0; i < self.grad.numel(); ++i) {
      if (in[i] > 0.0f) dx[i] += g[i];
    }
  });
}

Var leaky_relu(const Var& x, float slope) {
  return unary(
      x, [slope](float v) { return v < 0.0f ? slope * v : v; },
      [slope](Node& self) {
        Node& xn = *self.inputs[0];
        const float* in = xn.value.data();
        const float* g = self.grad.data();
        float* dx = xn.grad_buffer().data();
        for (int64_t i = 0; i < self.grad.numel(); ++i) {
          dx[i] += in[i] > 0.0f ? g[i] : slope * g[i];
        }
      });
}

Var tanh(const Var& x) {
  return unary(x, [](float v) { return std::tanh(v); }, [](Node& self) {
    Node& xn = *self.inputs[0];
    const float* y = self.value.data();
    const float* g = self.grad.data();
    float* dx = xn.grad_buffer().data();
    for (int64_t i = 0; i < self.grad.numel(); ++i) {
      dx[i] += g[i] * (1.0f - y[i] * y[i]);
    }
  });
}

Var sigmoid(const Var& x) {
  return unary(
      x, [](float v) { return 1.0f / (1.0f + std::exp(-v)); },
      [](Node& self) {
        Node& xn = *self.inputs[0];
        const float* y = self.value.data();
        const float* g = self.grad.data();
        float* dx = xn.grad_buffer().data();
        for (int64_t i = 0; i < self.grad.numel(); ++i) {
          dx[i] += g[i] * y[i] * (1.0f - y[i]);
        }
      });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor out(a.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] + b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    for (auto& in : self.inputs) {
      if (!in->requires_grad) continue;
      float* d = in->grad_buffer().data();
      for (int64_t i = 0; i < self.grad.numel(); ++i) d[i] += self.grad[i];
    }
  });
}

Var max_pool2d(const Var& x) {
  require_rank(x, 4, "max_pool2d");
  const int64_t batch = x.shape()[0], channels = x.shape()[1];
  const int64_t height = x.shape()[2], width = x.shape()[3];
  const int64_t out_h = height / 2, out_w = width / 2;
  if (out_h == 0 || out_w == 0) {
    throw ShapeError("max_pool2d: input too small " + shape_string(x.shape()));
  }
  Tensor out({batch, channels, out_h, out_w});
  std::vector<int64_t> argmax(static_cast<size_t>(out.numel()));
  const float* in = x.value().data();
  for (int64_t p = 0; p < batch * channels; ++p) {
    const float* src = in + p * height * width;
    for (int64_t h = 0; h < out_h; ++h) {
      for (int64_t w = 0; w < out_w; ++w) {
        int64_t best = (2 * h) * width + 2 * w;
        for (int64_t dh = 0; dh < 2; ++dh) {
          for (int64_t dw = 0; dw < 2; ++dw) {
            const int64_t idx = (2 * h + dh) * width + 2 * w + dw;
            if (src[idx] > src[best]) best = idx;
          }
        }
        const int64_t o = (p * out_h + h) * out_w + w;
        out[o] = src[best];
        argmax[o] = p * height * width + best;
      }
    }
  }
  return make_result(std::move(out), {x}, [argmax = std::move(argmax)](Node& self) {
    float* dx = self.inputs[0]->grad_buffer().data();
    for (size_t i = 0; i < argmax.size(); ++i) dx[argmax[i]] += self.grad[i];
  });
}

Var global_avg_pool(const Var& x) {
  require_rank(x, 4, "global_avg_pool");
  const int64_t batch = x.shape()[0], channels = x.shape()[1];
  const int64_t plane = x.shape()[2] * x.shape()[3];
  Tensor out({batch, channels});
  for (int64_t p = 0; p < batch * channels; ++p) {
    double s = 0.0;
    const float* src = x.value().data() + p * plane;
    for (int64_t i = 0; i < plane; ++i) s += src[i];
    out[p] = static_cast<float>(s / static_cast<double>(plane));
  }
  return make_result(std::move(out), {x}, [=](Node& self) {
    float* dx = self.inputs[0]->grad_buffer().data();
    for (int64_t p = 0; p < batch * channels; ++p) {
      const float g = self.grad[p] / static_cast<float>(plane);
      for (int64_t i = 0; i < plane; ++i) dx[p * plane + i] += g;
    }
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  require_rank(x, 2, "linear");
  require_rank(weight, 2, "linear weight");
  const int64_t batch = x.shape()[0], in_dim = x.shape()[1];
  const int64_t out_dim = weight.shape()[0];
  if (weight.shape()[1] != in_dim) {
    throw ShapeError("linear: weight " + shape_string(weight.shape()) +
                     " incompatible with input " + shape_string(x.shape()));
  }
  Tensor out({batch, out_dim});
  MatMap o(out.data(), batch, out_dim);
  matmul(ConstMatMap(x.value().data(), batch, in_dim),
         ConstMatMap(weight.value().data(), out_dim, in_dim).transpose(), o, false);
  if (bias.defined()) {
    for (int64_t n = 0; n < batch; ++n) {
      for (int64_t k = 0; k < out_dim; ++k) o(n, k) += bias.value()[k];
    }
  }
  return make_result(
      std::move(out), {x, weight, bias.defined() ? bias : Var()},
      [=](Node& self) {
        Node& xn = *self.inputs[0];
        Node& wn = *self.inputs[1];
        Node* bn = self.inputs[2] ? self.inputs[2].get() : nullptr;
        ConstMatMap g(self.grad.data(), batch, out_dim);
        if (xn.requires_grad) {
          MatMap dx(xn.grad_buffer().data(), batch, in_dim);
          matmul(g, ConstMatMap(wn.value.data(), out_dim, in_dim), dx, true);
        }
        if (wn.requires_grad) {
          MatMap dw(wn.grad_buffer().data(), out_dim, in_dim);
          matmul(g.transpose(), ConstMatMap(xn.value.data(), batch, in_dim), dw, true);
        }
        if (bn && bn->requires_grad) {
          float* db = bn->grad_buffer().data();
          for (int64_t k = 0; k < out_dim; ++k) db[k] += static_cast<float>(ordered_sum(g.col(k)));
        }
      });
}

Var channel_affine(const Var& x, std::span<const float> scale,
                   std::span<const float> shift) {
  require_rank(x, 4, "channel_affine");
  const int64_t batch = x.shape()[0], channels = x.shape()[1];
  const int64_t plane = x.shape()[2] * x.shape()[3];
  if (static_cast<int64_t>(scale.size()) != channels ||
      static_cast<int64_t>(shift.size()) != channels) {
    throw ShapeError("channel_affine: expected " + std::to_string(channels) +
                     " channel coefficients");
  }
  std::vector<float> sc(scale.begin(), scale.end());
  Tensor out(x.shape());
  for (int64_t n = 0; n < batch; ++n) {
    for (int64_t c = 0; c < channels; ++c) {
      const int64_t off = (n * channels + c) * plane;
      for (int64_t i = 0; i < plane; ++i) {
        out[off + i] = x.value()[off + i] * scale[c] + shift[c];
      }
    }
  }
  return make_result(std::move(out), {x}, [=](Node& self) {
    float* dx = self.inputs[0]->grad_buffer().data();
    for (int64_t n = 0; n < batch; ++n) {
      for (int64_t c = 0; c < channels; ++c) {
        const int64_t off = (n * channels + c) * plane;
        for (int64_t i = 0; i < plane; ++i) dx[off + i] += self.grad[off + i] * sc[c];
      }
    }
  });
}

Var cross_entropy(const Var& logits, std::span<const int> labels) {
  require_rank(logits, 2, "cross_entropy");
  const int64_t batch = logits.shape()[0], classes = logits.shape()[1];
  if (static_cast<int64_t>(labels.size()) != batch) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) +
                     " labels for batch of " + std::to_string(batch));
  }
  Tensor probs({batch, classes});
  double loss = 0.0;
  for (int64_t n = 0; n < batch; ++n) {
    const float* z = logits.value().data() + n * classes;
    const int label = labels[n];
    if (label < 0 || label >= classes) {
      throw ShapeError("cross_entropy: label " + std::to_string(label) +
                       " out of range");
    }
    const float zmax = *std::max_element(z, z + classes);
    double denom = 0.0;
    for (int64_t k = 0; k < classes; ++k) denom += std::exp(double(z[k]) - zmax);
    for (int64_t k = 0; k < classes; ++k) {
      probs[n * classes + k] = static_cast<float>(std::exp(double(z[k]) - zmax) / denom);
    }
    loss -= (double(z[label]) - zmax) - std::log(denom);
  }
  std::vector<int> lab(labels.begin(), labels.end());
  Tensor value({1}, static_cast<float>(loss / static_cast<double>(batch)));
  return make_result(std::move(value), {logits},
                     [=, probs = std::move(probs)](Node& self) {
                       float* dz = self.inputs[0]->grad_buffer().data();
                       const float g = self.grad[0] / static_cast<float>(batch);
                       for (int64_t n = 0; n < batch; ++n) {
                         for (int64_t k = 0; k < classes; ++k) {
                           const float onehot = (k == lab[n]) ? 1.0f : 0.0f;
                           dz[n * classes + k] += g * (probs[n * classes + k] - onehot);
                         }
                       }
                     });
}

Var weighted_sum(std::span<const Var> scalars, std::span<const double> weights) {
  if (scalars.size() != weights.size()) {
    throw ShapeError("weighted_sum: scalar/weight count mismatch");
  }
  double total = 0.0;
  for (size_t i = 0; i < scalars.size(); ++i) {
    if (scalars[i].value().numel() != 1) {
      throw ShapeError("weighted_sum: non-scalar term");
    }
    total += weights[i] * static_cast<double>(scalars[i].value()[0]);
  }
  std::vector<double> w(weights.begin(), weights.end());
  return make_result(Tensor({1}, static_cast<float>(total)),
                     std::vector<Var>(scalars.begin(), scalars.end()),
                     [w = std::move(w)](Node& self) {
                       for (size_t i = 0; i < self.inputs.size(); ++i) {
                         if (!self.inputs[i]->requires_grad) continue;
                         self.inputs[i]->grad_buffer()[0] +=
                             static_cast<float>(w[i] * self.grad[0]);
                       }
                     });
}

}  // namespace dstn::ops
