#include "ssa/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Core>

#include "ssa/errors.hpp"
#include "ssa/parallel.hpp"

namespace ssa {

namespace {

std::string dims(const Shape5& s) { return s.str(); }

struct ConvPlan {
  std::size_t n, in_c, frames, in_h, in_w;
  std::size_t out_c, out_h, out_w;
  std::size_t groups, group_in, group_out;
  std::size_t k, stride, pad;
  std::size_t patch;      // group_in * k * k
  std::size_t positions;  // frames * out_h * out_w
  bool pointwise;

  ConvPlan(const Shape5& x, const Shape5& wt, const Conv2dGeometry& g) {
    const Shape5 out = conv2d_output_shape(x, wt, g);
    n = x.n;
    in_c = x.c;
    frames = x.f;
    in_h = x.h;
    in_w = x.w;
    out_c = out.c;
    out_h = out.h;
    out_w = out.w;
    groups = g.groups;
    group_in = in_c / groups;
    group_out = out_c / groups;
    k = wt.h;
    stride = g.stride;
    pad = g.padding;
    patch = group_in * k * k;
    positions = frames * out_h * out_w;
    pointwise = k == 1 && stride == 1 && pad == 0;
  }
};

// Output columns [lo, hi) whose input column ow * stride + kw - pad lies inside the row.
std::pair<std::size_t, std::size_t> valid_columns(const ConvPlan& p, std::size_t kw) {
  std::size_t lo = 0;
  while (lo < p.out_w && lo * p.stride + kw < p.pad) ++lo;
  std::size_t hi = lo;
  while (hi < p.out_w && hi * p.stride + kw < p.pad + p.in_w) ++hi;
  return {lo, hi};
}

// Unfolds the channels of group `g` of sample `n` into a (patch x positions) matrix.
template <typename T>
void im2col(const FeatureMap<T>& x, const ConvPlan& p, std::size_t n, std::size_t g, T* col) {
  for (std::size_t ci = 0; ci < p.group_in; ++ci) {
    const std::size_t channel = g * p.group_in + ci;
    for (std::size_t kh = 0; kh < p.k; ++kh) {
      for (std::size_t kw = 0; kw < p.k; ++kw) {
        const auto [lo, hi] = valid_columns(p, kw);
        T* row = col + ((ci * p.k + kh) * p.k + kw) * p.positions;
        for (std::size_t t = 0; t < p.frames; ++t) {
          const T* plane = x.frame(n, channel, t);
          for (std::size_t oh = 0; oh < p.out_h; ++oh) {
            T* dst = row + (t * p.out_h + oh) * p.out_w;
            const std::size_t ih = oh * p.stride + kh;
            if (ih < p.pad || ih >= p.pad + p.in_h || lo >= hi) {
              std::fill(dst, dst + p.out_w, T(0));
              continue;
            }
            const T* src = plane + (ih - p.pad) * p.in_w + (lo * p.stride + kw - p.pad);
            std::fill(dst, dst + lo, T(0));
            if (p.stride == 1) {
              std::copy(src, src + (hi - lo), dst + lo);
            } else {
              for (std::size_t ow = lo; ow < hi; ++ow) dst[ow] = src[(ow - lo) * p.stride];
            }
            std::fill(dst + hi, dst + p.out_w, T(0));
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters a (patch x positions) matrix back into sample `n`.
template <typename T>
void col2im(const T* col, const ConvPlan& p, std::size_t n, std::size_t g, FeatureMap<T>& gx) {
  for (std::size_t ci = 0; ci < p.group_in; ++ci) {
    const std::size_t channel = g * p.group_in + ci;
    for (std::size_t kh = 0; kh < p.k; ++kh) {
      for (std::size_t kw = 0; kw < p.k; ++kw) {
        const auto [lo, hi] = valid_columns(p, kw);
        if (lo >= hi) continue;
        const T* row = col + ((ci * p.k + kh) * p.k + kw) * p.positions;
        for (std::size_t t = 0; t < p.frames; ++t) {
          T* plane = gx.frame(n, channel, t);
          for (std::size_t oh = 0; oh < p.out_h; ++oh) {
            const std::size_t ih = oh * p.stride + kh;
            if (ih < p.pad || ih >= p.pad + p.in_h) continue;
            const T* src = row + (t * p.out_h + oh) * p.out_w;
            T* dst = plane + (ih - p.pad) * p.in_w + (lo * p.stride + kw - p.pad);
            for (std::size_t ow = lo; ow < hi; ++ow) dst[(ow - lo) * p.stride] += src[ow];
          }
        }
      }
    }
  }
}

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMatrix<T>>;

}  // namespace

Shape5 conv2d_output_shape(const Shape5& x, const Shape5& wt, const Conv2dGeometry& g) {
  if (g.groups == 0 || g.stride == 0) {
    throw DimensionError("conv2d: stride and groups must be positive");
  }
  if (wt.f != 1) {
    throw DimensionError("conv2d: kernel temporal extent must be 1, weight shape " + dims(wt));
  }
  if (wt.h != wt.w || wt.h == 0) {
    throw DimensionError("conv2d: kernel must be square k x k, weight shape " + dims(wt));
  }
  if (x.c % g.groups != 0 || wt.n % g.groups != 0) {
    throw DimensionError("conv2d: groups=" + std::to_string(g.groups) +
                         " must divide c_in=" + std::to_string(x.c) +
                         " and c_out=" + std::to_string(wt.n));
  }
  if (wt.c != x.c / g.groups) {
    throw DimensionError("conv2d: weight " + dims(wt) + " expects " +
                         std::to_string(wt.c * g.groups) + " input channels, input is " + dims(x));
  }
  const std::size_t k = wt.h;
  if (x.h + 2 * g.padding < k || x.w + 2 * g.padding < k) {
    throw DimensionError("conv2d: kernel " + std::to_string(k) + " exceeds padded extent of " +
                         dims(x) + " with padding " + std::to_string(g.padding));
  }
  return Shape5{x.n, wt.n, x.f, (x.h + 2 * g.padding - k) / g.stride + 1,
                (x.w + 2 * g.padding - k) / g.stride + 1};
}

template <typename T>
FeatureMap<T> conv2d_framewise(const FeatureMap<T>& x, const FeatureMap<T>& weight,
                               std::span<const T> bias, const Conv2dGeometry& geom) {
  const ConvPlan p(x.shape(), weight.shape(), geom);
  if (!bias.empty() && bias.size() != p.out_c) {
    throw DimensionError("conv2d: bias length " + std::to_string(bias.size()) + " != c_out " +
                         std::to_string(p.out_c));
  }
  FeatureMap<T> y(Shape5{p.n, p.out_c, p.frames, p.out_h, p.out_w});
  parallel_chunks(p.n, [&](std::size_t, std::size_t begin, std::size_t end) {
    std::vector<T> col(p.pointwise ? 0 : p.patch * p.positions);
    for (std::size_t n = begin; n < end; ++n) {
      for (std::size_t m = 0; m < p.out_c; ++m) {
        T* row = y.frame(n, m, 0);
        std::fill(row, row + p.positions, bias.empty() ? T(0) : bias[m]);
      }
      for (std::size_t g = 0; g < p.groups; ++g) {
        const T* src;
        if (p.pointwise) {
          src = x.frame(n, g * p.group_in, 0);
        } else {
          im2col(x, p, n, g, col.data());
          src = col.data();
        }
        ConstMatMap<T> w(weight.raw() + g * p.group_out * p.patch,
                         static_cast<Eigen::Index>(p.group_out), static_cast<Eigen::Index>(p.patch));
        ConstMatMap<T> cols(src, static_cast<Eigen::Index>(p.patch),
                            static_cast<Eigen::Index>(p.positions));
        MatMap<T> out(y.frame(n, g * p.group_out, 0), static_cast<Eigen::Index>(p.group_out),
                      static_cast<Eigen::Index>(p.positions));
        out.noalias() += w * cols;
      }
    }
  });
  return y;
}

template <typename T>
Conv2dGradients<T> conv2d_framewise_backward(const FeatureMap<T>& x, const FeatureMap<T>& weight,
                                             bool has_bias, const Conv2dGeometry& geom,
                                             const FeatureMap<T>& grad_out) {
  const ConvPlan p(x.shape(), weight.shape(), geom);
  const Shape5 expected{p.n, p.out_c, p.frames, p.out_h, p.out_w};
  if (grad_out.shape() != expected) {
    throw DimensionError("conv2d backward: grad_out " + dims(grad_out.shape()) +
                         " does not match forward output " + dims(expected));
  }
  Conv2dGradients<T> grads{FeatureMap<T>(x.shape()), FeatureMap<T>(weight.shape()),
                           std::vector<T>(has_bias ? p.out_c : 0, T(0))};

  const std::size_t chunks = chunk_count(p.n);
  std::vector<std::vector<T>> partial_w(chunks, std::vector<T>(weight.size(), T(0)));
  std::vector<std::vector<T>> partial_b(chunks, std::vector<T>(grads.grad_bias.size(), T(0)));

  parallel_chunks(p.n, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
    std::vector<T> col(p.pointwise ? 0 : p.patch * p.positions);
    std::vector<T> gcol(p.pointwise ? 0 : p.patch * p.positions);
    T* gw = partial_w[chunk].data();
    for (std::size_t n = begin; n < end; ++n) {
      if (has_bias) {
        for (std::size_t m = 0; m < p.out_c; ++m) {
          const T* g = grad_out.frame(n, m, 0);
          T acc = 0;
          for (std::size_t j = 0; j < p.positions; ++j) acc += g[j];
          partial_b[chunk][m] += acc;
        }
      }
      for (std::size_t g = 0; g < p.groups; ++g) {
        const T* src;
        if (p.pointwise) {
          src = x.frame(n, g * p.group_in, 0);
        } else {
          im2col(x, p, n, g, col.data());
          src = col.data();
        }
        const auto go_rows = static_cast<Eigen::Index>(p.group_out);
        const auto patch = static_cast<Eigen::Index>(p.patch);
        const auto positions = static_cast<Eigen::Index>(p.positions);
        ConstMatMap<T> go(grad_out.frame(n, g * p.group_out, 0), go_rows, positions);
        ConstMatMap<T> cols(src, patch, positions);
        MatMap<T> gw_block(gw + g * p.group_out * p.patch, go_rows, patch);
        gw_block.noalias() += go * cols.transpose();
        ConstMatMap<T> wg(weight.raw() + g * p.group_out * p.patch, go_rows, patch);
        T* target = p.pointwise ? grads.grad_input.frame(n, g * p.group_in, 0) : gcol.data();
        MatMap<T> gc(target, patch, positions);
        if (p.pointwise) {
          gc.noalias() += wg.transpose() * go;
        } else {
          gc.noalias() = wg.transpose() * go;
        }
        if (!p.pointwise) col2im(gcol.data(), p, n, g, grads.grad_input);
      }
    }
  });

  for (std::size_t c = 0; c < chunks; ++c) {
    for (std::size_t i = 0; i < weight.size(); ++i) grads.grad_weight[i] += partial_w[c][i];
    for (std::size_t i = 0; i < grads.grad_bias.size(); ++i) grads.grad_bias[i] += partial_b[c][i];
  }
  return grads;
}

// ---------------------------------------------------------------------------

Shape5 temporal_pool_output_shape(const Shape5& x, const TemporalPoolSpec& spec) {
  if (spec.kernel == 0 || spec.stride == 0) {
    throw DimensionError("temporal pool: kernel and stride must be positive");
  }
  if (spec.kernel > x.f) {
    throw DimensionError("temporal pool: kernel " + std::to_string(spec.kernel) +
                         " exceeds temporal depth " + std::to_string(x.f));
  }
  return Shape5{x.n, x.c, (x.f - spec.kernel) / spec.stride + 1, x.h, x.w};
}

Shape5 max_pool3d_output_shape(const Shape5& x, const MaxPool3dSpec& spec) {
  const std::array<std::size_t, 3> in{x.f, x.h, x.w};
  std::array<std::size_t, 3> out{};
  for (int a = 0; a < 3; ++a) {
    const std::size_t k = spec.kernel[a];
    const std::size_t s = spec.stride[a];
    const std::size_t p = spec.padding[a];
    if (k == 0 || s == 0) throw DimensionError("max_pool3d: kernel and stride must be positive");
    if (2 * p > k) {
      throw DimensionError("max_pool3d: padding " + std::to_string(p) +
                           " must be at most half the kernel " + std::to_string(k));
    }
    if (in[a] + 2 * p < k) {
      throw DimensionError("max_pool3d: kernel " + std::to_string(k) + " exceeds padded extent of " +
                           dims(x));
    }
    out[a] = (in[a] + 2 * p - k) / s + 1;
  }
  return Shape5{x.n, x.c, out[0], out[1], out[2]};
}

template <typename T>
PoolResult<T> temporal_max_pool(const FeatureMap<T>& x, const TemporalPoolSpec& spec) {
  const Shape5 in = x.shape();
  const Shape5 out = temporal_pool_output_shape(in, spec);
  if (in.numel() > std::numeric_limits<std::uint32_t>::max()) {
    throw DimensionError("temporal pool: tensor too large for 32-bit argmax indices");
  }
  PoolResult<T> r{FeatureMap<T>(out), PoolIndices{in, out, std::vector<std::uint32_t>(out.numel())}};
  const std::size_t plane = in.frame_size();
  for (std::size_t n = 0; n < in.n; ++n) {
    for (std::size_t c = 0; c < in.c; ++c) {
      for (std::size_t to = 0; to < out.f; ++to) {
        const std::size_t t0 = to * spec.stride;
        T* dst = r.output.frame(n, c, to);
        std::uint32_t* idx = r.indices.argmax.data() + r.output.offset(n, c, to, 0, 0);
        const T* first = x.frame(n, c, t0);
        const std::size_t base = x.offset(n, c, t0, 0, 0);
        for (std::size_t j = 0; j < plane; ++j) {
          dst[j] = first[j];
          idx[j] = static_cast<std::uint32_t>(base + j);
        }
        for (std::size_t t = t0 + 1; t < t0 + spec.kernel; ++t) {
          const T* src = x.frame(n, c, t);
          const std::size_t off = x.offset(n, c, t, 0, 0);
          for (std::size_t j = 0; j < plane; ++j) {
            if (src[j] > dst[j]) {
              dst[j] = src[j];
              idx[j] = static_cast<std::uint32_t>(off + j);
            }
          }
        }
      }
    }
  }
  return r;
}

template <typename T>
PoolResult<T> max_pool3d(const FeatureMap<T>& x, const MaxPool3dSpec& spec) {
  const Shape5 in = x.shape();
  const Shape5 out = max_pool3d_output_shape(in, spec);
  if (in.numel() > std::numeric_limits<std::uint32_t>::max()) {
    throw DimensionError("max_pool3d: tensor too large for 32-bit argmax indices");
  }
  PoolResult<T> r{FeatureMap<T>(out), PoolIndices{in, out, std::vector<std::uint32_t>(out.numel())}};
  const auto [kf, kh, kw] = spec.kernel;
  const auto [sf, sh, sw] = spec.stride;
  const auto [pf, ph, pw] = spec.padding;
  auto window = [](std::size_t o, std::size_t s, std::size_t p, std::size_t k, std::size_t extent) {
    const std::ptrdiff_t start = static_cast<std::ptrdiff_t>(o * s) - static_cast<std::ptrdiff_t>(p);
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(start, 0);
    const std::ptrdiff_t hi =
        std::min<std::ptrdiff_t>(start + static_cast<std::ptrdiff_t>(k), static_cast<std::ptrdiff_t>(extent));
    return std::pair<std::size_t, std::size_t>(static_cast<std::size_t>(lo), static_cast<std::size_t>(hi));
  };
  std::size_t o = 0;
  for (std::size_t n = 0; n < in.n; ++n) {
    for (std::size_t c = 0; c < in.c; ++c) {
      for (std::size_t of = 0; of < out.f; ++of) {
        const auto [f0, f1] = window(of, sf, pf, kf, in.f);
        for (std::size_t oh = 0; oh < out.h; ++oh) {
          const auto [h0, h1] = window(oh, sh, ph, kh, in.h);
          for (std::size_t ow = 0; ow < out.w; ++ow, ++o) {
            const auto [w0, w1] = window(ow, sw, pw, kw, in.w);
            T best = -std::numeric_limits<T>::infinity();
            std::size_t arg = x.offset(n, c, f0, h0, w0);
            for (std::size_t f = f0; f < f1; ++f) {
              for (std::size_t h = h0; h < h1; ++h) {
                for (std::size_t w = w0; w < w1; ++w) {
                  const std::size_t off = x.offset(n, c, f, h, w);
                  if (x[off] > best) {
                    best = x[off];
                    arg = off;
                  }
                }
              }
            }
            r.output[o] = best;
            r.indices.argmax[o] = static_cast<std::uint32_t>(arg);
          }
        }
      }
    }
  }
  return r;
}

template <typename T>
FeatureMap<T> max_pool_backward(const PoolIndices& indices, const FeatureMap<T>& grad_out) {
  if (grad_out.shape() != indices.output_shape ||
      indices.argmax.size() != indices.output_shape.numel()) {
    throw DimensionError("max pool backward: grad_out " + dims(grad_out.shape()) +
                         " does not match recorded output " + dims(indices.output_shape));
  }
  FeatureMap<T> gx(indices.input_shape);
  const std::size_t limit = gx.size();
  for (std::size_t i = 0; i < grad_out.size(); ++i) {
    const std::size_t target = indices.argmax[i];
    if (target >= limit) throw DimensionError("max pool backward: stale argmax index");
    gx[target] += grad_out[i];
  }
  return gx;
}

// ---------------------------------------------------------------------------

template <typename T>
FeatureMap<T> batch_norm(const FeatureMap<T>& x, const BatchNormParams<T>& params,
                         RunningStats<T> stats, Mode mode, BatchNormCache<T>* cache) {
  const Shape5 s = x.shape();
  if (params.scale.size() != s.c || params.shift.size() != s.c || stats.mean.size() != s.c ||
      stats.var.size() != s.c) {
    throw DimensionError("batch_norm: parameter vectors must have length c=" + std::to_string(s.c));
  }
  const std::size_t block = s.f * s.h * s.w;
  const std::size_t count = s.n * block;
  FeatureMap<T> y(s);
  std::vector<double> inv_std(s.c);
  FeatureMap<T> normalized(cache ? s : Shape5{0, 0, 0, 0, 0});

  for (std::size_t c = 0; c < s.c; ++c) {
    double mean;
    double var;
    if (mode == Mode::Train) {
      double sum = 0.0;
      for (std::size_t n = 0; n < s.n; ++n) {
        const T* p = x.frame(n, c, 0);
        for (std::size_t j = 0; j < block; ++j) sum += p[j];
      }
      mean = sum / static_cast<double>(count);
      double sq = 0.0;
      for (std::size_t n = 0; n < s.n; ++n) {
        const T* p = x.frame(n, c, 0);
        for (std::size_t j = 0; j < block; ++j) {
          const double d = p[j] - mean;
          sq += d * d;
        }
      }
      var = sq / static_cast<double>(count);
      const double unbiased = count > 1 ? sq / static_cast<double>(count - 1) : var;
      stats.mean[c] = static_cast<T>((1.0 - kBatchNormMomentum) * stats.mean[c] +
                                     kBatchNormMomentum * mean);
      stats.var[c] = static_cast<T>((1.0 - kBatchNormMomentum) * stats.var[c] +
                                    kBatchNormMomentum * unbiased);
    } else {
      mean = stats.mean[c];
      var = stats.var[c];
    }
    inv_std[c] = 1.0 / std::sqrt(var + kBatchNormEpsilon);
    const double scale = params.scale[c];
    const double shift = params.shift[c];
    for (std::size_t n = 0; n < s.n; ++n) {
      const T* p = x.frame(n, c, 0);
      T* q = y.frame(n, c, 0);
      T* z = cache ? normalized.frame(n, c, 0) : nullptr;
      for (std::size_t j = 0; j < block; ++j) {
        const double xh = (p[j] - mean) * inv_std[c];
        if (z) z[j] = static_cast<T>(xh);
        q[j] = static_cast<T>(scale * xh + shift);
      }
    }
  }
  if (cache) {
    cache->mode = mode;
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

template <typename T>
BatchNormGradients<T> batch_norm_backward(const BatchNormCache<T>& cache,
                                          const BatchNormParams<T>& params,
                                          const FeatureMap<T>& grad_out) {
  const Shape5 s = cache.normalized.shape();
  if (grad_out.shape() != s) {
    throw DimensionError("batch_norm backward: grad_out " + dims(grad_out.shape()) +
                         " does not match forward shape " + dims(s));
  }
  if (params.scale.size() != s.c) {
    throw DimensionError("batch_norm backward: scale length mismatch");
  }
  const std::size_t block = s.f * s.h * s.w;
  const double count = static_cast<double>(s.n * block);
  BatchNormGradients<T> g{FeatureMap<T>(s), std::vector<T>(s.c), std::vector<T>(s.c)};
  for (std::size_t c = 0; c < s.c; ++c) {
    double sum_dy = 0.0;
    double sum_dy_xh = 0.0;
    for (std::size_t n = 0; n < s.n; ++n) {
      const T* dy = grad_out.frame(n, c, 0);
      const T* xh = cache.normalized.frame(n, c, 0);
      for (std::size_t j = 0; j < block; ++j) {
        sum_dy += dy[j];
        sum_dy_xh += static_cast<double>(dy[j]) * xh[j];
      }
    }
    g.grad_shift[c] = static_cast<T>(sum_dy);
    g.grad_scale[c] = static_cast<T>(sum_dy_xh);
    const double k = params.scale[c] * cache.inv_std[c];
    for (std::size_t n = 0; n < s.n; ++n) {
      const T* dy = grad_out.frame(n, c, 0);
      const T* xh = cache.normalized.frame(n, c, 0);
      T* dx = g.grad_input.frame(n, c, 0);
      if (cache.mode == Mode::Train) {
        const double mean_dy = sum_dy / count;
        const double mean_dy_xh = sum_dy_xh / count;
        for (std::size_t j = 0; j < block; ++j) {
          dx[j] = static_cast<T>(k * (dy[j] - mean_dy - xh[j] * mean_dy_xh));
        }
      } else {
        for (std::size_t j = 0; j < block; ++j) dx[j] = static_cast<T>(k * dy[j]);
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------

template <typename T>
FeatureMap<T> relu(const FeatureMap<T>& x) {
  FeatureMap<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
  return y;
}

template <typename T>
FeatureMap<T> relu_backward(const FeatureMap<T>& x, const FeatureMap<T>& grad_out) {
  if (x.shape() != grad_out.shape()) {
    throw DimensionError("relu backward: " + dims(grad_out.shape()) + " vs " + dims(x.shape()));
  }
  FeatureMap<T> gx(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) gx[i] = x[i] > T(0) ? grad_out[i] : T(0);
  return gx;
}

template <typename T>
Matrix<T> global_avg_pool(const FeatureMap<T>& x) {
  const Shape5 s = x.shape();
  const std::size_t block = s.f * s.h * s.w;
  Matrix<T> m(s.n, s.c);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const T* p = x.frame(n, c, 0);
      double acc = 0.0;
      for (std::size_t j = 0; j < block; ++j) acc += p[j];
      m(n, c) = static_cast<T>(acc / static_cast<double>(block));
    }
  }
  return m;
}

template <typename T>
FeatureMap<T> global_avg_pool_backward(const Shape5& s, const Matrix<T>& grad_out) {
  if (grad_out.rows() != s.n || grad_out.cols() != s.c) {
    throw DimensionError("global_avg_pool backward: grad (" + std::to_string(grad_out.rows()) +
                         "," + std::to_string(grad_out.cols()) + ") does not match " + dims(s));
  }
  const std::size_t block = s.f * s.h * s.w;
  FeatureMap<T> gx(s);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const T v = grad_out(n, c) / static_cast<T>(block);
      T* p = gx.frame(n, c, 0);
      std::fill(p, p + block, v);
    }
  }
  return gx;
}

template <typename T>
Matrix<T> flatten(const FeatureMap<T>& x) {
  const Shape5 s = x.shape();
  return Matrix<T>(s.n, s.c * s.f * s.h * s.w, std::vector<T>(x.data().begin(), x.data().end()));
}

template <typename T>
FeatureMap<T> unflatten(const Shape5& s, const Matrix<T>& m) {
  if (m.rows() != s.n || m.cols() * s.n != s.numel()) {
    throw DimensionError("unflatten: matrix does not match " + dims(s));
  }
  return FeatureMap<T>(s, std::vector<T>(m.data().begin(), m.data().end()));
}

template <typename T>
Matrix<T> linear(const Matrix<T>& features, std::span<const T> weights, std::size_t out_features,
                 std::span<const T> bias) {
  const std::size_t in = features.cols();
  if (weights.size() != out_features * in) {
    throw DimensionError("linear: weights hold " + std::to_string(weights.size()) +
                         " values, expected " + std::to_string(out_features) + "x" +
                         std::to_string(in));
  }
  if (!bias.empty() && bias.size() != out_features) {
    throw DimensionError("linear: bias length " + std::to_string(bias.size()) + " != " +
                         std::to_string(out_features));
  }
  Matrix<T> out(features.rows(), out_features);
  for (std::size_t n = 0; n < features.rows(); ++n) {
    const auto x = features.row(n);
    for (std::size_t o = 0; o < out_features; ++o) {
      const T* w = weights.data() + o * in;
      T acc = bias.empty() ? T(0) : bias[o];
      for (std::size_t i = 0; i < in; ++i) acc += w[i] * x[i];
      out(n, o) = acc;
    }
  }
  return out;
}

template <typename T>
LinearGradients<T> linear_backward(const Matrix<T>& features, std::span<const T> weights,
                                   std::size_t out_features, const Matrix<T>& grad_out) {
  const std::size_t in = features.cols();
  if (grad_out.rows() != features.rows() || grad_out.cols() != out_features ||
      weights.size() != out_features * in) {
    throw DimensionError("linear backward: inconsistent shapes");
  }
  LinearGradients<T> g{Matrix<T>(features.rows(), in), Matrix<T>(out_features, in),
                       std::vector<T>(out_features, T(0))};
  for (std::size_t n = 0; n < features.rows(); ++n) {
    const auto x = features.row(n);
    auto gx = g.grad_input.row(n);
    for (std::size_t o = 0; o < out_features; ++o) {
      const T go = grad_out(n, o);
      g.grad_bias[o] += go;
      if (go == T(0)) continue;
      const T* w = weights.data() + o * in;
      T* gw = g.grad_weight.data().data() + o * in;
      for (std::size_t i = 0; i < in; ++i) {
        gx[i] += go * w[i];
        gw[i] += go * x[i];
      }
    }
  }
  return g;
}

#define SSA_INSTANTIATE(T)                                                                        \
  template FeatureMap<T> conv2d_framewise<T>(const FeatureMap<T>&, const FeatureMap<T>&,          \
                                             std::span<const T>, const Conv2dGeometry&);          \
  template Conv2dGradients<T> conv2d_framewise_backward<T>(                                       \
      const FeatureMap<T>&, const FeatureMap<T>&, bool, const Conv2dGeometry&, const FeatureMap<T>&); \
  template PoolResult<T> temporal_max_pool<T>(const FeatureMap<T>&, const TemporalPoolSpec&);    \
  template PoolResult<T> max_pool3d<T>(const FeatureMap<T>&, const MaxPool3dSpec&);              \
  template FeatureMap<T> max_pool_backward<T>(const PoolIndices&, const FeatureMap<T>&);          \
  template FeatureMap<T> batch_norm<T>(const FeatureMap<T>&, const BatchNormParams<T>&,           \
                                       RunningStats<T>, Mode, BatchNormCache<T>*);                \
  template BatchNormGradients<T> batch_norm_backward<T>(                                          \
      const BatchNormCache<T>&, const BatchNormParams<T>&, const FeatureMap<T>&);                 \
  template FeatureMap<T> relu<T>(const FeatureMap<T>&);                                           \
  template FeatureMap<T> relu_backward<T>(const FeatureMap<T>&, const FeatureMap<T>&);            \
  template Matrix<T> global_avg_pool<T>(const FeatureMap<T>&);                                    \
  template FeatureMap<T> global_avg_pool_backward<T>(const Shape5&, const Matrix<T>&);            \
  template Matrix<T> flatten<T>(const FeatureMap<T>&);                                            \
  template FeatureMap<T> unflatten<T>(const Shape5&, const Matrix<T>&);                           \
  template Matrix<T> linear<T>(const Matrix<T>&, std::span<const T>, std::size_t,                 \
                               std::span<const T>);                                               \
  template LinearGradients<T> linear_backward<T>(const Matrix<T>&, std::span<const T>,            \
                                                 std::size_t, const Matrix<T>&);

SSA_INSTANTIATE(float)
SSA_INSTANTIATE(double)
#undef SSA_INSTANTIATE

}  // namespace ssa
