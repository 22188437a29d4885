#include "ssa/ssa_layer.hpp"

#include <algorithm>
#include <charconv>

#include "ssa/errors.hpp"

namespace ssa {

SsaConfig SsaConfig::parse(const std::string& text) {
  if (text == "all" || text == "f-1") return all_shifts();
  std::size_t value = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (text.empty() || ec != std::errc() || ptr != end) {
    throw SpecError("shift cap must be \"all\" or a non-negative integer, got \"" + text + "\"");
  }
  return fixed(value);
}

std::size_t SsaConfig::max_shift(std::size_t f) const {
  const std::size_t all = f > 0 ? f - 1 : 0;
  return cap_ ? std::min(*cap_, all) : all;
}

std::string SsaConfig::str() const { return cap_ ? std::to_string(*cap_) : "all"; }

template <typename T>
FeatureMap<T> ssa_forward_reference(const FeatureMap<T>& x, const SsaConfig& cfg) {
  const Shape5 s = x.shape();
  FeatureMap<T> y(s);
  const std::size_t f = s.f;
  const std::size_t plane = s.frame_size();
  const std::size_t cap = cfg.max_shift(f);
  const T inv_f = T(1) / static_cast<T>(f);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      for (std::size_t j = 0; j < plane; ++j) {
        // 1-based temporal positions i, k as in the defining sum.
        for (std::size_t i = 1; i <= f; ++i) {
          const T xi = x.frame(n, c, i - 1)[j];
          T sum = 0;
          const std::size_t k_first = i > cap ? i - cap : 1;
          for (std::size_t k = k_first; k < i; ++k) {
            const T xk = x.frame(n, c, k - 1)[j];
            const T factor = static_cast<T>(f - (i - k)) / static_cast<T>(f);
            sum += factor * (xi - xk);
          }
          y.frame(n, c, i - 1)[j] = i == 1 ? xi : xi + inv_f * sum;
        }
      }
    }
  }
  return y;
}

template <typename T>
FeatureMap<T> ssa_forward_cumulative(const FeatureMap<T>& x, const SsaConfig& cfg) {
  const Shape5 s = x.shape();
  FeatureMap<T> y = x;
  const std::size_t f = s.f;
  const std::size_t plane = s.frame_size();
  const std::size_t cap = cfg.max_shift(f);
  for (std::size_t d = 1; d <= cap; ++d) {
    const T weight = static_cast<T>(SsaWeightRule::weight(d, f));
    for (std::size_t n = 0; n < s.n; ++n) {
      for (std::size_t c = 0; c < s.c; ++c) {
        for (std::size_t i = d; i < f; ++i) {
          const T* __restrict cur = x.frame(n, c, i);
          const T* __restrict past = x.frame(n, c, i - d);
          T* __restrict out = y.frame(n, c, i);
          for (std::size_t j = 0; j < plane; ++j) out[j] += weight * (cur[j] - past[j]);
        }
      }
    }
  }
  return y;
}

template <typename T>
FeatureMap<T> ssa_backward(const FeatureMap<T>& grad_out, const SsaConfig& cfg) {
  const Shape5 s = grad_out.shape();
  FeatureMap<T> gx = grad_out;
  const std::size_t f = s.f;
  const std::size_t plane = s.frame_size();
  const std::size_t cap = cfg.max_shift(f);
  for (std::size_t d = 1; d <= cap; ++d) {
    const T weight = static_cast<T>(SsaWeightRule::weight(d, f));
    for (std::size_t n = 0; n < s.n; ++n) {
      for (std::size_t c = 0; c < s.c; ++c) {
        for (std::size_t i = d; i < f; ++i) {
          const T* __restrict g = grad_out.frame(n, c, i);
          T* __restrict here = gx.frame(n, c, i);
          T* __restrict past = gx.frame(n, c, i - d);
          for (std::size_t j = 0; j < plane; ++j) {
            here[j] += weight * g[j];
            past[j] -= weight * g[j];
          }
        }
      }
    }
  }
  return gx;
}

template FeatureMap<float> ssa_forward_reference<float>(const FeatureMap<float>&, const SsaConfig&);
template FeatureMap<double> ssa_forward_reference<double>(const FeatureMap<double>&, const SsaConfig&);
template FeatureMap<float> ssa_forward_cumulative<float>(const FeatureMap<float>&, const SsaConfig&);
template FeatureMap<double> ssa_forward_cumulative<double>(const FeatureMap<double>&, const SsaConfig&);
template FeatureMap<float> ssa_backward<float>(const FeatureMap<float>&, const SsaConfig&);
template FeatureMap<double> ssa_backward<double>(const FeatureMap<double>&, const SsaConfig&);

}  // namespace ssa
