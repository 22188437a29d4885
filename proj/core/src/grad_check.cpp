#include "ssa/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "ssa/errors.hpp"
#include "ssa/training.hpp"

namespace ssa {

double relative_error(double a, double n) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-8});
}

double GradCheckReport::max_rel_error() const {
  double m = 0.0;
  for (const auto& g : groups) m = std::max(m, g.max_rel_error);
  return m;
}

std::string GradCheckReport::table() const {
  std::string out = "group,checked,skipped_kinks,max_rel_error\n";
  char line[256];
  for (const auto& g : groups) {
    std::snprintf(line, sizeof line, "%s,%zu,%zu,%.3e\n", g.name.c_str(), g.checked,
                  g.skipped_kinks, g.max_rel_error);
    out += line;
  }
  return out;
}

GroupReport check_gradient(const std::string& name, std::span<double> values,
                           std::span<const double> analytic, const std::function<double()>& loss,
                           const GradCheckOptions& options, const BranchProbe& branch) {
  if (values.size() != analytic.size()) {
    throw DimensionError(name + ": " + std::to_string(values.size()) + " values but " +
                         std::to_string(analytic.size()) + " analytic gradients");
  }
  std::vector<std::size_t> entries(values.size());
  std::iota(entries.begin(), entries.end(), std::size_t{0});
  if (options.max_entries != 0 && options.max_entries < entries.size()) {
    Rng rng(Rng::derive_seed(options.seed, values.size()));
    rng.shuffle(std::span<std::size_t>(entries));
    entries.resize(options.max_entries);
    std::sort(entries.begin(), entries.end());
  }
  GroupReport report{name, 0, 0, 0.0};
  const double eps = options.epsilon;
  const double base = loss();
  if (!std::isfinite(base)) throw DivergenceError(name + ": non-finite loss in gradient check");
  const std::uint64_t base_branch = branch ? branch() : 0;
  for (std::size_t i : entries) {
    const double original = values[i];
    values[i] = original + eps;
    const double plus = loss();
    const bool plus_switched = branch && branch() != base_branch;
    values[i] = original - eps;
    const double minus = loss();
    const bool minus_switched = branch && branch() != base_branch;
    values[i] = original;
    if (!std::isfinite(plus) || !std::isfinite(minus)) {
      throw DivergenceError(name + ": non-finite loss in gradient check");
    }
    bool kink = plus_switched || minus_switched;
    if (!branch) {
      const double forward = (plus - base) / eps;
      const double backward = (base - minus) / eps;
      const double scale = std::max({std::abs(forward), std::abs(backward), 1e-8});
      kink = std::abs(forward - backward) > options.kink_tolerance * scale &&
             std::abs(forward - backward) > 1e-6;
    }
    if (kink) {
      ++report.skipped_kinks;
      continue;
    }
    const double numeric = (plus - minus) / (2 * eps);
    report.max_rel_error = std::max(report.max_rel_error, relative_error(analytic[i], numeric));
    ++report.checked;
  }
  return report;
}

GroupReport check_op(const std::string& name, FeatureMap<double> x,
                     const std::function<FeatureMap<double>(const FeatureMap<double>&)>& forward,
                     const std::function<FeatureMap<double>(const FeatureMap<double>&)>& backward,
                     const GradCheckOptions& options) {
  const FeatureMap<double> y = forward(x);
  FeatureMap<double> r(y.shape());
  Rng rng(options.seed);
  for (double& v : r.data()) v = rng.uniform(-1.0, 1.0);
  const FeatureMap<double> analytic = backward(r);
  auto loss = [&] { return dot(forward(x), r); };
  return check_gradient(name, x.data(), analytic.data(), loss, options);
}

GradCheckReport grad_check_network(Network<double>& network, const FeatureMap<double>& x,
                                   std::span<const std::uint32_t> labels,
                                   const GradCheckOptions& options) {
  FeatureMap<double> input = x;
  network.zero_grad();
  const Matrix<double> logits = network.forward(input, Mode::Train);
  const LossResult<double> result = cross_entropy(logits, labels);
  const FeatureMap<double> grad_input = network.backward(result.grad_logits);

  auto loss = [&] { return cross_entropy(network.forward(input, Mode::Train), labels).loss; };
  auto branch = [&] { return network.branch_hash(); };
  GradCheckReport report;
  for (Parameter<double>* p : network.parameters()) {
    const FeatureMap<double> analytic = p->grad;
    report.groups.push_back(
        check_gradient(p->name, p->value.data(), analytic.data(), loss, options, branch));
  }
  report.groups.push_back(
      check_gradient("input", input.data(), grad_input.data(), loss, options, branch));
  return report;
}

namespace {

FeatureMap<double> random_tensor(const Shape5& shape, Rng& rng) {
  FeatureMap<double> x(shape);
  for (double& v : x.data()) v = rng.uniform(-1.0, 1.0);
  return x;
}

}  // namespace

GradCheckReport grad_check_ssa(Rng& rng, const GradCheckOptions& options, const SsaConfig& cfg) {
  GradCheckReport rep;
  rep.groups.push_back(check_op(
      "ssa.input", random_tensor({2, 3, 8, 4, 4}, rng),
      [&](const FeatureMap<double>& x) { return ssa_forward(x, cfg); },
      [&](const FeatureMap<double>& g) { return ssa_backward(g, cfg); }, options));
  return rep;
}

GradCheckReport grad_check_conv(Rng& rng, const GradCheckOptions& options) {
  FeatureMap<double> x = random_tensor({2, 4, 3, 6, 6}, rng);
  Conv2dKernel<double> k{random_tensor({6, 2, 1, 3, 3}, rng), {0.1, -0.2, 0.3, 0.0, 0.5, -0.4},
                         Conv2dGeometry{2, 1, 2}};
  const FeatureMap<double> y = conv2d_framewise(x, k);
  const FeatureMap<double> r = random_tensor(y.shape(), rng);
  const auto grads = conv2d_framewise_backward(x, k, r);
  auto loss = [&] { return dot(conv2d_framewise(x, k), r); };
  GradCheckReport rep;
  rep.groups.push_back(check_gradient("conv.input", x.data(), grads.grad_input.data(), loss, options));
  rep.groups.push_back(
      check_gradient("conv.weight", k.weight.data(), grads.grad_weight.data(), loss, options));
  rep.groups.push_back(check_gradient("conv.bias", std::span<double>(k.bias),
                                      std::span<const double>(grads.grad_bias), loss, options));
  return rep;
}

GradCheckReport grad_check_batch_norm(Rng& rng, const GradCheckOptions& options) {
  FeatureMap<double> x = random_tensor({3, 4, 2, 3, 3}, rng);
  std::vector<double> scale{1.0, 0.5, -1.5, 2.0}, shift{0.1, -0.3, 0.0, 0.7};
  std::vector<double> mean(4, 0.0), var(4, 1.0);
  auto run = [&](BatchNormCache<double>* cache) {
    return batch_norm<double>(x, {scale, shift}, {mean, var}, Mode::Train, cache);
  };
  BatchNormCache<double> cache;
  const FeatureMap<double> y = run(&cache);
  const FeatureMap<double> r = random_tensor(y.shape(), rng);
  const auto grads = batch_norm_backward<double>(cache, {scale, shift}, r);
  auto loss = [&] { return dot(run(nullptr), r); };
  GradCheckReport rep;
  rep.groups.push_back(check_gradient("bn.input", x.data(), grads.grad_input.data(), loss, options));
  rep.groups.push_back(check_gradient("bn.scale", std::span<double>(scale),
                                      std::span<const double>(grads.grad_scale), loss, options));
  rep.groups.push_back(check_gradient("bn.shift", std::span<double>(shift),
                                      std::span<const double>(grads.grad_shift), loss, options));
  return rep;
}

GradCheckReport grad_check_linear(Rng& rng, const GradCheckOptions& options) {
  Matrix<double> x(4, 5), w(3, 5), r(4, 3);
  for (double& v : x.data()) v = rng.uniform(-1.0, 1.0);
  for (double& v : w.data()) v = rng.uniform(-1.0, 1.0);
  for (double& v : r.data()) v = rng.uniform(-1.0, 1.0);
  std::vector<double> bias{0.2, -0.1, 0.4};
  const auto grads = linear_backward(x, w, r);
  auto loss = [&] {
    const Matrix<double> y = linear<double>(x, w, bias);
    return std::inner_product(y.data().begin(), y.data().end(), r.data().begin(), 0.0);
  };
  GradCheckReport rep;
  rep.groups.push_back(check_gradient("linear.input", x.data(), grads.grad_input.data(), loss, options));
  rep.groups.push_back(
      check_gradient("linear.weight", w.data(), grads.grad_weight.data(), loss, options));
  rep.groups.push_back(check_gradient("linear.bias", std::span<double>(bias),
                                      std::span<const double>(grads.grad_bias), loss, options));
  return rep;
}

GradCheckReport grad_check_pool(Rng& rng, const GradCheckOptions& options) {
  const TemporalPoolSpec tspec{2, 2};
  const MaxPool3dSpec mspec{{3, 3, 3}, {2, 2, 2}, {1, 1, 1}};
  GradCheckReport rep;
  {
    FeatureMap<double> x = random_tensor({2, 3, 8, 3, 3}, rng);
    const auto fwd = temporal_max_pool(x, tspec);
    const FeatureMap<double> r = random_tensor(fwd.output.shape(), rng);
    const auto analytic = max_pool_backward(fwd.indices, r);
    auto loss = [&] { return dot(temporal_max_pool(x, tspec).output, r); };
    rep.groups.push_back(check_gradient("temporal_max_pool.input", x.data(), analytic.data(), loss, options));
  }
  {
    FeatureMap<double> x = random_tensor({1, 2, 6, 6, 6}, rng);
    const auto fwd = max_pool3d(x, mspec);
    const FeatureMap<double> r = random_tensor(fwd.output.shape(), rng);
    const auto analytic = max_pool_backward(fwd.indices, r);
    auto loss = [&] { return dot(max_pool3d(x, mspec).output, r); };
    rep.groups.push_back(check_gradient("max_pool3d.input", x.data(), analytic.data(), loss, options));
  }
  return rep;
}

}  // namespace ssa
