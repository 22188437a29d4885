#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "ssa/arch.hpp"
#include "ssa/errors.hpp"
#include "ssa/grad_check.hpp"
#include "ssa/motion.hpp"
#include "ssa/ssa_layer.hpp"
#include "ssa/tensor_io.hpp"
#include "ssa/training.hpp"
#include "ssa/voxel.hpp"

namespace fs = std::filesystem;

namespace ssanet {

using namespace ssa;

namespace {

std::string format(const char* fmt, double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, value);
  return buf;
}

FeatureMap<double> random_tensor(const Shape5& shape, Rng& rng) {
  FeatureMap<double> x(shape);
  for (double& v : x.data()) v = rng.uniform(-1.0, 1.0);
  return x;
}

NetworkSpec resolve_spec(const std::string& arch, const std::string& spec_file) {
  if (!arch.empty() && !spec_file.empty()) throw SpecError("give either --arch or --spec, not both");
  if (!spec_file.empty()) return load_network_spec(spec_file);
  if (arch.empty()) throw SpecError("one of --arch or --spec is required");
  return architecture(arch);
}

TrainTestSplit split_voxels(const VoxelDataset& voxels) {
  // Every fifth record (indices 4, 9, ...) is held out.
  VoxelDataset train, test;
  train.classes = test.classes = voxels.classes;
  for (std::size_t i = 0; i < voxels.grids.size(); ++i) {
    (i % 5 == 4 ? test : train).grids.push_back(voxels.grids[i]);
  }
  TrainTestSplit split;
  split.train = to_labeled_set(train);
  if (!test.grids.empty()) split.test = to_labeled_set(test);
  split.test.classes = voxels.classes;
  return split;
}

TrainTestSplit load_data(const DataArgs& d, std::uint64_t seed) {
  if (d.data == "motion") {
    MotionOptions options;
    options.n_per_class = d.n_per_class;
    options.noise = d.noise;
    options.seed = d.data_seed_set ? d.data_seed : seed;
    return gen_motion_dataset(options);
  }
  const fs::path path(d.data);
  if (fs::is_directory(path)) {
    return TrainTestSplit{load_labeled_set(path / "train"), load_labeled_set(path / "test")};
  }
  if (path.extension() == ".ssav") return split_voxels(load_voxels(path));
  throw FormatError("--data must be \"motion\", a gen-data directory or an .ssav file, got " + d.data);
}

}  // namespace

// equiv-check -------------------------------------------------------------------

int run_equiv_check(const EquivCheckArgs& a, std::ostream& out) {
  if (a.trials == 0) throw SpecError("--trials must be at least 1");
  if (a.max_f == 0) throw SpecError("--max-f must be at least 1");
  Rng rng(a.seed);
  double worst = 0.0;
  for (std::size_t t = 0; t < a.trials; ++t) {
    const Shape5 shape{1 + rng.below(2), 1 + rng.below(8), 1 + rng.below(a.max_f), 1 + rng.below(8),
                       1 + rng.below(8)};
    // Cycle through all-shift and every fixed cap 0..f.
    const std::uint64_t pick = rng.below(shape.f + 2);
    const SsaConfig cfg = pick == shape.f + 1 ? SsaConfig::all_shifts() : SsaConfig::fixed(pick);
    FeatureMap<float> x(shape);
    for (float& v : x.data()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    const double dev = max_relative_deviation(ssa_forward_reference(x, cfg), ssa_forward_cumulative(x, cfg));
    worst = std::max(worst, dev);
  }
  const bool pass = worst <= a.tolerance;
  out << "trials=" << a.trials << " max_f=" << a.max_f << " seed=" << a.seed << '\n';
  out << "max_relative_deviation=" << format("%.3e", worst) << " tolerance=" << format("%.3e", a.tolerance)
      << '\n';
  out << (pass ? "PASS" : "FAIL") << '\n';
  return pass ? kOk : kCheckFailed;
}

// param-count -------------------------------------------------------------------

int run_param_count(const ParamCountArgs& a, std::ostream& out) {
  NetworkSpec spec = resolve_spec(a.arch, a.spec_file);
  if (!a.shift_cap.empty()) spec.set_shift_cap(SsaConfig::parse(a.shift_cap));
  const auto rows = param_table(spec);
  const ParamBreakdown total = param_count(spec);
  out << "layer,kind,params,note\n";
  for (const auto& r : rows) {
    out << r.layer << ',' << r.kind << ',' << r.params << ',' << (r.params == 0 ? "zero-param" : "") << '\n';
  }
  out << "# architecture=" << spec.name << " variant=" << to_string(spec.variant) << '\n';
  out << "# conv_weights=" << total.conv_weights() << " bias=" << total.bias
      << " batch_norm=" << total.batch_norm << " linear=" << total.linear << '\n';
  out << "total," << spec.name << ',' << total.total() << ',' << format("%.2fM", total.total() / 1e6) << '\n';
  return kOk;
}

// gen-data ----------------------------------------------------------------------

int run_gen_data(const GenDataArgs& a, std::ostream& out) {
  fs::create_directories(a.out);
  if (a.kind == "motion") {
    MotionOptions options;
    options.n_per_class = a.n_per_class;
    options.noise = a.noise;
    options.seed = a.seed;
    const TrainTestSplit split = gen_motion_dataset(options);
    save_labeled_set(fs::path(a.out) / "train", split.train);
    save_labeled_set(fs::path(a.out) / "test", split.test);
    out << "wrote " << split.train.size() << " train and " << split.test.size() << " test clips to "
        << a.out << '\n';
    return kOk;
  }
  if (a.kind == "shapes") {
    VoxelDataset data = gen_synthetic_shapes(a.n_per_class, a.seed);
    if (a.augment > 0) {
      VoxelDataset expanded;
      expanded.classes = data.classes;
      for (std::size_t i = 0; i < data.grids.size(); ++i) {
        expanded.grids.push_back(data.grids[i]);
        for (std::size_t k = 0; k < a.augment; ++k) {
          expanded.grids.push_back(
              augment_voxels(data.grids[i], Rng::derive_seed(a.seed ^ 0xa5a5a5a5ULL, i * a.augment + k)));
        }
      }
      data = std::move(expanded);
    }
    const fs::path path = fs::path(a.out) / "shapes.ssav";
    save_voxels(path, data);
    out << "wrote " << data.grids.size() << " voxel grids to " << path.string() << '\n';
    return kOk;
  }
  throw SpecError("--kind must be motion or shapes, got " + a.kind);
}

// train / eval --------------------------------------------------------------------

int run_train(const TrainArgs& a, std::ostream& out) {
  NetworkSpec spec = resolve_spec(a.spec_file.empty() ? a.arch : "", a.spec_file);
  const SsaConfig cap = SsaConfig::parse(a.shift_cap);
  spec.set_shift_cap(cap);
  TrainConfig config;
  config.learning_rate = a.lr;
  config.momentum = a.momentum;
  config.weight_decay = a.weight_decay;
  config.batch_size = a.batch;
  config.epochs = a.epochs;
  config.seed = a.seed;
  config.shift_cap = cap;
  config.validate();

  const TrainTestSplit data = load_data(a.data, a.seed);
  Network<float> network(spec, a.seed);
  out << "arch=" << spec.name << " params=" << network.param_count() << " shift_cap=" << cap.str()
      << " train=" << data.train.size() << " test=" << data.test.size() << '\n';
  const History history = train(network, data.train, data.test, config, [&](const EpochRecord& r) {
    out << "epoch " << r.epoch << " loss=" << format("%.6f", r.loss) << " train_acc="
        << format("%.4f", r.train_acc) << " test_acc=" << format("%.4f", r.test_acc) << '\n';
    out.flush();
  });
  fs::create_directories(a.out);
  history.write_csv(fs::path(a.out) / "history.csv");
  save_checkpoint(fs::path(a.out) / "model.ssac", network);
  out << "final test_acc=" << format("%.4f", history.epochs.empty() ? 0.0 : history.last().test_acc)
      << '\n';
  out << "wrote " << (fs::path(a.out) / "history.csv").string() << " and "
      << (fs::path(a.out) / "model.ssac").string() << '\n';
  return kOk;
}

int run_eval(const EvalArgs& a, std::ostream& out) {
  if (a.checkpoint.empty()) throw SpecError("--checkpoint is required");
  auto network = load_checkpoint(a.checkpoint);
  const TrainTestSplit data = load_data(a.data, a.seed);
  const double acc = evaluate(*network, data.test, a.batch);
  out << "arch=" << network->spec().name << " samples=" << data.test.size() << '\n';
  out << "test_acc=" << format("%.4f", acc) << '\n';
  return kOk;
}

// grad-check ----------------------------------------------------------------------

namespace {

struct CheckResult {
  std::string name;
  double error;
  double tolerance;
  std::size_t checked;
  std::size_t skipped;
};

CheckResult summarize(const std::string& name, const GradCheckReport& r, double tolerance) {
  std::size_t checked = 0, skipped = 0;
  for (const auto& g : r.groups) {
    checked += g.checked;
    skipped += g.skipped_kinks;
  }
  return {name, r.max_rel_error(), tolerance, checked, skipped};
}

}  // namespace

int run_grad_check(const GradCheckArgs& a, std::ostream& out) {
  const std::vector<std::string> all{"ssa", "conv", "bn", "linear", "pool", "network"};
  std::vector<std::string> targets;
  if (a.target == "all") {
    targets = all;
  } else if (std::find(all.begin(), all.end(), a.target) != all.end()) {
    targets = {a.target};
  } else {
    throw SpecError("--target must be one of all, ssa, conv, bn, linear, pool, network");
  }
  Rng rng(a.seed);
  GradCheckOptions options;
  options.seed = a.seed;
  options.max_entries = a.max_entries;
  std::vector<CheckResult> results;
  for (const std::string& t : targets) {
    options.epsilon = a.epsilon > 0 ? a.epsilon : (t == "network" ? 1e-5 : 1e-4);
    const double tol = a.tolerance > 0 ? a.tolerance : (t == "ssa" ? 1e-6 : t == "network" ? 1e-3 : 1e-4);
    GradCheckReport rep;
    if (t == "ssa") {
      rep = grad_check_ssa(rng, options);
    } else if (t == "conv") {
      rep = grad_check_conv(rng, options);
    } else if (t == "bn") {
      rep = grad_check_batch_norm(rng, options);
    } else if (t == "linear") {
      rep = grad_check_linear(rng, options);
    } else if (t == "pool") {
      rep = grad_check_pool(rng, options);
    } else {
      Network<double> net(toy_ssa_net(), a.seed);
      const FeatureMap<double> x = random_tensor(Shape5{2, 1, 8, 16, 16}, rng);
      const std::vector<std::uint32_t> labels{0, 3};
      rep = grad_check_network(net, x, labels, options);
    }
    results.push_back(summarize(t, rep, tol));
  }
  bool pass = true;
  out << "target,checked,skipped_kinks,max_rel_error,tolerance,result\n";
  for (const auto& r : results) {
    const bool ok = r.error < r.tolerance;
    pass = pass && ok;
    out << r.name << ',' << r.checked << ',' << r.skipped << ',' << format("%.3e", r.error) << ','
        << format("%.0e", r.tolerance) << ',' << (ok ? "PASS" : "FAIL") << '\n';
  }
  return pass ? kOk : kCheckFailed;
}

// bench ---------------------------------------------------------------------------

namespace {

template <typename Fn>
std::pair<double, double> time_ns(std::size_t repeats, Fn&& fn) {
  fn();  // warm-up
  std::vector<double> samples;
  samples.reserve(repeats);
  for (std::size_t i = 0; i < repeats; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    samples.push_back(std::chrono::duration<double, std::nano>(t1 - t0).count());
  }
  double mean = 0;
  for (double s : samples) mean += s;
  mean /= static_cast<double>(samples.size());
  std::sort(samples.begin(), samples.end());
  const std::size_t idx = std::min(samples.size() - 1,
                                   static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(samples.size()))) - 1);
  return {mean, samples[idx]};
}

std::vector<std::size_t> parse_caps(const std::string& text) {
  std::vector<std::size_t> caps;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const SsaConfig cfg = SsaConfig::parse(item);
    if (cfg.is_all()) throw SpecError("--caps takes integers");
    caps.push_back(*cfg.cap());
  }
  if (caps.empty()) throw SpecError("--caps is empty");
  return caps;
}

}  // namespace

int run_bench(const BenchArgs& a, std::ostream& out) {
  if (a.repeats == 0) throw SpecError("--repeats must be at least 1");
  const std::vector<std::size_t> caps = parse_caps(a.caps);
  Rng rng(a.seed);
  const Shape5 shape{a.batch, a.channels, a.frames, a.size, a.size};
  FeatureMap<float> x(shape);
  for (float& v : x.data()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  std::ostringstream csv;
  csv << "op,shape,mean_ns,p95_ns\n";
  auto row = [&](const std::string& op, const std::string& s, std::pair<double, double> t) {
    csv << op << ',' << s << ',' << format("%.0f", t.first) << ',' << format("%.0f", t.second) << '\n';
  };
  const std::string base = shape.str();
  for (std::size_t cap : caps) {
    const SsaConfig cfg = SsaConfig::fixed(cap);
    const std::string label = base + " cap=" + std::to_string(cap);
    row("ssa_reference", label, time_ns(a.repeats, [&] { (void)ssa_forward_reference(x, cfg); }));
    row("ssa_cumulative", label, time_ns(a.repeats, [&] { (void)ssa_forward_cumulative(x, cfg); }));
  }
  FeatureMap<float> w(Shape5{a.channels, a.channels, 1, 3, 3});
  for (float& v : w.data()) v = static_cast<float>(rng.uniform(-0.1, 0.1));
  const Conv2dGeometry geom{1, 1, 1};
  const FeatureMap<float> y = conv2d_framewise<float>(x, w, {}, geom);
  row("conv2d_framewise", base + " k=3", time_ns(a.repeats, [&] { (void)conv2d_framewise<float>(x, w, {}, geom); }));
  row("conv2d_framewise_backward", base + " k=3",
      time_ns(a.repeats, [&] { (void)conv2d_framewise_backward<float>(x, w, false, geom, y); }));
  if (!a.out.empty()) {
    std::ofstream file(a.out);
    if (!file) throw FormatError("cannot write " + a.out);
    file << csv.str();
  }
  out << csv.str();
  return kOk;
}

// dump-tensor -----------------------------------------------------------------------

int run_dump_tensor(const DumpTensorArgs& a, std::ostream& out) {
  fs::path path(a.path);
  if (!fs::exists(path) && path.is_relative()) {
    if (const char* dir = std::getenv("SSA_GOLDEN_DIR")) {
      if (fs::exists(fs::path(dir) / path)) path = fs::path(dir) / path;
    }
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  const SsatHeader header = read_ssat_header(in);
  in.seekg(0);
  const FeatureMap<double> t = read_ssat<double>(in);
  double min = 0, max = 0, sum = 0, sq = 0;
  std::size_t finite = 0;
  bool first = true;
  for (double v : t.data()) {
    if (!std::isfinite(v)) continue;
    ++finite;
    if (first) {
      min = max = v;
      first = false;
    }
    min = std::min(min, v);
    max = std::max(max, v);
    sum += v;
  }
  const double mean = finite ? sum / static_cast<double>(finite) : 0.0;
  for (double v : t.data()) {
    if (std::isfinite(v)) sq += (v - mean) * (v - mean);
  }
  const double stddev = finite ? std::sqrt(sq / static_cast<double>(finite)) : 0.0;
  out << "file=" << path.string() << '\n';
  out << "dtype=" << (header.dtype == DType::F32 ? "f32" : "f64") << '\n';
  out << "shape=" << header.shape.n << 'x' << header.shape.c << 'x' << header.shape.f << 'x'
      << header.shape.h << 'x' << header.shape.w << '\n';
  out << "elements=" << t.size() << " finite=" << finite << '\n';
  out << "min=" << format("%.6g", min) << " max=" << format("%.6g", max) << " mean=" << format("%.6g", mean)
      << " std=" << format("%.6g", stddev) << '\n';
  if (a.head > 0) {
    out << "head=";
    for (std::size_t i = 0; i < std::min(a.head, t.size()); ++i) out << (i ? "," : "") << format("%.6g", t[i]);
    out << '\n';
  }
  return kOk;
}

}  // namespace ssanet
