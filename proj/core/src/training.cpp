#include "ssa/training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "ssa/errors.hpp"
#include "ssa/tensor_io.hpp"

namespace ssa {

template <typename T>
LossResult<T> cross_entropy(const Matrix<T>& logits, std::span<const std::uint32_t> labels) {
  const std::size_t n = logits.rows(), k = logits.cols();
  if (labels.size() != n) {
    throw DimensionError("cross_entropy: " + std::to_string(n) + " logit rows but " +
                         std::to_string(labels.size()) + " labels");
  }
  LossResult<T> out{0.0, Matrix<T>(n, k)};
  if (n == 0) return out;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] >= k) {
      throw DimensionError("cross_entropy: label " + std::to_string(labels[i]) + " outside [0, " +
                           std::to_string(k) + ")");
    }
    const auto row = logits.row(i);
    double max = -std::numeric_limits<double>::infinity();
    for (T v : row) max = std::max(max, static_cast<double>(v));
    double sum = 0.0;
    for (T v : row) sum += std::exp(static_cast<double>(v) - max);
    const double log_sum = std::log(sum);
    total += log_sum + max - static_cast<double>(row[labels[i]]);
    for (std::size_t j = 0; j < k; ++j) {
      const double p = std::exp(static_cast<double>(row[j]) - max - log_sum);
      out.grad_logits(i, j) = static_cast<T>((p - (j == labels[i] ? 1.0 : 0.0)) / static_cast<double>(n));
    }
  }
  out.loss = total / static_cast<double>(n);
  return out;
}

void SgdConfig::validate() const {
  if (!(learning_rate >= 0)) throw SpecError("learning rate must be non-negative");
  if (!(momentum >= 0 && momentum < 1)) throw SpecError("momentum must be in [0, 1)");
  if (!(weight_decay >= 0)) throw SpecError("weight decay must be non-negative");
}

void TrainConfig::validate() const {
  sgd().validate();
  if (batch_size == 0) throw SpecError("batch size must be positive");
}

template <typename T>
void sgd_step(std::span<T> params, std::span<const T> grads, std::span<T> velocity,
              const SgdConfig& config) {
  if (params.size() != grads.size() || params.size() != velocity.size()) {
    throw DimensionError("sgd_step: parameter, gradient and velocity sizes differ");
  }
  const T mu = static_cast<T>(config.momentum);
  const T lambda = static_cast<T>(config.weight_decay);
  const T lr = static_cast<T>(config.learning_rate);
  for (std::size_t i = 0; i < params.size(); ++i) {
    velocity[i] = mu * velocity[i] + grads[i] + lambda * params[i];
    params[i] -= lr * velocity[i];
  }
}

template <typename T>
void sgd_step(std::span<Parameter<T>* const> params, const SgdConfig& config) {
  for (Parameter<T>* p : params) {
    sgd_step<T>(p->value.data(), std::span<const T>(p->grad.data()), p->velocity.data(), config);
  }
}

template <typename T>
std::size_t count_correct(const Matrix<T>& logits, std::span<const std::uint32_t> labels) {
  if (labels.size() != logits.rows()) throw DimensionError("count_correct: label count mismatch");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto row = logits.row(i);
    std::size_t best = 0;
    for (std::size_t j = 1; j < row.size(); ++j) {
      if (row[j] > row[best]) best = j;
    }
    correct += best == labels[i];
  }
  return correct;
}

std::string History::csv() const {
  std::ostringstream out;
  out << "epoch,loss,train_acc,test_acc\n";
  char line[128];
  for (const auto& e : epochs) {
    std::snprintf(line, sizeof line, "%zu,%.6f,%.4f,%.4f\n", e.epoch, e.loss, e.train_acc, e.test_acc);
    out << line;
  }
  return out.str();
}

void History::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << csv();
}

Matrix<float> predict_all(Network<float>& network, const FeatureMap<float>& inputs,
                          std::size_t batch_size) {
  const std::size_t n = inputs.shape().n;
  const std::size_t classes = network.spec().head.classes;
  Matrix<float> logits(n, classes);
  std::vector<std::size_t> idx;
  for (std::size_t begin = 0; begin < n; begin += batch_size) {
    const std::size_t end = std::min(n, begin + batch_size);
    idx.resize(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    const Matrix<float> out = network.predict(gather_samples(inputs, std::span<const std::size_t>(idx)));
    std::copy(out.data().begin(), out.data().end(), logits.row(begin).begin());
  }
  return logits;
}

double evaluate(Network<float>& network, const LabeledSet& data, std::size_t batch_size) {
  if (data.size() == 0) return 0.0;
  const Matrix<float> logits = predict_all(network, data.inputs, batch_size);
  return static_cast<double>(count_correct(logits, std::span<const std::uint32_t>(data.labels))) /
         static_cast<double>(data.size());
}

History train(Network<float>& network, const LabeledSet& train_set, const LabeledSet& test,
              const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  train_set.validate();
  if (train_set.size() == 0) throw SpecError("training set is empty");
  Shape5 expected = network.spec().input;
  expected.n = train_set.size();
  if (train_set.inputs.shape() != expected) {
    throw DimensionError("training inputs " + train_set.inputs.shape().str() +
                         " do not match network input " + expected.str());
  }
  const SgdConfig sgd = config.sgd();
  Rng rng(config.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  History history;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      const std::span<const std::size_t> idx(order.data() + begin, end - begin);
      const LabeledSet batch = train_set.subset(idx);
      network.zero_grad();
      const Matrix<float> logits = network.forward(batch.inputs, Mode::Train);
      const LossResult<float> loss = cross_entropy(logits, std::span<const std::uint32_t>(batch.labels));
      if (!std::isfinite(loss.loss)) {
        throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + ", batch starting " +
                              std::to_string(begin) + "; lower the learning rate");
      }
      network.backward(loss.grad_logits);
      sgd_step<float>(std::span<Parameter<float>* const>(network.parameters()), sgd);
      loss_sum += loss.loss * static_cast<double>(idx.size());
      correct += count_correct(logits, std::span<const std::uint32_t>(batch.labels));
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = loss_sum / static_cast<double>(order.size());
    rec.train_acc = static_cast<double>(correct) / static_cast<double>(order.size());
    rec.test_acc = evaluate(network, test);
    history.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return history;
}

// Checkpoints -------------------------------------------------------------------

namespace {

constexpr std::uint8_t kCheckpointVersion = 1;

void write_string(std::ostream& out, const std::string& s) {
  io::write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in, const char* what) {
  const std::uint32_t len = io::read_u32(in, what);
  if (len > (1u << 24)) throw FormatError(std::string(what) + " length is implausible");
  std::string s(len, '\0');
  if (!in.read(s.data(), len)) throw FormatError(std::string("truncated ") + what);
  return s;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, Network<float>& network) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  io::write_magic(out, "SSAC");
  io::write_u8(out, kCheckpointVersion);
  write_string(out, format_network_spec(network.spec()));
  const auto& params = network.parameters();
  const auto& buffers = network.buffers();
  io::write_u32(out, static_cast<std::uint32_t>(params.size() + buffers.size()));
  for (const auto* p : params) {
    write_string(out, p->name);
    write_ssat(out, p->value);
  }
  for (const auto* b : buffers) {
    write_string(out, b->name);
    write_ssat(out, b->value);
  }
  if (!out) throw FormatError("failed writing " + path.string());
}

std::unique_ptr<Network<float>> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  io::expect_magic(in, "SSAC");
  const std::uint8_t version = io::read_u8(in, "checkpoint version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  NetworkSpec spec;
  try {
    spec = parse_network_spec(read_string(in, "architecture text"));
  } catch (const SpecError& e) {
    throw FormatError(path.string() + ": bad architecture text: " + e.what());
  }
  auto network = std::make_unique<Network<float>>(spec, 0);
  std::map<std::string, FeatureMap<float>*> slots;
  for (auto* p : network->parameters()) slots[p->name] = &p->value;
  for (auto* b : network->buffers()) slots[b->name] = &b->value;
  const std::uint32_t count = io::read_u32(in, "entry count");
  if (count != slots.size()) {
    throw FormatError("checkpoint has " + std::to_string(count) + " entries, network expects " +
                      std::to_string(slots.size()));
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = read_string(in, "entry name");
    auto it = slots.find(name);
    if (it == slots.end()) throw FormatError("checkpoint entry \"" + name + "\" is unknown");
    FeatureMap<float> value = read_ssat<float>(in);
    if (value.shape() != it->second->shape()) {
      throw FormatError("checkpoint entry \"" + name + "\" has shape " + value.shape().str() +
                        ", expected " + it->second->shape().str());
    }
    *it->second = std::move(value);
    slots.erase(it);
  }
  if (!slots.empty()) throw FormatError("checkpoint is missing entry \"" + slots.begin()->first + "\"");
  return network;
}

#define SSA_INSTANTIATE(T)                                                                          \
  template LossResult<T> cross_entropy<T>(const Matrix<T>&, std::span<const std::uint32_t>);       \
  template void sgd_step<T>(std::span<T>, std::span<const T>, std::span<T>, const SgdConfig&);     \
  template void sgd_step<T>(std::span<Parameter<T>* const>, const SgdConfig&);                     \
  template std::size_t count_correct<T>(const Matrix<T>&, std::span<const std::uint32_t>);

SSA_INSTANTIATE(float)
SSA_INSTANTIATE(double)
#undef SSA_INSTANTIATE

}  // namespace ssa
