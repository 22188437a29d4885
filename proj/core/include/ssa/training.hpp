#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ssa/dataset.hpp"
#include "ssa/network.hpp"

namespace ssa {

template <typename T>
struct LossResult {
  double loss = 0.0;
  Matrix<T> grad_logits;
};

/// Mean over the batch of -log softmax(logits)[label], max-subtracted.
template <typename T>
LossResult<T> cross_entropy(const Matrix<T>& logits, std::span<const std::uint32_t> labels);

struct SgdConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-4;

  void validate() const;
};

/// v <- momentum * v + g + weight_decay * theta; theta <- theta - lr * v.
template <typename T>
void sgd_step(std::span<T> params, std::span<const T> grads, std::span<T> velocity,
              const SgdConfig& config);

template <typename T>
void sgd_step(std::span<Parameter<T>* const> params, const SgdConfig& config);

struct TrainConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::size_t batch_size = 8;
  std::size_t epochs = 10;
  std::uint64_t seed = 7;
  SsaConfig shift_cap = SsaConfig::all_shifts();

  SgdConfig sgd() const { return {learning_rate, momentum, weight_decay}; }
  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  double train_acc = 0.0;
  double test_acc = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

struct History {
  std::vector<EpochRecord> epochs;

  /// "epoch,loss,train_acc,test_acc" followed by one row per epoch.
  std::string csv() const;
  void write_csv(const std::filesystem::path& path) const;
  const EpochRecord& last() const { return epochs.back(); }
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch SGD over `train`, shuffled each epoch from config.seed.
/// `loss` and `train_acc` are running means over the epoch's training-mode
/// batches; `test_acc` is eval-mode accuracy on `test` (0 when empty).
/// Throws DivergenceError on a non-finite loss.
History train(Network<float>& network, const LabeledSet& train, const LabeledSet& test,
              const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Eval-mode logits for every sample, computed in batches.
Matrix<float> predict_all(Network<float>& network, const FeatureMap<float>& inputs,
                          std::size_t batch_size = 32);

template <typename T>
std::size_t count_correct(const Matrix<T>& logits, std::span<const std::uint32_t> labels);

/// Fraction of samples whose arg-max logit (first maximum) equals the label.
double evaluate(Network<float>& network, const LabeledSet& data, std::size_t batch_size = 32);

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

// "SSAC" container, integers little-endian:
//   magic "SSAC", u8 version (1), u32 length + architecture text
//   (format_network_spec), u32 entry count, then per entry u32 name length,
//   name bytes and one SSAT tensor. Entries cover every parameter and
//   batch-norm running statistic.
void save_checkpoint(const std::filesystem::path& path, Network<float>& network);
std::unique_ptr<Network<float>> load_checkpoint(const std::filesystem::path& path);

}  // namespace ssa
