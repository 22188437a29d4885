#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace ssanet {

enum ExitCode : int { kOk = 0, kCheckFailed = 1, kUsageError = 2 };

struct EquivCheckArgs {
  std::size_t trials = 200;
  std::size_t max_f = 16;
  std::uint64_t seed = 1;
  double tolerance = 1e-5;
};

struct ParamCountArgs {
  std::string arch;
  std::string spec_file;
  std::string shift_cap;
};

struct GenDataArgs {
  std::string kind = "motion";
  std::string out = "data";
  std::size_t n_per_class = 500;
  double noise = 0.05;
  std::uint64_t seed = 7;
  std::size_t augment = 0;
};

/// Dataset selection shared by train and eval.
struct DataArgs {
  std::string data = "motion";
  std::size_t n_per_class = 500;
  double noise = 0.05;
  std::uint64_t data_seed = 7;
  bool data_seed_set = false;
};

struct TrainArgs {
  std::string arch = "toy_ssa_net";
  std::string spec_file;
  DataArgs data;
  std::size_t epochs = 10;
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::size_t batch = 8;
  std::uint64_t seed = 7;
  std::string shift_cap = "all";
  std::string out = "run";
};

struct EvalArgs {
  std::string checkpoint;
  DataArgs data;
  std::uint64_t seed = 7;
  std::size_t batch = 32;
};

struct GradCheckArgs {
  std::string target = "all";
  std::uint64_t seed = 1;
  double epsilon = 0.0;
  double tolerance = 0.0;
  std::size_t max_entries = 24;
};

struct BenchArgs {
  std::size_t frames = 16;
  std::size_t channels = 16;
  std::size_t size = 16;
  std::size_t batch = 2;
  std::string caps = "1,2,4,8,15";
  std::size_t repeats = 20;
  std::string out;
  std::uint64_t seed = 1;
};

struct DumpTensorArgs {
  std::string path;
  std::size_t head = 0;
};

int run_equiv_check(const EquivCheckArgs& args, std::ostream& out);
int run_param_count(const ParamCountArgs& args, std::ostream& out);
int run_gen_data(const GenDataArgs& args, std::ostream& out);
int run_train(const TrainArgs& args, std::ostream& out);
int run_eval(const EvalArgs& args, std::ostream& out);
int run_grad_check(const GradCheckArgs& args, std::ostream& out);
int run_bench(const BenchArgs& args, std::ostream& out);
int run_dump_tensor(const DumpTensorArgs& args, std::ostream& out);

}  // namespace ssanet
