#include <algorithm>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"
#include "ssa/arch.hpp"
#include "ssa/errors.hpp"
#include "ssa/parallel.hpp"

namespace {

void add_data_options(CLI::App* cmd, ssanet::DataArgs& d) {
  cmd->add_option("--data", d.data, "\"motion\" (generated in memory), a gen-data directory or an .ssav file")
      ->capture_default_str();
  cmd->add_option("--n-per-class", d.n_per_class, "Motion clips per class")->capture_default_str();
  cmd->add_option("--noise", d.noise, "Motion noise standard deviation")->capture_default_str();
  cmd->add_option("--data-seed", d.data_seed, "Motion generator seed (defaults to --seed)");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

bool has_flag(const std::vector<std::string>& args, const std::string& flag) {
  return std::any_of(args.begin(), args.end(),
                     [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
}

// Replaces `--config FILE` by the file's key=value pairs, inserted as flags
// after the subcommand name. Blank lines and '#' comments are skipped; keys
// whose flag already appears on the command line are dropped.
std::vector<std::string> expand_config(std::vector<std::string> args, const std::vector<std::string>& subcommands) {
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw std::runtime_error("--config needs a file name");
      path = args[i + 1];
      args.erase(args.begin() + static_cast<long>(i), args.begin() + static_cast<long>(i) + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<long>(i));
      break;
    }
  }
  if (path.empty()) return args;
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  auto sub = std::find_first_of(args.begin() + 1, args.end(), subcommands.begin(), subcommands.end());
  if (sub == args.end()) throw std::runtime_error("--config needs a subcommand");
  std::vector<std::string> extra;
  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected key=value");
    }
    std::string key = trim(line.substr(0, eq));
    if (key.rfind("--", 0) == 0) key.erase(0, 2);
    const std::string flag = "--" + key;
    if (key.empty() || has_flag(args, flag)) continue;
    extra.push_back(flag);
    extra.push_back(trim(line.substr(eq + 1)));
  }
  args.insert(sub + 1, extra.begin(), extra.end());
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Framewise 2D convolution + SSA temporal layer toolkit"};
  app.name("ssanet");
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  app.add_option("--config", config_path,
                 "key=value file of subcommand options (keys are long flag names); command-line flags win");
  unsigned threads = 1;
  app.add_option("--threads", threads, "Worker threads for batch-parallel operations")
      ->check(CLI::Range(1u, 256u))
      ->capture_default_str();

  ssanet::EquivCheckArgs equiv;
  auto* equiv_cmd = app.add_subcommand("equiv-check", "Compare reference and cumulative SSA on random tensors");
  equiv_cmd->add_option("--trials", equiv.trials)->capture_default_str();
  equiv_cmd->add_option("--max-f", equiv.max_f)->capture_default_str();
  equiv_cmd->add_option("--seed", equiv.seed)->capture_default_str();
  equiv_cmd->add_option("--tolerance", equiv.tolerance)->capture_default_str();

  ssanet::ParamCountArgs pc;
  auto* pc_cmd = app.add_subcommand("param-count", "Per-layer parameter table of a named or described network");
  auto* arch_opt = pc_cmd->add_option("--arch", pc.arch, "Architecture name");
  auto* spec_opt = pc_cmd->add_option("--spec", pc.spec_file, "Architecture file")->check(CLI::ExistingFile);
  arch_opt->excludes(spec_opt);
  pc_cmd->add_option("--shift-cap", pc.shift_cap, "Override every block's shift cap (all or N)");
  pc_cmd->add_flag_callback("--list", [] {
    for (const auto& name : ssa::architecture_names()) std::cout << name << '\n';
    std::exit(0);
  }, "List known architecture names");

  ssanet::GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Write a synthetic motion or voxel dataset");
  gen_cmd->add_option("--kind", gen.kind, "motion or shapes")->check(CLI::IsMember({"motion", "shapes"}))
      ->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Output directory")->capture_default_str();
  gen_cmd->add_option("--n-per-class", gen.n_per_class)->capture_default_str();
  gen_cmd->add_option("--noise", gen.noise, "Motion noise standard deviation")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed)->capture_default_str();
  gen_cmd->add_option("--augment", gen.augment, "Augmented copies per voxel grid")->capture_default_str();

  ssanet::TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train with SGD and momentum; writes history.csv and model.ssac");
  train_cmd->add_option("--arch", tr.arch)->capture_default_str();
  train_cmd->add_option("--spec", tr.spec_file, "Architecture file (overrides --arch)")->check(CLI::ExistingFile);
  add_data_options(train_cmd, tr.data);
  train_cmd->add_option("--epochs", tr.epochs)->capture_default_str();
  train_cmd->add_option("--lr", tr.lr)->capture_default_str();
  train_cmd->add_option("--momentum", tr.momentum)->capture_default_str();
  train_cmd->add_option("--weight-decay", tr.weight_decay)->capture_default_str();
  train_cmd->add_option("--batch", tr.batch)->capture_default_str();
  train_cmd->add_option("--seed", tr.seed)->capture_default_str();
  train_cmd->add_option("--shift-cap", tr.shift_cap, "all or a maximum shift distance")->capture_default_str();
  train_cmd->add_option("--out", tr.out, "Output directory")->capture_default_str();

  ssanet::EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Test accuracy of a checkpoint");
  eval_cmd->add_option("--checkpoint", ev.checkpoint)->required()->check(CLI::ExistingFile);
  add_data_options(eval_cmd, ev.data);
  eval_cmd->add_option("--seed", ev.seed)->capture_default_str();
  eval_cmd->add_option("--batch", ev.batch)->capture_default_str();

  ssanet::GradCheckArgs gc;
  auto* gc_cmd = app.add_subcommand("grad-check", "Finite-difference gradient checks in double precision");
  gc_cmd->add_option("--target", gc.target)
      ->check(CLI::IsMember({"all", "ssa", "conv", "bn", "linear", "pool", "network"}))
      ->capture_default_str();
  gc_cmd->add_option("--seed", gc.seed)->capture_default_str();
  gc_cmd->add_option("--epsilon", gc.epsilon, "Step size (default 1e-4, 1e-5 for network)");
  gc_cmd->add_option("--tolerance", gc.tolerance, "Override the per-target tolerance");
  gc_cmd->add_option("--max-entries", gc.max_entries, "Entries per parameter group (0 = all)")
      ->capture_default_str();

  ssanet::BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "Time SSA and convolution paths; CSV op,shape,mean_ns,p95_ns");
  bench_cmd->add_option("--frames", bench.frames)->capture_default_str();
  bench_cmd->add_option("--channels", bench.channels)->capture_default_str();
  bench_cmd->add_option("--size", bench.size)->capture_default_str();
  bench_cmd->add_option("--batch", bench.batch)->capture_default_str();
  bench_cmd->add_option("--caps", bench.caps, "Comma-separated shift caps")->capture_default_str();
  bench_cmd->add_option("--repeats", bench.repeats)->capture_default_str();
  bench_cmd->add_option("--out", bench.out, "Also write the CSV here");
  bench_cmd->add_option("--seed", bench.seed)->capture_default_str();

  ssanet::DumpTensorArgs dump;
  auto* dump_cmd = app.add_subcommand("dump-tensor", "Print an SSAT file's header and statistics");
  dump_cmd->add_option("path", dump.path, "Tensor file (relative paths also searched in $SSA_GOLDEN_DIR)")
      ->required();
  dump_cmd->add_option("--head", dump.head, "Also print the first N values")->capture_default_str();

  std::vector<std::string> args;
  try {
    std::vector<std::string> names;
    for (const CLI::App* sub : app.get_subcommands({})) names.push_back(sub->get_name());
    args = expand_config({argv, argv + argc}, names);
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return ssanet::kUsageError;
  }
  std::vector<char*> expanded;
  for (std::string& a : args) expanded.push_back(a.data());

  try {
    app.parse(static_cast<int>(expanded.size()), expanded.data());
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return ssanet::kUsageError;
  }

  ssa::set_num_threads(threads);
  tr.data.data_seed_set = train_cmd->count("--data-seed") > 0;
  ev.data.data_seed_set = eval_cmd->count("--data-seed") > 0;
  try {
    if (*equiv_cmd) return ssanet::run_equiv_check(equiv, std::cout);
    if (*pc_cmd) return ssanet::run_param_count(pc, std::cout);
    if (*gen_cmd) return ssanet::run_gen_data(gen, std::cout);
    if (*train_cmd) return ssanet::run_train(tr, std::cout);
    if (*eval_cmd) return ssanet::run_eval(ev, std::cout);
    if (*gc_cmd) return ssanet::run_grad_check(gc, std::cout);
    if (*bench_cmd) return ssanet::run_bench(bench, std::cout);
    if (*dump_cmd) return ssanet::run_dump_tensor(dump, std::cout);
  } catch (const ssa::DivergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return ssanet::kCheckFailed;
  } catch (const std::invalid_argument& e) {  // SpecError, DimensionError
    std::cerr << "error: " << e.what() << '\n';
    return ssanet::kUsageError;
  } catch (const ssa::FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return ssanet::kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return ssanet::kCheckFailed;
  }
  return ssanet::kUsageError;
}
