#include "grpo/harness.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "grpo/errors.hpp"
#include "grpo/kernels.hpp"
#include "grpo/metrics.hpp"
#include "grpo/structure_parser.hpp"

namespace grpo {

namespace {

std::string timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

std::string checkpoint_name(std::size_t step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "step_%06zu.ckpt", step);
  return buf;
}

PolicyParams initial_params(const RunConfig& config, const Vocabulary& vocab, const std::vector<Task>& train) {
  const std::size_t task_dim = task_feature_dim(config.mode, config.n_options);
  PolicyParams params(vocab.size(), task_dim, config.window);
  double mass = 0.0;
  for (const auto& t : train) {
    for (double f : t.features) mass += f;
  }
  mass /= static_cast<double>(train.size());
  if (!(mass > 0.0)) mass = 1.0;
  if (config.init == InitKind::format_prior) {
    params = format_prior(vocab, task_dim, config.window, config.prior_strength, mass);
  }
  if (config.percept_strength > 0.0) {
    add_percept_prior(params, vocab, config.mode, config.n_options, config.percept_strength, mass);
  }
  return params;
}

}  // namespace

Setup build_setup(const RunConfig& config) {
  config.validate();
  auto vocab = Vocabulary::standard(config.n_options, config.fillers);
  auto train = gen_tasks({config.mode, config.n_train, config.n_options, config.noise, config.train.seed});
  auto eval = gen_tasks({config.mode, config.n_eval, config.n_options, config.noise, config.eval_seed});
  auto params = initial_params(config, vocab, train);
  PolicySnapshot initial(std::move(params), vocab, SnapshotRole::reference);
  return Setup{std::move(vocab), std::move(initial), std::move(train), std::move(eval)};
}

TrainResult run_training(const RunConfig& config, std::ostream& log) {
  auto setup = build_setup(config);
  std::filesystem::create_directories(config.out_dir);

  const auto info_path = config.out_dir / "run_info.txt";
  {
    std::ofstream info(info_path);
    info << "started = " << timestamp() << "\n"
         << "kernel_backend = " << kernels::backend_name(kernels::active_backend()) << "\n";
  }
  {
    std::ofstream cfg(config.out_dir / "config.txt");
    cfg << format_run_config(config);
  }

  TrainResult result{.metrics = {},
                     .final_policy = setup.initial,
                     .eval_accuracy = 0.0,
                     .metrics_csv = config.out_dir / "metrics.csv",
                     .final_checkpoint = config.out_dir / "final.ckpt"};
  std::ofstream csv(result.metrics_csv, std::ios::binary | std::ios::trunc);
  if (!csv) throw std::runtime_error("cannot open " + result.metrics_csv.string() + " for writing");
  csv << kMetricsHeader << '\n';

  Trainer trainer(config.train, setup.initial);
  std::vector<Task> batch;
  std::optional<std::filesystem::path> last_checkpoint;
  for (std::size_t step = 0; step < config.train.steps; ++step) {
    batch.clear();
    for (auto i : select_batch(config.train.seed, step, config.batch_size, setup.train_tasks.size())) {
      batch.push_back(setup.train_tasks[i]);
    }
    StepMetrics m;
    try {
      m = trainer.train_step(batch);
    } catch (const NumericalError& e) {
      csv.flush();
      log << "numerical error: " << e.what() << "\n";
      if (last_checkpoint) log << "last good checkpoint: " << last_checkpoint->string() << "\n";
      throw;
    }
    csv << format_metrics_row(m) << '\n';
    csv.flush();
    result.metrics.push_back(m);

    if (config.checkpoint_every && (step + 1) % config.checkpoint_every == 0) {
      auto path = config.out_dir / checkpoint_name(step + 1);
      write_checkpoint(trainer.snapshot(), path);
      last_checkpoint = path;
    }
    if (config.log_every && (step % config.log_every == 0 || step + 1 == config.train.steps)) {
      const auto& sample = trainer.last_groups().front();
      log << "step " << step << std::fixed << std::setprecision(3) << " reward=" << m.mean_total_reward
          << " acc=" << m.mean_acc_reward << " fmt=" << m.mean_fmt_reward << " kl=" << std::setprecision(4)
          << m.mean_kl << " len=" << std::setprecision(2) << m.mean_completion_len << " | gold "
          << sample.task->gold.to_string() << ": " << sample.completions.front().text << "\n"
          << std::defaultfloat;
    }
  }

  result.final_policy = trainer.snapshot();
  write_checkpoint(result.final_policy, result.final_checkpoint);
  result.eval_accuracy = evaluate(result.final_policy, setup.eval_tasks, config.train.max_len);

  std::ofstream info(info_path, std::ios::app);
  info << "finished = " << timestamp() << "\n";
  return result;
}

// -- CLI ----------------------------------------------------------------------

namespace {

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides,
              const std::string& out_dir, std::ostream& out) {
  RunConfig config = config_path.empty() ? RunConfig{} : load_run_config(config_path);
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + o + "' is not key=value");
    apply_setting(config, o.substr(0, eq), o.substr(eq + 1));
  }
  if (!out_dir.empty()) config.out_dir = out_dir;
  config.validate();

  const auto result = run_training(config, out);
  double tail = 0.0;
  const std::size_t n_tail = std::min<std::size_t>(20, result.metrics.size());
  for (std::size_t i = result.metrics.size() - n_tail; i < result.metrics.size(); ++i) {
    tail += result.metrics[i].mean_acc_reward;
  }
  if (n_tail) tail /= static_cast<double>(n_tail);
  out << "final steps=" << result.metrics.size() << std::fixed << std::setprecision(4)
      << " train_acc_last20=" << tail << " eval_accuracy=" << result.eval_accuracy
      << " checkpoint=" << result.final_checkpoint.string() << "\n"
      << std::defaultfloat;
  return 0;
}

struct EvalSource {
  std::string manifest;
  std::string mode = "xmodal";
  std::size_t n = 1911;
  std::size_t n_options = 4;
  double noise = 0.1;
  std::uint64_t seed = 1;
  std::size_t max_len = 24;
};

int cmd_eval(const std::string& checkpoint, const EvalSource& src, std::ostream& out) {
  if (!std::filesystem::exists(checkpoint)) throw std::runtime_error("checkpoint not found: " + checkpoint);
  const auto snapshot = read_checkpoint(std::filesystem::path(checkpoint));
  std::vector<Task> tasks;
  if (!src.manifest.empty()) {
    tasks = load_manifest(src.manifest, snapshot.params().task_dim());
  } else {
    tasks = gen_tasks({parse_task_mode(src.mode), src.n, src.n_options, src.noise, src.seed});
  }
  for (const auto& t : tasks) {
    if (t.features.size() != snapshot.params().task_dim()) {
      throw std::runtime_error("checkpoint/task mismatch: checkpoint expects " +
                               std::to_string(snapshot.params().task_dim()) + " task features, task " + t.id +
                               " has " + std::to_string(t.features.size()));
    }
    if (t.option_count() > snapshot.vocab().letter_count()) {
      throw std::runtime_error("checkpoint/vocabulary mismatch: task " + t.id + " has " +
                               std::to_string(t.option_count()) + " options, vocabulary has " +
                               std::to_string(snapshot.vocab().letter_count()) + " letters");
    }
  }
  const double acc = evaluate(snapshot, tasks, src.max_len);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", acc);
  out << buf << "\n";
  return 0;
}

int cmd_gen_data(const std::string& mode, std::size_t n, std::size_t n_options, double noise,
                 std::uint64_t seed, const std::string& path, std::ostream& out) {
  const auto tasks = gen_tasks({parse_task_mode(mode), n, n_options, noise, seed});
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  write_manifest(tasks, p);
  out << "wrote " << tasks.size() << " tasks to " << path << "\n";
  return 0;
}

int cmd_plot(const std::string& csv, const std::string& path, std::ostream& out) {
  const auto rows = read_metrics_csv(csv);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << render_training_svg(rows);
  if (!f) throw std::runtime_error("failed writing " + path);
  out << "wrote " << path << " (" << rows.size() << " steps)\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"GRPO training for structured multiple-choice answering on a toy policy", "grpo_echo"};
  app.require_subcommand(1);

  std::string kernel = "auto";
  app.add_option("--kernels", kernel, "Kernel backend: auto, scalar or avx2")
      ->check(CLI::IsMember({"auto", "scalar", "avx2"}));

  auto* train = app.add_subcommand("train", "Run GRPO training");
  std::string config_path, out_dir;
  std::vector<std::string> overrides;
  train->add_option("-c,--config", config_path, "key = value config file")->check(CLI::ExistingFile);
  train->add_option("-s,--set", overrides, "Override a config key (key=value), repeatable");
  train->add_option("-o,--out", out_dir, "Output directory (overrides out_dir)");

  auto* eval = app.add_subcommand("eval", "Greedy-decode accuracy of a checkpoint");
  std::string checkpoint;
  EvalSource src;
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval->add_option("--manifest", src.manifest, "Line-delimited JSON manifest (default: synthetic split)");
  eval->add_option("--mode", src.mode, "Synthetic mode")->check(CLI::IsMember({"unimodal", "xmodal"}));
  eval->add_option("--n", src.n, "Synthetic task count");
  eval->add_option("--n-options", src.n_options, "Options per task");
  eval->add_option("--noise", src.noise, "Feature noise std");
  eval->add_option("--seed", src.seed, "Synthetic split seed");
  eval->add_option("--max-len", src.max_len, "Decoding length limit");

  auto* gen = app.add_subcommand("gen-data", "Write a synthetic manifest");
  std::string gen_mode = "xmodal", gen_out;
  std::size_t gen_n = 100, gen_options = 4;
  double gen_noise = 0.1;
  std::uint64_t gen_seed = 0;
  gen->add_option("--mode", gen_mode, "unimodal or xmodal")->check(CLI::IsMember({"unimodal", "xmodal"}));
  gen->add_option("--n", gen_n, "Number of tasks");
  gen->add_option("--n-options", gen_options, "Options per task");
  gen->add_option("--noise", gen_noise, "Feature noise std");
  gen->add_option("--seed", gen_seed, "Generator seed");
  gen->add_option("--out", gen_out, "Output manifest path")->required();

  auto* plot = app.add_subcommand("plot", "Render metrics.csv as a two-panel SVG");
  std::string plot_csv, plot_out;
  plot->add_option("--csv", plot_csv, "metrics.csv from a training run")->required();
  plot->add_option("--out", plot_out, "Output SVG path")->required();

  std::vector<std::string> argv_store;
  argv_store.reserve(args.size() + 1);
  argv_store.emplace_back("grpo_echo");
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }

  if (kernel == "scalar") {
    kernels::select_backend(kernels::Backend::scalar);
  } else if (kernel == "avx2") {
    if (!kernels::select_backend(kernels::Backend::avx2)) {
      err << "error: avx2 kernels are not available on this machine\n";
      return 1;
    }
  } else {
    kernels::select_best_backend();
  }

  try {
    if (*train) return cmd_train(config_path, overrides, out_dir, out);
    if (*eval) return cmd_eval(checkpoint, src, out);
    if (*gen) return cmd_gen_data(gen_mode, gen_n, gen_options, gen_noise, gen_seed, gen_out, out);
    if (*plot) return cmd_plot(plot_csv, plot_out, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace grpo
