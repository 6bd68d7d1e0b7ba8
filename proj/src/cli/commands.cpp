#include "sgt/cli/commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "sgt/errors.hpp"
#include "sgt/hrl/transfer.hpp"
#include "sgt/mapper/mapper.hpp"
#include "sgt/meteor.hpp"
#include "sgt/nn/checkpoint.hpp"
#include "sgt/oracle/dataset.hpp"

namespace sgt::cli {

namespace fs = std::filesystem;

namespace {

constexpr int kSmokeEpisodes = 2000;
constexpr int kSmokeEpochs = 50;

class CliError : public std::runtime_error {
 public:
  CliError(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ExitCode code() const { return code_; }

 private:
  ExitCode code_;
};

std::string_view category(ExitCode code) {
  switch (code) {
    case kOk:
      return "ok";
    case kUsage:
      return "usage";
    case kConfig:
      return "config";
    case kIo:
      return "io";
    case kParse:
      return "parse";
    case kInput:
      return "input";
    case kInternal:
      break;
  }
  return "internal";
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

// Shortest text that parses back to the same double.
std::string exact(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

// Resolved configuration echoed at the top of every artifact.
class Echo {
 public:
  explicit Echo(std::string command) : command_(std::move(command)) {}

  void add(const std::string& key, const std::string& value) { kv_.emplace_back(key, value); }
  void add(const std::string& key, const char* value) { add(key, std::string(value)); }
  void add(const std::string& key, double value) { add(key, exact(value)); }
  void add(const std::string& key, int value) { add(key, std::to_string(value)); }
  void add(const std::string& key, std::size_t value) { add(key, std::to_string(value)); }
  void add(const std::string& key, bool value) { add(key, value ? "true" : "false"); }

  std::vector<std::string> lines() const {
    std::vector<std::string> out{"sgt " + command_ + " format=" + std::to_string(kArtifactFormat)};
    for (const auto& [k, v] : kv_) out.push_back(k + "=" + v);
    return out;
  }
  std::string header() const {
    std::string out;
    for (const auto& l : lines()) out += "# " + l + "\n";
    return out;
  }
  const std::vector<std::pair<std::string, std::string>>& entries() const { return kv_; }

 private:
  std::string command_;
  std::vector<std::pair<std::string, std::string>> kv_;
};

void write_file(const fs::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path.string());
  f << content;
  f.flush();
  if (!f) throw IoError("write failed: " + path.string());
}

std::ifstream open_input(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for reading: " + path.string());
  return f;
}

oracle::Dataset load_dataset(const std::string& path) {
  if (path.empty()) throw CliError(kConfig, "--dataset is required");
  auto f = open_input(path);
  return oracle::read_dataset(f, path);
}

std::string join_squares(const oracle::SubgoalSequence& seq) {
  std::string out;
  for (const auto& sq : seq.tokens) {
    if (!out.empty()) out += ' ';
    out += sq.name();
  }
  return out;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Runs jobs[0..n) on up to `threads` workers; the first failure is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn fn) {
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::size_t i = next++; i < n && !failed; i = next++) {
      try {
        fn(i);
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    }
  };
  const unsigned t = std::max(1U, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, n))));
  if (t == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < t; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------- options

struct Common {
  std::uint64_t seed = 1;
  std::string config;
  std::string out = ".";
  bool smoke = false;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "Global seed")->capture_default_str();
  sub->add_option("--config", c.config, "Flat key=value file; flags given on the command line win");
  sub->add_option("--out", c.out, "Output directory")->capture_default_str();
  sub->add_flag("--smoke", c.smoke, "Cap episodes at 2000 and epochs at 50");
}

void add_mapper_options(CLI::App* sub, mapper::MapperHyperparams& hp, mapper::MapperConfig& mc) {
  sub->add_option("--epochs", hp.epochs)->capture_default_str();
  sub->add_option("--lr", hp.learning_rate)->capture_default_str();
  sub->add_option("--batch", hp.batch_size)->capture_default_str();
  sub->add_option("--clip", hp.clip_norm)->capture_default_str();
  sub->add_option("--embed-dim", mc.embed_dim)->capture_default_str();
  sub->add_option("--encoder-hidden", mc.encoder_hidden)->capture_default_str();
  sub->add_option("--bridge-dim", mc.bridge_dim)->capture_default_str();
  sub->add_option("--decoder-hidden", mc.decoder_hidden)->capture_default_str();
  sub->add_option("--max-length", mc.max_length)->capture_default_str();
  sub->add_option("--coordinate-features", mc.coordinate_features, "File/rank features on square tokens")
      ->capture_default_str();
}

void echo_mapper(Echo& e, const mapper::MapperHyperparams& hp, const mapper::MapperConfig& mc) {
  e.add("epochs", hp.epochs);
  e.add("lr", hp.learning_rate);
  e.add("batch", hp.batch_size);
  e.add("clip", hp.clip_norm);
  e.add("embed-dim", mc.embed_dim);
  e.add("encoder-hidden", mc.encoder_hidden);
  e.add("bridge-dim", mc.bridge_dim);
  e.add("decoder-hidden", mc.decoder_hidden);
  e.add("max-length", mc.max_length);
  e.add("coordinate-features", mc.coordinate_features);
}

void validate_mapper(const mapper::MapperHyperparams& hp, const mapper::MapperConfig& mc) {
  try {
    hp.validate();
  } catch (const std::invalid_argument& ex) {
    throw CliError(kConfig, ex.what());
  }
  if (mc.embed_dim == 0 || mc.encoder_hidden == 0 || mc.bridge_dim == 0 || mc.decoder_hidden == 0 ||
      mc.max_length < 2)
    throw CliError(kConfig, "mapper dimensions must be positive and max-length at least 2");
}

// ---------------------------------------------------------------- gen-dataset

struct GenOptions {
  std::string start = "d4";
};

int cmd_gen_dataset(const Common& c, const GenOptions& o, std::ostream& out) {
  const auto start = chess::parse_square(o.start);
  if (!start) throw CliError(kConfig, "bad start square '" + o.start + "'");
  Echo echo("gen-dataset");
  echo.add("seed", c.seed);
  echo.add("smoke", c.smoke);
  echo.add("start", start->name());

  oracle::Dataset ds;
  try {
    ds = oracle::build_dataset(*start, c.seed);
  } catch (const std::invalid_argument& ex) {
    throw CliError(kInput, ex.what());
  }
  std::ostringstream data;
  oracle::write_dataset(data, ds, echo.lines());
  std::ostringstream tasks;
  tasks << echo.header();
  std::vector<chess::Task> list;
  for (const auto& e : ds.entries) list.push_back(e.task);
  oracle::write_tasks(tasks, list);

  const fs::path dir(c.out);
  write_file(dir / "dataset.txt", data.str());
  write_file(dir / "tasks.txt", tasks.str());

  const auto stats = oracle::summarize(ds);
  out << "tasks=" << stats.tasks << " train=" << stats.train << " test=" << stats.test << '\n';
  out << "expert_mean_length=" << fixed6(stats.expert_mean_length)
      << " learner_mean_length=" << fixed6(stats.learner_mean_length) << '\n';
  out << "wrote " << (dir / "dataset.txt").string() << ' ' << (dir / "tasks.txt").string() << '\n';
  return kOk;
}

// ---------------------------------------------------------------- train-mapper

struct MapperOptions {
  std::string dataset;
  mapper::MapperHyperparams hp;
  mapper::MapperConfig mc;
  int k = 10;
  unsigned threads = 1;
};

int cmd_train_mapper(const Common& c, MapperOptions o, std::ostream& out) {
  o.hp.seed = c.seed;
  if (c.smoke) o.hp.epochs = std::min(o.hp.epochs, kSmokeEpochs);
  validate_mapper(o.hp, o.mc);
  const auto ds = load_dataset(o.dataset);

  Echo echo("train-mapper");
  echo.add("seed", c.seed);
  echo.add("smoke", c.smoke);
  echo.add("dataset", o.dataset);
  echo.add("dataset-seed", ds.seed);
  echo_mapper(echo, o.hp, o.mc);

  const auto train = ds.select(ds.train_ids);
  const auto test = ds.select(ds.test_ids);
  const auto result = mapper::train_mapper(train, o.hp, o.mc);

  nn::Checkpoint ckpt = result.model.to_checkpoint();
  ckpt.meta.emplace_back("artifact", "sgt-train-mapper-format-" + std::to_string(kArtifactFormat));
  for (const auto& [k, v] : echo.entries()) {
    if (v.find_first_of(" \t\n") != std::string::npos)
      throw CliError(kConfig, "config value for '" + k + "' must not contain whitespace");
    ckpt.meta.emplace_back("config." + k, v);
  }
  std::ostringstream ck;
  nn::write_checkpoint(ck, ckpt);

  std::ostringstream loss;
  loss << echo.header() << "epoch,loss\n";
  char buf[64];
  for (std::size_t i = 0; i < result.loss_history.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.9g", result.loss_history[i]);
    loss << (i + 1) << ',' << buf << '\n';
  }

  const fs::path dir(c.out);
  write_file(dir / "mapper.ckpt", ck.str());
  write_file(dir / "mapper_loss.csv", loss.str());

  out << "epochs=" << o.hp.epochs << " final_loss=" << fixed6(result.loss_history.back()) << '\n';
  out << "train_meteor=" << fixed6(mapper::corpus_score(result.model, train)) << '\n';
  out << "test_meteor=" << fixed6(mapper::corpus_score(result.model, test)) << '\n';
  return kOk;
}

// ---------------------------------------------------------------- eval-mapper

int cmd_eval_mapper(const Common& c, MapperOptions o, bool k_given, std::ostream& out) {
  o.hp.seed = c.seed;
  if (c.smoke) {
    o.hp.epochs = std::min(o.hp.epochs, kSmokeEpochs);
    if (!k_given) o.k = 2;
  }
  validate_mapper(o.hp, o.mc);
  const auto ds = load_dataset(o.dataset);
  if (o.k < 2 || o.k > static_cast<int>(ds.entries.size()))
    throw CliError(kConfig, "k must lie in [2, " + std::to_string(ds.entries.size()) + "]");

  Echo echo("eval-mapper");
  echo.add("seed", c.seed);
  echo.add("smoke", c.smoke);
  echo.add("dataset", o.dataset);
  echo.add("dataset-seed", ds.seed);
  echo.add("k", o.k);
  echo_mapper(echo, o.hp, o.mc);

  const auto report = mapper::evaluate_kfold(ds, o.k, o.hp, o.mc, o.threads);
  std::ostringstream body;
  body << "fold,score\n";
  for (std::size_t f = 0; f < report.fold_scores.size(); ++f)
    body << (f + 1) << ',' << fixed6(report.fold_scores[f]) << '\n';
  body << "mean," << fixed6(report.mean) << '\n';

  write_file(fs::path(c.out) / "kfold.csv", echo.header() + body.str());
  out << body.str();
  return kOk;
}

// ---------------------------------------------------------------- transfer

struct TransferOptions {
  std::string dataset;
  std::string checkpoint;
  std::string task = "all-test";
  std::string modes = "all";
  hrl::TrainConfig cfg;
  bool raw = false;
  unsigned threads = 1;
};

std::string error_case(int errors) {
  if (errors == 0) return "0-errors";
  if (errors <= 2) return "1-2-errors";
  return "3+-errors";
}

std::string curve_name(int task, hrl::TransferMode mode, int trial) {
  return "task" + std::to_string(task) + "_" + std::string(hrl::mode_name(mode)) + "_trial" +
         std::to_string(trial) + ".csv";
}

int cmd_transfer(const Common& c, TransferOptions o, std::ostream& out, std::ostream& err) {
  hrl::TrainConfig& cfg = o.cfg;
  cfg.seed = c.seed;
  if (c.smoke) {
    cfg.episodes = std::min(cfg.episodes, kSmokeEpisodes);
    cfg.warm_epochs = std::min(cfg.warm_epochs, kSmokeEpochs);
    cfg.low_pretrain_epochs = std::min(cfg.low_pretrain_epochs, kSmokeEpochs);
  }
  try {
    cfg.validate();
  } catch (const std::invalid_argument& ex) {
    throw CliError(kConfig, ex.what());
  }

  std::vector<hrl::TransferMode> modes;
  if (o.modes == "all") {
    modes.assign(std::begin(hrl::kAllModes), std::end(hrl::kAllModes));
  } else {
    for (const auto& name : split_list(o.modes)) {
      const auto m = hrl::parse_mode(name);
      if (!m) throw CliError(kConfig, "unknown mode '" + name + "'");
      if (std::find(modes.begin(), modes.end(), *m) == modes.end()) modes.push_back(*m);
    }
    // Canonical order regardless of how they were listed.
    std::sort(modes.begin(), modes.end());
  }
  if (modes.empty()) throw CliError(kConfig, "no modes selected");

  const auto ds = load_dataset(o.dataset);
  std::vector<int> task_ids;
  if (o.task == "all-test") {
    task_ids = ds.test_ids;
  } else {
    for (const auto& item : split_list(o.task)) {
      int id = -1;
      const auto r = std::from_chars(item.data(), item.data() + item.size(), id);
      if (r.ec != std::errc() || r.ptr != item.data() + item.size() || id < 0 ||
          id >= static_cast<int>(ds.entries.size()))
        throw CliError(kInput, "bad task id '" + item + "'");
      task_ids.push_back(id);
    }
  }
  if (task_ids.empty()) throw CliError(kInput, "no tasks selected");
  for (int id : task_ids)
    if (ds.entry(id).split == oracle::Split::Train)
      err << "warning: task " << id << " is in the training split; the mapper has seen its demonstrations\n";

  const bool needs_mapper =
      std::find(modes.begin(), modes.end(), hrl::TransferMode::MappingWarm) != modes.end();
  std::optional<mapper::MappingModel> model;
  if (!o.checkpoint.empty() && fs::exists(o.checkpoint)) {
    model = mapper::MappingModel::load(o.checkpoint);
  } else if (needs_mapper) {
    throw CliError(kInput, o.checkpoint.empty() ? "mapping-warm mode needs --checkpoint"
                                                : "missing checkpoint " + o.checkpoint);
  }

  Echo echo("transfer");
  echo.add("seed", c.seed);
  echo.add("smoke", c.smoke);
  echo.add("dataset", o.dataset);
  echo.add("dataset-seed", ds.seed);
  echo.add("checkpoint", o.checkpoint);
  echo.add("task", o.task);
  echo.add("modes", o.modes);
  echo.add("episodes", cfg.episodes);
  echo.add("horizon", cfg.horizon);
  echo.add("v-noise", cfg.v_noise);
  echo.add("warm-epochs", cfg.warm_epochs);
  echo.add("warm-lr", cfg.warm_lr);
  echo.add("subgoal-budget", cfg.subgoal_budget);
  echo.add("gamma", cfg.gamma);
  echo.add("actor-lr", cfg.actor_lr);
  echo.add("critic-lr", cfg.critic_lr);
  echo.add("low-pretrain-epochs", cfg.low_pretrain_epochs);
  echo.add("low-pretrain-lr", cfg.low_pretrain_lr);
  echo.add("pretrain-batch", cfg.pretrain_batch);
  echo.add("clip", cfg.clip_norm);
  echo.add("hidden", cfg.hidden);
  echo.add("trials", cfg.trials);
  echo.add("bin-size", cfg.bin_size);
  echo.add("per-step-high-reward", cfg.per_step_high_reward);
  echo.add("raw", o.raw);

  // The low level is shared by every mode: pretrained once on training-split knight demonstrations.
  std::vector<oracle::Trajectory> demos;
  std::vector<chess::Task> demo_tasks;
  for (int id : ds.train_ids) {
    const auto& e = ds.entry(id);
    try {
      demos.push_back(oracle::trajectory_from_subgoals(chess::PieceKind::Knight, e.task, e.learner));
    } catch (const std::invalid_argument& ex) {
      throw CliError(kInput, "task " + std::to_string(id) + ": knight demonstration is not a legal path: " + ex.what());
    }
    demo_tasks.push_back(e.task);
  }
  const hrl::LowPolicy low =
      hrl::pretrain_low(hrl::LowPolicy(derive_seed(cfg.seed, "low-init"), cfg.hidden), demos, demo_tasks, cfg);

  struct Job {
    int task;
    hrl::TransferMode mode;
    std::vector<hrl::LearningCurve> curves;
  };
  std::vector<Job> jobs;
  for (int id : task_ids)
    for (auto m : modes) jobs.push_back({id, m, {}});
  parallel_for(jobs.size(), o.threads, [&](std::size_t i) {
    const auto& e = ds.entry(jobs[i].task);
    hrl::BaselineInputs in{model ? &*model : nullptr, e.expert, &low};
    jobs[i].curves = hrl::run_baseline(jobs[i].mode, e.task, in, cfg);
  });

  const fs::path dir(c.out);
  for (const auto& job : jobs) {
    for (const auto& curve : job.curves) {
      std::ostringstream s;
      hrl::write_curve(s, curve, echo.lines());
      write_file(dir / "curves" / curve_name(job.task, job.mode, curve.trial), s.str());
      if (o.raw) {
        std::ostringstream r;
        r << echo.header();
        hrl::write_raw_returns(r, curve);
        write_file(dir / "raw" / curve_name(job.task, job.mode, curve.trial), r.str());
      }
    }
  }

  std::ostringstream summary;
  summary << echo.header();
  summary << "task,split,errors,case,meteor,prediction,oracle";
  for (auto m : hrl::kAllModes) summary << ',' << hrl::mode_name(m);
  summary << '\n';
  for (int id : task_ids) {
    const auto& e = ds.entry(id);
    summary << id << ',' << (e.split == oracle::Split::Train ? "train" : "test") << ',';
    out << "task=" << id;
    if (model) {
      const auto pred = model->predict(e.expert, e.task);
      const int errors = metrics::prediction_errors(e.learner, pred);
      const double score = metrics::meteor(e.learner, pred);
      summary << errors << ',' << error_case(errors) << ',' << fixed6(score) << ',' << join_squares(pred) << ',';
      out << " errors=" << errors << " case=" << error_case(errors) << " meteor=" << fixed6(score);
    } else {
      summary << ",,,,";
    }
    summary << join_squares(e.learner);
    for (auto m : hrl::kAllModes) {
      summary << ',';
      for (const auto& job : jobs) {
        if (job.task != id || job.mode != m) continue;
        double total = 0.0;
        for (const auto& curve : job.curves) total += curve.binned().back();
        const double mean = total / static_cast<double>(job.curves.size());
        summary << fixed6(mean);
        out << ' ' << hrl::mode_name(m) << '=' << fixed6(mean);
      }
    }
    summary << '\n';
    out << '\n';
  }
  write_file(dir / "transfer_summary.csv", summary.str());
  out << "wrote " << jobs.size() * static_cast<std::size_t>(cfg.trials) << " curves to " << (dir / "curves").string()
      << '\n';
  return kOk;
}

// ---------------------------------------------------------------- export-plots

struct ExportOptions {
  std::string curves;
};

int cmd_export_plots(const Common& c, const ExportOptions& o, std::ostream& out, std::ostream& err) {
  const fs::path src = o.curves.empty() ? fs::path(c.out) / "curves" : fs::path(o.curves);
  std::vector<fs::path> files;
  std::error_code ec;
  if (fs::is_directory(src, ec)) {
    for (const auto& entry : fs::directory_iterator(src))
      if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
  } else if (fs::is_regular_file(src, ec)) {
    files.push_back(src);
  } else {
    throw IoError("no curve files at " + src.string());
  }
  if (files.empty()) throw CliError(kInput, "no curve files in " + src.string());

  // task -> mode -> trial -> record
  std::map<int, std::map<hrl::TransferMode, std::map<int, hrl::CurveRecord>>> grouped;
  for (const auto& path : files) {
    auto f = open_input(path);
    hrl::CurveRecord rec = hrl::read_curve(f, path.string());
    auto& slot = grouped[rec.task_id][rec.mode];
    if (slot.count(rec.trial))
      throw CliError(kInput, "duplicate curve for task " + std::to_string(rec.task_id) + " mode " +
                                 std::string(hrl::mode_name(rec.mode)) + " trial " + std::to_string(rec.trial));
    slot.emplace(rec.trial, std::move(rec));
  }

  Echo echo("export-plots");
  echo.add("seed", c.seed);
  echo.add("smoke", c.smoke);
  echo.add("curves", o.curves);

  const fs::path dir = fs::path(c.out) / "plots";
  for (const auto& [task, by_mode] : grouped) {
    std::set<int> all_trials;
    std::optional<std::size_t> bins;
    std::optional<int> bin_size;
    for (const auto& [mode, by_trial] : by_mode) {
      for (const auto& [trial, rec] : by_trial) {
        all_trials.insert(trial);
        if (bins && *bins != rec.bins.size())
          throw CliError(kInput, "task " + std::to_string(task) + ": mismatched bin counts (" +
                                     std::to_string(*bins) + " vs " + std::to_string(rec.bins.size()) + ")");
        if (bin_size && *bin_size != rec.bin_size)
          throw CliError(kInput, "task " + std::to_string(task) + ": mismatched bin sizes");
        bins = rec.bins.size();
        bin_size = rec.bin_size;
      }
    }
    std::ostringstream table;
    table << echo.header();
    table << "# task=" << task << " bin_size=" << *bin_size;
    for (auto m : hrl::kAllModes) {
      const auto it = by_mode.find(m);
      table << ' ' << hrl::mode_name(m) << "_trials=" << (it == by_mode.end() ? 0 : it->second.size());
      if (it == by_mode.end()) {
        err << "warning: task " << task << ": no curves for " << hrl::mode_name(m) << "; column left empty\n";
        continue;
      }
      for (int t : all_trials)
        if (!it->second.count(t))
          err << "warning: task " << task << ": " << hrl::mode_name(m) << " is missing trial " << t
              << "; averaging the trials present\n";
    }
    table << '\n' << "bin";
    for (auto m : hrl::kAllModes) table << ',' << hrl::mode_name(m);
    table << '\n';
    for (std::size_t b = 0; b < *bins; ++b) {
      table << b;
      for (auto m : hrl::kAllModes) {
        table << ',';
        const auto it = by_mode.find(m);
        if (it == by_mode.end()) continue;
        double total = 0.0;
        for (const auto& [trial, rec] : it->second) total += rec.bins[b];
        table << fixed6(total / static_cast<double>(it->second.size()));
      }
      table << '\n';
    }
    const fs::path path = dir / ("task" + std::to_string(task) + ".csv");
    write_file(path, table.str());
    out << "wrote " << path.string() << '\n';
  }
  return kOk;
}

// ---------------------------------------------------------------- config injection

std::optional<std::string> find_config_path(const std::vector<std::string>& args) {
  std::optional<std::string> path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size())
      path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0)
      path = args[i].substr(9);
  }
  return path;
}

// Config entries become `--key=value` tokens right after the subcommand, so
// anything given on the command line comes later and wins.
std::vector<std::string> inject_config(const std::vector<std::string>& args, CLI::App& app) {
  if (args.empty()) return args;
  CLI::App* sub = app.get_subcommand_no_throw(args[0]);
  if (!sub) return args;
  const auto path = find_config_path(args);
  if (!path) return args;
  std::ifstream f(*path, std::ios::binary);
  if (!f) throw CliError(kConfig, "cannot open config file " + *path);
  ConfigFile cfg;
  try {
    cfg = read_config(f, *path);
  } catch (const ParseError& ex) {
    throw CliError(kConfig, ex.what());
  }
  if (!cfg.command.empty() && cfg.command != args[0])
    throw CliError(kConfig, *path + " is a " + cfg.command + " artifact, not " + args[0]);
  std::vector<std::string> tokens;
  for (const auto& e : cfg.entries) {
    if (e.key == "config") throw CliError(kConfig, *path + ":" + std::to_string(e.line) + ": config files do not nest");
    // Keys echoed for provenance only.
    if (!cfg.command.empty() && e.key == "dataset-seed") continue;
    // An empty value means "not set"; `--key=` would swallow the next token.
    if (e.value.empty()) continue;
    if (!sub->get_option_no_throw("--" + e.key))
      throw CliError(kConfig, *path + ":" + std::to_string(e.line) + ": unknown key '" + e.key + "' for " + args[0]);
    tokens.push_back("--" + e.key + "=" + e.value);
  }
  std::vector<std::string> merged{args[0]};
  merged.insert(merged.end(), tokens.begin(), tokens.end());
  merged.insert(merged.end(), args.begin() + 1, args.end());
  return merged;
}

}  // namespace

ConfigFile read_config(std::istream& in, const std::string& source) {
  ConfigFile cfg;
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    lines.push_back(line);
    // Checkpoint headers end at `data`; the binary payload follows.
    if (lines.front().rfind("SGTCKPT", 0) == 0 && line == "data") break;
  }

  if (!lines.empty() && lines.front().rfind("SGTCKPT", 0) == 0) {
    cfg.command = "train-mapper";
    for (std::size_t i = 0; i < lines.size(); ++i) {
      std::istringstream ls(lines[i]);
      std::string kind, key, value;
      ls >> kind >> key;
      std::getline(ls, value);
      if (kind == "meta" && key.rfind("config.", 0) == 0)
        cfg.entries.push_back({key.substr(7), trim(value), static_cast<int>(i + 1)});
    }
    return cfg;
  }

  std::size_t header = lines.size();
  for (std::size_t i = 0; i < lines.size() && header == lines.size(); ++i)
    if (trim(lines[i]).rfind("# sgt ", 0) == 0) header = i;

  if (header < lines.size()) {
    std::istringstream head(trim(lines[header]).substr(6));
    head >> cfg.command;
    for (std::size_t i = header + 1; i < lines.size(); ++i) {
      const std::string t = trim(lines[i]);
      if (t.empty() || t.front() != '#') break;
      const std::string kv = trim(t.substr(1));
      const auto eq = kv.find('=');
      if (eq == std::string::npos || kv.find(' ') < eq) break;
      cfg.entries.push_back({kv.substr(0, eq), kv.substr(eq + 1), static_cast<int>(i + 1)});
    }
    return cfg;
  }

  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string t = trim(lines[i]);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    const int line_no = static_cast<int>(i + 1);
    if (eq == std::string::npos) throw ParseError(source, line_no, "expected key=value");
    std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw ParseError(source, line_no, "empty key");
    cfg.entries.push_back({std::move(key), trim(t.substr(eq + 1)), line_no});
  }
  return cfg;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Subgoal-mapping transfer between a bishop expert and a knight learner", "sgt"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  Common common;
  GenOptions gen_opts;
  MapperOptions mapper_opts;
  TransferOptions transfer_opts;
  ExportOptions export_opts;
  const unsigned hw = std::max(1U, std::thread::hardware_concurrency());
  mapper_opts.threads = hw;
  transfer_opts.threads = hw;

  auto* gen = app.add_subcommand("gen-dataset", "Solve every task for both pieces and write the split dataset");
  add_common(gen, common);
  gen->add_option("--start", gen_opts.start, "Start square of both pieces")->capture_default_str();

  auto* train = app.add_subcommand("train-mapper", "Train the subgoal mapper on the training split");
  add_common(train, common);
  train->add_option("--dataset", mapper_opts.dataset, "Dataset file")->required();
  add_mapper_options(train, mapper_opts.hp, mapper_opts.mc);

  auto* eval = app.add_subcommand("eval-mapper", "K-fold cross-validated corpus METEOR of the mapper");
  add_common(eval, common);
  eval->add_option("--dataset", mapper_opts.dataset, "Dataset file")->required();
  auto* k_opt = eval->add_option("--k", mapper_opts.k, "Number of folds (2 under --smoke unless given)")
                    ->capture_default_str();
  eval->add_option("--threads", mapper_opts.threads, "Worker threads; results do not depend on it");
  add_mapper_options(eval, mapper_opts.hp, mapper_opts.mc);

  auto* transfer = app.add_subcommand("transfer", "Run the transfer baselines on test tasks");
  add_common(transfer, common);
  auto& tc = transfer_opts.cfg;
  transfer->add_option("--dataset", transfer_opts.dataset, "Dataset file")->required();
  transfer->add_option("--checkpoint", transfer_opts.checkpoint, "Mapper checkpoint (required for mapping-warm)");
  transfer->add_option("--task", transfer_opts.task, "Task id, comma list of ids, or all-test")->capture_default_str();
  transfer->add_option("--modes", transfer_opts.modes, "Comma list of mapping-warm,no-transfer,expert-direct or all")
      ->capture_default_str();
  transfer->add_option("--episodes", tc.episodes)->capture_default_str();
  transfer->add_option("--horizon", tc.horizon)->capture_default_str();
  transfer->add_option("--v-noise", tc.v_noise)->capture_default_str();
  transfer->add_option("--warm-epochs", tc.warm_epochs)->capture_default_str();
  transfer->add_option("--warm-lr", tc.warm_lr)->capture_default_str();
  transfer->add_option("--subgoal-budget", tc.subgoal_budget)->capture_default_str();
  transfer->add_option("--gamma", tc.gamma)->capture_default_str();
  transfer->add_option("--actor-lr", tc.actor_lr)->capture_default_str();
  transfer->add_option("--critic-lr", tc.critic_lr)->capture_default_str();
  transfer->add_option("--low-pretrain-epochs", tc.low_pretrain_epochs)->capture_default_str();
  transfer->add_option("--low-pretrain-lr", tc.low_pretrain_lr)->capture_default_str();
  transfer->add_option("--pretrain-batch", tc.pretrain_batch)->capture_default_str();
  transfer->add_option("--clip", tc.clip_norm)->capture_default_str();
  transfer->add_option("--hidden", tc.hidden)->capture_default_str();
  transfer->add_option("--trials", tc.trials)->capture_default_str();
  transfer->add_option("--bin-size", tc.bin_size)->capture_default_str();
  transfer->add_option("--per-step-high-reward", tc.per_step_high_reward,
                       "Sum r_high over primitive landings instead of once per attempt")
      ->capture_default_str();
  transfer->add_flag("--raw", transfer_opts.raw, "Also write per-episode returns");
  transfer->add_option("--threads", transfer_opts.threads, "Worker threads; results do not depend on it");

  auto* exp = app.add_subcommand("export-plots", "Merge curve files into one table per task");
  add_common(exp, common);
  exp->add_option("--curves", export_opts.curves, "Curve directory or file (default <out>/curves)");

  try {
    std::vector<std::string> argv = inject_config(args, app);
    std::reverse(argv.begin(), argv.end());
    try {
      app.parse(argv);
    } catch (const CLI::CallForHelp&) {
      CLI::App* shown = &app;
      for (auto* s : app.get_subcommands()) shown = s;
      out << shown->help();
      return kOk;
    } catch (const CLI::ParseError& ex) {
      throw CliError(kUsage, ex.what());
    }

    if (*gen) return cmd_gen_dataset(common, gen_opts, out);
    if (*train) return cmd_train_mapper(common, mapper_opts, out);
    if (*eval) return cmd_eval_mapper(common, mapper_opts, k_opt->count() > 0, out);
    if (*transfer) return cmd_transfer(common, transfer_opts, out, err);
    if (*exp) return cmd_export_plots(common, export_opts, out, err);
    throw CliError(kUsage, "no subcommand");
  } catch (const CliError& ex) {
    err << "error: " << category(ex.code()) << ": " << ex.what() << '\n';
    return ex.code();
  } catch (const ParseError& ex) {
    err << "error: parse: " << ex.what() << '\n';
    return kParse;
  } catch (const nn::CheckpointError& ex) {
    err << "error: parse: " << ex.what() << '\n';
    return kParse;
  } catch (const IoError& ex) {
    err << "error: io: " << ex.what() << '\n';
    return kIo;
  } catch (const fs::filesystem_error& ex) {
    err << "error: io: " << ex.what() << '\n';
    return kIo;
  } catch (const std::invalid_argument& ex) {
    err << "error: input: " << ex.what() << '\n';
    return kInput;
  } catch (const std::exception& ex) {
    err << "error: internal: " << ex.what() << '\n';
    return kInternal;
  }
}

}  // namespace sgt::cli
