#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "sgt/cli/commands.hpp"

namespace fs = std::filesystem;
using namespace sgt::cli;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sgt_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

const fs::path& dataset_dir() {
  static const fs::path dir = [] {
    const fs::path d = scratch("dataset");
    REQUIRE(run_cli({"gen-dataset", "--seed", "1", "--out", d.string()}).code == 0);
    return d;
  }();
  return dir;
}

const std::vector<std::string> kTinyMapper{"--epochs", "2", "--embed-dim", "4", "--encoder-hidden", "4",
                                           "--bridge-dim", "4", "--decoder-hidden", "4"};

}  // namespace

TEST_CASE("config files in all three forms") {
  std::istringstream flat("# comment\n\nepochs = 5\nlr=0.01\n");
  auto c = read_config(flat, "flat");
  CHECK(c.command.empty());
  REQUIRE(c.entries.size() == 2);
  CHECK(c.entries[0].key == "epochs");
  CHECK(c.entries[0].value == "5");
  CHECK(c.entries[0].line == 3);
  CHECK(c.entries[1].value == "0.01");

  std::istringstream header("sgt-dataset 1\n# sgt gen-dataset format=1\n# seed=4\n# start=d4\n0 | train | x\n");
  c = read_config(header, "artifact");
  CHECK(c.command == "gen-dataset");
  REQUIRE(c.entries.size() == 2);
  CHECK(c.entries[0].key == "seed");
  CHECK(c.entries[1].value == "d4");

  std::istringstream ckpt("SGTCKPT 1\nmeta model sgt-mapper\nmeta config.epochs 7\nmeta config.seed 2\n");
  c = read_config(ckpt, "ckpt");
  CHECK(c.command == "train-mapper");
  REQUIRE(c.entries.size() == 2);
  CHECK(c.entries[0].key == "epochs");
  CHECK(c.entries[0].value == "7");
}

TEST_CASE("gen-dataset output and determinism") {
  const fs::path a = scratch("gen_a"), b = scratch("gen_b");
  const auto r = run_cli({"gen-dataset", "--seed", "1", "--out", a.string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("tasks=253 train=228 test=25") != std::string::npos);
  REQUIRE(run_cli({"gen-dataset", "--config", (a / "dataset.txt").string(), "--out", b.string()}).code == 0);
  CHECK(slurp(a / "dataset.txt") == slurp(b / "dataset.txt"));
  CHECK(slurp(a / "tasks.txt") == slurp(b / "tasks.txt"));
  CHECK(slurp(a / "tasks.txt").rfind("# sgt gen-dataset format=1", 0) == 0);
}

TEST_CASE("train-mapper artifacts regenerate from the checkpoint") {
  const fs::path a = scratch("train_a"), b = scratch("train_b");
  std::vector<std::string> args{"train-mapper", "--dataset", (dataset_dir() / "dataset.txt").string(), "--out",
                                a.string()};
  args.insert(args.end(), kTinyMapper.begin(), kTinyMapper.end());
  const auto r = run_cli(args);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("test_meteor=") != std::string::npos);
  REQUIRE(run_cli({"train-mapper", "--config", (a / "mapper.ckpt").string(), "--out", b.string()}).code == 0);
  CHECK(slurp(a / "mapper.ckpt") == slurp(b / "mapper.ckpt"));
  CHECK(slurp(a / "mapper_loss.csv") == slurp(b / "mapper_loss.csv"));

  // A command-line flag beats the config file.
  const fs::path c = scratch("train_c");
  REQUIRE(run_cli({"train-mapper", "--config", (a / "mapper.ckpt").string(), "--epochs", "3", "--out", c.string()})
              .code == 0);
  CHECK(slurp(c / "mapper_loss.csv").find("\n3,") != std::string::npos);
  CHECK(slurp(a / "mapper_loss.csv").find("\n3,") == std::string::npos);
}

TEST_CASE("smoke mode caps epochs and is recorded") {
  const fs::path a = scratch("smoke");
  REQUIRE(run_cli({"train-mapper", "--dataset", (dataset_dir() / "dataset.txt").string(), "--smoke", "--epochs",
                   "400", "--embed-dim", "4", "--encoder-hidden", "4", "--bridge-dim", "4", "--decoder-hidden", "4",
                   "--out", a.string()})
              .code == 0);
  const std::string ckpt = slurp(a / "mapper.ckpt");
  CHECK(ckpt.find("meta config.epochs 50\n") != std::string::npos);
  CHECK(ckpt.find("meta config.smoke true\n") != std::string::npos);
}

TEST_CASE("transfer and export-plots") {
  const fs::path m = scratch("xfer_mapper");
  std::vector<std::string> targs{"train-mapper", "--dataset", (dataset_dir() / "dataset.txt").string(), "--out",
                                 m.string()};
  targs.insert(targs.end(), kTinyMapper.begin(), kTinyMapper.end());
  REQUIRE(run_cli(targs).code == 0);

  const fs::path a = scratch("xfer_a"), b = scratch("xfer_b");
  const std::vector<std::string> common{"--dataset", (dataset_dir() / "dataset.txt").string(), "--checkpoint",
                                        (m / "mapper.ckpt").string(), "--episodes", "20", "--bin-size", "10",
                                        "--trials", "2", "--warm-epochs", "2", "--low-pretrain-epochs", "1",
                                        "--task", "0"};
  std::vector<std::string> args{"transfer", "--out", a.string()};
  args.insert(args.end(), common.begin(), common.end());
  const auto r = run_cli(args);
  REQUIRE(r.code == 0);
  CHECK(r.err.find("warning:") != std::string::npos);  // task 0 sits in the training split for seed 1
  REQUIRE(run_cli({"transfer", "--config", (a / "transfer_summary.csv").string(), "--out", b.string()}).code == 0);
  CHECK(slurp(a / "transfer_summary.csv") == slurp(b / "transfer_summary.csv"));
  for (const char* mode : {"mapping-warm", "no-transfer", "expert-direct"})
    for (int t = 0; t < 2; ++t) {
      const std::string name = std::string("task0_") + mode + "_trial" + std::to_string(t) + ".csv";
      CHECK(slurp(a / "curves" / name) == slurp(b / "curves" / name));
    }

  REQUIRE(run_cli({"export-plots", "--out", a.string()}).code == 0);
  const std::string plot = slurp(a / "plots" / "task0.csv");
  CHECK(plot.find("bin,mapping-warm,no-transfer,expert-direct") != std::string::npos);

  fs::remove(a / "curves" / "task0_no-transfer_trial1.csv");
  const auto w = run_cli({"export-plots", "--out", a.string()});
  CHECK(w.code == 0);
  CHECK(w.err.find("missing trial 1") != std::string::npos);

  // A curve with a different bin count is rejected.
  {
    std::ofstream bad(a / "curves" / "task0_no-transfer_trial1.csv");
    bad << "task,mode,trial,bin_size\n0,no-transfer,1,10\nbin_index,mean_return\n0,1.0\n";
  }
  const auto e = run_cli({"export-plots", "--out", a.string()});
  CHECK(e.code == kInput);
  CHECK(e.err.rfind("error: input:", 0) == 0);
}

TEST_CASE("errors map to categories and exit codes") {
  const fs::path d = scratch("errors");
  CHECK(run_cli({}).code == kUsage);
  CHECK(run_cli({"train-mapper"}).code == kUsage);
  CHECK(run_cli({"bogus"}).code == kUsage);

  {
    std::ofstream cfg(d / "bad.cfg");
    cfg << "not_a_key=1\n";
  }
  auto r = run_cli({"gen-dataset", "--config", (d / "bad.cfg").string(), "--out", d.string()});
  CHECK(r.code == kConfig);
  CHECK(r.err.rfind("error: config:", 0) == 0);

  r = run_cli({"train-mapper", "--dataset", (d / "missing.txt").string(), "--out", d.string()});
  CHECK(r.code == kIo);

  {
    std::ofstream bad(d / "broken.txt");
    bad << "sgt-dataset 1\nstart d4\nseed x\n";
  }
  r = run_cli({"train-mapper", "--dataset", (d / "broken.txt").string(), "--out", d.string()});
  CHECK(r.code == kParse);
  CHECK(r.err.find("broken.txt:3") != std::string::npos);

  r = run_cli({"gen-dataset", "--start", "e4", "--out", d.string()});
  CHECK(r.code == kInput);

  r = run_cli({"transfer", "--dataset", (dataset_dir() / "dataset.txt").string(), "--modes", "mapping-warm",
               "--out", d.string()});
  CHECK(r.code == kInput);

  CHECK(run_cli({"--help"}).code == kOk);
}
