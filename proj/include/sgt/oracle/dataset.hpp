#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "sgt/oracle/solver.hpp"

namespace sgt::oracle {

inline constexpr int kTestTasks = 25;
inline constexpr int kDatasetVersion = 1;

enum class Split { Train, Test };

struct DatasetEntry {
  Task task;
  SubgoalSequence expert;   // bishop
  SubgoalSequence learner;  // knight
  Split split = Split::Train;
};

struct Dataset {
  Square start;
  std::uint64_t seed = 0;
  std::vector<DatasetEntry> entries;  // canonical task order, entries[i].task.id == i
  std::vector<int> train_ids;         // ascending
  std::vector<int> test_ids;          // ascending

  const DatasetEntry& entry(int task_id) const { return entries.at(static_cast<std::size_t>(task_id)); }
  std::vector<DatasetEntry> select(const std::vector<int>& ids) const;
};

// Enumerates the task census, solves both pieces on every task, and splits
// the tasks randomly into train/test by seed.
Dataset build_dataset(Square start, std::uint64_t seed);

struct Fold {
  std::vector<int> train_ids;
  std::vector<int> validation_ids;
};

// K near-equal disjoint folds over all tasks; folds are a seeded permutation.
std::vector<Fold> kfold_split(const Dataset& dataset, int k);

struct DatasetStats {
  std::size_t tasks = 0, train = 0, test = 0;
  double expert_mean_length = 0.0;
  double learner_mean_length = 0.0;
};
DatasetStats summarize(const Dataset& dataset);

// Line format after the header: `task_id | split | expert: sq ... | learner: sq ...`.
// header_comments are written as `# ...` lines and ignored on read.
void write_dataset(std::ostream& out, const Dataset& dataset,
                   const std::vector<std::string>& header_comments = {});
Dataset read_dataset(std::istream& in, const std::string& source = "<dataset>");

// Task file: `id,start,pawn_a,pawn_b` per line.
void write_tasks(std::ostream& out, const std::vector<Task>& tasks);
std::vector<Task> read_tasks(std::istream& in, const std::string& source = "<tasks>");

}  // namespace sgt::oracle
