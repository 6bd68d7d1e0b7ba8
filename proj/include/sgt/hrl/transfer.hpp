#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sgt/hrl/policy.hpp"
#include "sgt/mapper/mapper.hpp"
#include "sgt/oracle/solver.hpp"

namespace sgt::hrl {

using oracle::SubgoalSequence;
using oracle::Trajectory;

struct TrainConfig {
  int episodes = 20000;
  int horizon = chess::kDefaultHorizon;
  double v_noise = 0.1;
  int warm_epochs = 200;
  double warm_lr = 1e-2;
  int subgoal_budget = 4;  // primitive moves per subgoal attempt
  double gamma = 0.95;
  double actor_lr = 1e-3;
  double critic_lr = 5e-3;
  int low_pretrain_epochs = 60;
  double low_pretrain_lr = 3e-3;
  int pretrain_batch = 32;
  double clip_norm = 5.0;
  std::size_t hidden = 64;
  std::uint64_t seed = 1;
  int trials = 3;
  int bin_size = 100;
  // true: r_high is summed over the primitive landings of an attempt (10 per
  // capture, -1 per other landing). false: one r_high per attempt, 10 if it
  // captured and -1 otherwise.
  bool per_step_high_reward = true;

  void validate() const;
};

enum class TransferMode { MappingWarm, NoTransfer, ExpertDirect };

inline constexpr TransferMode kAllModes[] = {TransferMode::MappingWarm, TransferMode::NoTransfer,
                                             TransferMode::ExpertDirect};

std::string_view mode_name(TransferMode mode);
std::optional<TransferMode> parse_mode(std::string_view name);

// ---------------------------------------------------------------- warm init

struct WarmInitReport {
  int projected_labels = 0;  // predictions moved onto the window of the chained position
  bool empty_prediction = false;
  std::vector<Square> chain;  // window-projected targets actually trained on
};

// Projects every predicted square into the subgoal window of the previous
// (chained) square: out-of-window squares go to the nearest window square by
// Chebyshev distance, ties to the lowest index.
std::vector<Square> project_to_window_chain(Square start, const SubgoalSequence& predicted, int* projected = nullptr);

// Observations seen when `chain` is followed from the task start, one per element.
std::vector<Observation> chained_observations(const chess::Task& task, std::span<const Square> chain);

HighPolicy warm_init_high(HighPolicy policy, const SubgoalSequence& predicted, const chess::Task& task,
                          const TrainConfig& cfg, WarmInitReport* report = nullptr);

// Greedy subgoal choices from the task start, chaining each choice as achieved.
std::vector<Square> greedy_high_rollout(const HighPolicy& policy, const chess::Task& task, std::size_t steps);

// ---------------------------------------------------------------- low level

struct LowSample {
  Observation obs;
  int subgoal_slot = 0;
  int jump = 0;
};

// ((state, next visited square), jump) triples from knight demonstrations.
std::vector<LowSample> low_level_samples(std::span<const Trajectory> demos, std::span<const chess::Task> tasks);

LowPolicy pretrain_low(LowPolicy policy, std::span<const Trajectory> demos, std::span<const chess::Task> tasks,
                       const TrainConfig& cfg);

// ---------------------------------------------------------------- episodes

struct LowStep {
  Observation obs;
  int subgoal_slot = 0;
  int jump = 0;
  double r_low = 0.0;
};

struct SubgoalAttempt {
  Observation obs;
  int slot = 0;
  Square subgoal;
  bool reached = false;
  bool captured = false;
  double r_high = 0.0;
  std::vector<LowStep> steps;
};

struct EpisodeTrace {
  std::vector<SubgoalAttempt> attempts;
  chess::EnvState final_state;
  double high_return = 0.0;
  double low_return = 0.0;
  int captures() const { return final_state.captures(); }
};

// One episode. A subgoal attempt ends when the subgoal is reached, a pawn is
// captured, the step budget runs out or the episode ends. The attempt's r_high
// follows cfg.per_step_high_reward.
EpisodeTrace run_episode(const HighPolicy& high, const LowPolicy& low, const chess::Task& task,
                         const TrainConfig& cfg, Rng& rng, bool greedy = false);

struct LearningCurve {
  int task_id = 0;
  TransferMode mode = TransferMode::NoTransfer;
  int trial = 0;
  int bin_size = 100;
  std::vector<double> returns;  // per-episode high-level return

  std::size_t bin_count() const;
  std::vector<double> binned() const;
};

struct HierarchyResult {
  HighPolicy high;
  LowPolicy low;
  LearningCurve curve;
};

// Advantage actor-critic at both levels, one update per episode.
HierarchyResult train_hierarchy(HighPolicy high, LowPolicy low, const chess::Task& task, const TrainConfig& cfg,
                                TransferMode mode = TransferMode::NoTransfer, int trial = 0);

struct BaselineInputs {
  const mapper::MappingModel* mapper = nullptr;  // mapping-warm only
  SubgoalSequence expert;                        // bishop subgoals for the task
  const LowPolicy* pretrained_low = nullptr;
};

// cfg.trials independent runs of one mode on one task.
std::vector<LearningCurve> run_baseline(TransferMode mode, const chess::Task& task, const BaselineInputs& inputs,
                                        const TrainConfig& cfg);

std::uint64_t trial_seed(std::uint64_t seed, int trial);

// ---------------------------------------------------------------- curve files

// `# ...` header comments, then `task,mode,trial,bin_size`, its values,
// then `bin_index,mean_return` and one line per bin.
void write_curve(std::ostream& out, const LearningCurve& curve, const std::vector<std::string>& header_comments = {});
struct CurveRecord {
  int task_id = 0;
  TransferMode mode = TransferMode::NoTransfer;
  int trial = 0;
  int bin_size = 0;
  std::vector<double> bins;
};
CurveRecord read_curve(std::istream& in, const std::string& source = "<curve>");
void write_raw_returns(std::ostream& out, const LearningCurve& curve);

}  // namespace sgt::hrl
