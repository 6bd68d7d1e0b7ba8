#include "sgt/hrl/transfer.hpp"

#include <algorithm>
#include <cstdio>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "sgt/errors.hpp"
#include "sgt/nn/adam.hpp"

namespace sgt::hrl {

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("train config: " + what); };
  if (episodes <= 0) fail("episodes must be positive");
  if (horizon <= 0) fail("horizon must be positive");
  if (!(v_noise >= 0.0 && v_noise <= 1.0)) fail("v_noise must lie in [0, 1]");
  if (warm_epochs < 0) fail("warm-init epochs must be non-negative");
  if (subgoal_budget <= 0) fail("subgoal budget must be positive");
  if (!(gamma > 0.0 && gamma <= 1.0)) fail("gamma must lie in (0, 1]");
  if (!(actor_lr > 0.0 && critic_lr > 0.0 && warm_lr > 0.0 && low_pretrain_lr > 0.0))
    fail("learning rates must be positive");
  if (low_pretrain_epochs < 0 || pretrain_batch <= 0) fail("bad low-level pretraining schedule");
  if (hidden == 0) fail("hidden size must be positive");
  if (trials <= 0) fail("trials must be positive");
  if (bin_size <= 0) fail("bin size must be positive");
}

std::string_view mode_name(TransferMode mode) {
  switch (mode) {
    case TransferMode::MappingWarm:
      return "mapping-warm";
    case TransferMode::NoTransfer:
      return "no-transfer";
    case TransferMode::ExpertDirect:
      return "expert-direct";
  }
  return "unknown";
}

std::optional<TransferMode> parse_mode(std::string_view name) {
  for (TransferMode m : kAllModes)
    if (mode_name(m) == name) return m;
  return std::nullopt;
}

std::uint64_t trial_seed(std::uint64_t seed, int trial) {
  return derive_seed(seed, "trial-" + std::to_string(trial));
}

// ---------------------------------------------------------------- warm init

std::vector<Square> project_to_window_chain(Square start, const SubgoalSequence& predicted, int* projected) {
  std::vector<Square> chain;
  Square pos = start;
  int moved = 0;
  for (Square target : predicted.tokens) {
    Square label = target;
    if (!chess::window_slot(pos, target)) {
      const auto window = chess::subgoal_window(pos);
      label = window.front();
      for (Square s : window)
        if (chess::chebyshev(s, target) < chess::chebyshev(label, target)) label = s;
      ++moved;
    }
    chain.push_back(label);
    pos = label;
  }
  if (projected) *projected = moved;
  return chain;
}

std::vector<Observation> chained_observations(const chess::Task& task, std::span<const Square> chain) {
  std::vector<Observation> out;
  chess::EnvState st = chess::initial_state(task);
  std::optional<Square> prev;
  for (Square g : chain) {
    out.push_back(observe(st, prev));
    if (!st.captured_a && g == task.pawn_a) st.captured_a = true;
    if (!st.captured_b && g == task.pawn_b) st.captured_b = true;
    st.agent = g;
    prev = g;
  }
  return out;
}

HighPolicy warm_init_high(HighPolicy policy, const SubgoalSequence& predicted, const chess::Task& task,
                          const TrainConfig& cfg, WarmInitReport* report) {
  WarmInitReport local;
  WarmInitReport& rep = report ? *report : local;
  rep = {};
  if (predicted.empty()) {
    rep.empty_prediction = true;
    return policy;
  }
  rep.chain = project_to_window_chain(task.start, predicted, &rep.projected_labels);
  const auto observations = chained_observations(task, rep.chain);
  std::vector<int> labels;
  std::vector<std::vector<int>> window_slots;
  for (std::size_t k = 0; k < rep.chain.size(); ++k) {
    labels.push_back(*chess::window_slot(observations[k].agent, rep.chain[k]));
    const auto mask = high_mask(observations[k].agent);
    std::vector<int> slots;
    for (int s = 0; s < chess::kWindowSize; ++s)
      if (mask[static_cast<std::size_t>(s)]) slots.push_back(s);
    window_slots.push_back(std::move(slots));
  }

  Rng rng(derive_seed(cfg.seed, "warm-init"));
  nn::Adam adam({cfg.warm_lr});
  const auto params = policy.params();
  const double scale = 1.0 / static_cast<double>(labels.size());
  for (int epoch = 0; epoch < cfg.warm_epochs; ++epoch) {
    nn::zero_grads(params);
    for (std::size_t k = 0; k < labels.size(); ++k) {
      int label = labels[k];
      // One noise draw per label.
      if (rng.uniform() < cfg.v_noise) {
        const auto& slots = window_slots[k];
        label = slots[rng.below(slots.size())];
      }
      policy.accumulate_nll_grad(observations[k], label, scale);
    }
    nn::clip_grad_norm(params, cfg.clip_norm);
    adam.step(params);
  }
  return policy;
}

std::vector<Square> greedy_high_rollout(const HighPolicy& policy, const chess::Task& task, std::size_t steps) {
  std::vector<Square> out;
  chess::EnvState st = chess::initial_state(task);
  std::optional<Square> prev;
  for (std::size_t k = 0; k < steps; ++k) {
    const Square g = slot_square(st.agent, policy.greedy_slot(observe(st, prev)));
    out.push_back(g);
    if (!st.captured_a && g == task.pawn_a) st.captured_a = true;
    if (!st.captured_b && g == task.pawn_b) st.captured_b = true;
    st.agent = g;
    prev = g;
  }
  return out;
}

// ---------------------------------------------------------------- low level

std::vector<LowSample> low_level_samples(std::span<const Trajectory> demos, std::span<const chess::Task> tasks) {
  if (demos.size() != tasks.size()) throw std::invalid_argument("low_level_samples: demos and tasks differ in count");
  std::vector<LowSample> out;
  for (std::size_t d = 0; d < demos.size(); ++d) {
    const Trajectory& traj = demos[d];
    if (traj.piece != chess::PieceKind::Knight)
      throw std::invalid_argument("low_level_samples: demonstrations must be knight trajectories");
    chess::EnvState st = chess::initial_state(tasks[d]);
    std::optional<Square> prev;
    for (std::size_t i = 0; i < traj.actions.size(); ++i) {
      const Square next = traj.states[i + 1];
      out.push_back({observe(st, prev), relative_slot(st.agent, next), traj.actions[i].direction});
      st = chess::step(st, traj.actions[i], tasks[d], next, 1 << 20).next;
      prev = next;
    }
  }
  return out;
}

LowPolicy pretrain_low(LowPolicy policy, std::span<const Trajectory> demos, std::span<const chess::Task> tasks,
                       const TrainConfig& cfg) {
  if (demos.empty()) throw std::invalid_argument("pretrain_low: no demonstrations");
  const auto samples = low_level_samples(demos, tasks);
  Rng rng(derive_seed(cfg.seed, "low-pretrain"));
  nn::Adam adam({cfg.low_pretrain_lr});
  const auto params = policy.params();
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const auto batch = static_cast<std::size_t>(cfg.pretrain_batch);
  for (int epoch = 0; epoch < cfg.low_pretrain_epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t begin = 0; begin < order.size(); begin += batch) {
      const std::size_t end = std::min(order.size(), begin + batch);
      nn::zero_grads(params);
      const double scale = 1.0 / static_cast<double>(end - begin);
      for (std::size_t k = begin; k < end; ++k) {
        const LowSample& s = samples[order[k]];
        policy.accumulate_nll_grad(s.obs, s.subgoal_slot, s.jump, scale);
      }
      nn::clip_grad_norm(params, cfg.clip_norm);
      adam.step(params);
    }
  }
  return policy;
}

// ---------------------------------------------------------------- episodes

EpisodeTrace run_episode(const HighPolicy& high, const LowPolicy& low, const chess::Task& task,
                         const TrainConfig& cfg, Rng& rng, bool greedy) {
  EpisodeTrace trace;
  chess::EnvState st = chess::initial_state(task);
  std::optional<Square> prev;
  while (!chess::is_done(st, cfg.horizon)) {
    SubgoalAttempt attempt;
    attempt.obs = observe(st, prev);
    attempt.slot = greedy ? high.greedy_slot(attempt.obs) : high.sample_slot(attempt.obs, rng);
    attempt.subgoal = slot_square(st.agent, attempt.slot);
    double step_high = 0.0;
    for (int b = 0; b < cfg.subgoal_budget && !chess::is_done(st, cfg.horizon); ++b) {
      LowStep ls;
      ls.obs = observe(st, prev);
      ls.subgoal_slot = relative_slot(st.agent, attempt.subgoal);
      ls.jump = greedy ? low.greedy_jump(ls.obs, ls.subgoal_slot) : low.sample_jump(ls.obs, ls.subgoal_slot, rng);
      const chess::StepOutcome out = chess::step(st, chess::knight_jump(ls.jump), task, attempt.subgoal, cfg.horizon);
      ls.r_low = out.r_low;
      step_high += out.r_high;
      attempt.steps.push_back(ls);
      trace.low_return += out.r_low;
      st = out.next;
      if (out.captured) attempt.captured = true;
      if (st.agent == attempt.subgoal) {
        attempt.reached = true;
        break;
      }
      if (out.captured) break;
    }
    if (cfg.per_step_high_reward)
      attempt.r_high = step_high;
    else
      attempt.r_high = attempt.captured ? chess::kCaptureReward : chess::kStepPenalty;
    if (attempt.reached) prev = attempt.subgoal;
    trace.high_return += attempt.r_high;
    trace.attempts.push_back(std::move(attempt));
  }
  trace.final_state = st;
  return trace;
}

std::size_t LearningCurve::bin_count() const {
  const auto b = static_cast<std::size_t>(bin_size);
  return (returns.size() + b - 1) / b;
}

std::vector<double> LearningCurve::binned() const {
  const auto b = static_cast<std::size_t>(bin_size);
  std::vector<double> out;
  for (std::size_t begin = 0; begin < returns.size(); begin += b) {
    const std::size_t end = std::min(returns.size(), begin + b);
    double total = 0.0;
    for (std::size_t i = begin; i < end; ++i) total += returns[i];
    out.push_back(total / static_cast<double>(end - begin));
  }
  return out;
}

namespace {

// Discounted returns G_t = r_t + gamma G_{t+1}.
std::vector<double> discounted(const std::vector<double>& rewards, double gamma) {
  std::vector<double> g(rewards.size());
  double acc = 0.0;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    acc = rewards[i] + gamma * acc;
    g[i] = acc;
  }
  return g;
}

struct Learner {
  nn::Adam actor;
  nn::Adam critic;
};

void apply(std::vector<nn::Param*> params, nn::Adam& opt, double clip) {
  nn::clip_grad_norm(params, clip);
  opt.step(params);
}

}  // namespace

HierarchyResult train_hierarchy(HighPolicy high, LowPolicy low, const chess::Task& task, const TrainConfig& cfg,
                                TransferMode mode, int trial) {
  cfg.validate();
  Rng init_rng(derive_seed(cfg.seed, "critics"));
  ValueNet high_critic("high-critic", kHighFeatureDim, cfg.hidden, init_rng);
  ValueNet low_critic("low-critic", kLowFeatureDim, cfg.hidden, init_rng);
  Learner high_opt{nn::Adam({cfg.actor_lr}), nn::Adam({cfg.critic_lr})};
  Learner low_opt{nn::Adam({cfg.actor_lr}), nn::Adam({cfg.critic_lr})};
  Rng rng(derive_seed(cfg.seed, "episodes"));

  LearningCurve curve;
  curve.task_id = task.id;
  curve.mode = mode;
  curve.trial = trial;
  curve.bin_size = cfg.bin_size;
  curve.returns.reserve(static_cast<std::size_t>(cfg.episodes));

  const auto high_params = high.params();
  const auto high_critic_params = high_critic.params();
  const auto low_params = low.params();
  const auto low_critic_params = low_critic.params();

  for (int episode = 0; episode < cfg.episodes; ++episode) {
    const EpisodeTrace trace = run_episode(high, low, task, cfg, rng);
    curve.returns.push_back(trace.high_return);

    // High level: one transition per subgoal attempt.
    nn::zero_grads(high_params);
    nn::zero_grads(high_critic_params);
    std::vector<double> rewards;
    for (const auto& a : trace.attempts) rewards.push_back(a.r_high);
    const auto returns = discounted(rewards, cfg.gamma);
    const double high_scale = 1.0 / static_cast<double>(std::max<std::size_t>(1, rewards.size()));
    for (std::size_t k = 0; k < trace.attempts.size(); ++k) {
      const auto& a = trace.attempts[k];
      const Vector f = high_features(a.obs);
      const double v = high_critic.value(f);
      high.accumulate_nll_grad(a.obs, a.slot, (returns[k] - v) * high_scale);
      high_critic.accumulate_grad(f, (v - returns[k]) * high_scale);
    }
    apply(high_params, high_opt.actor, cfg.clip_norm);
    apply(high_critic_params, high_opt.critic, cfg.clip_norm);

    // Low level: each attempt is its own discounted episode.
    nn::zero_grads(low_params);
    nn::zero_grads(low_critic_params);
    std::size_t n_steps = 0;
    for (const auto& a : trace.attempts) n_steps += a.steps.size();
    const double low_scale = 1.0 / static_cast<double>(std::max<std::size_t>(1, n_steps));
    for (const auto& a : trace.attempts) {
      std::vector<double> r;
      for (const auto& s : a.steps) r.push_back(s.r_low);
      const auto g = discounted(r, cfg.gamma);
      for (std::size_t i = 0; i < a.steps.size(); ++i) {
        const auto& s = a.steps[i];
        const Vector f = low_features(s.obs, s.subgoal_slot);
        const double v = low_critic.value(f);
        low.accumulate_nll_grad(s.obs, s.subgoal_slot, s.jump, (g[i] - v) * low_scale);
        low_critic.accumulate_grad(f, (v - g[i]) * low_scale);
      }
    }
    apply(low_params, low_opt.actor, cfg.clip_norm);
    apply(low_critic_params, low_opt.critic, cfg.clip_norm);
  }
  return {std::move(high), std::move(low), std::move(curve)};
}

std::vector<LearningCurve> run_baseline(TransferMode mode, const chess::Task& task, const BaselineInputs& inputs,
                                        const TrainConfig& cfg) {
  cfg.validate();
  if (!inputs.pretrained_low) throw std::invalid_argument("run_baseline: a pretrained low-level policy is required");
  if (mode == TransferMode::MappingWarm && !inputs.mapper)
    throw std::invalid_argument("run_baseline: mapping-warm mode needs a trained mapper");
  if (mode != TransferMode::NoTransfer && inputs.expert.empty())
    throw std::invalid_argument("run_baseline: " + std::string(mode_name(mode)) + " mode needs the expert sequence");

  std::optional<SubgoalSequence> guide;
  if (mode == TransferMode::MappingWarm) guide = inputs.mapper->predict(inputs.expert, task);
  if (mode == TransferMode::ExpertDirect) guide = inputs.expert;

  std::vector<LearningCurve> curves;
  for (int trial = 0; trial < cfg.trials; ++trial) {
    TrainConfig trial_cfg = cfg;
    trial_cfg.seed = trial_seed(cfg.seed, trial);
    HighPolicy high(derive_seed(trial_cfg.seed, "high-init"), cfg.hidden);
    if (guide) high = warm_init_high(std::move(high), *guide, task, trial_cfg);
    auto result = train_hierarchy(std::move(high), *inputs.pretrained_low, task, trial_cfg, mode, trial);
    curves.push_back(std::move(result.curve));
  }
  return curves;
}

// ---------------------------------------------------------------- curve files

namespace {

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

void write_curve(std::ostream& out, const LearningCurve& curve, const std::vector<std::string>& header_comments) {
  for (const auto& c : header_comments) out << "# " << c << '\n';
  out << "task,mode,trial,bin_size\n";
  out << curve.task_id << ',' << mode_name(curve.mode) << ',' << curve.trial << ',' << curve.bin_size << '\n';
  out << "bin_index,mean_return\n";
  const auto bins = curve.binned();
  for (std::size_t i = 0; i < bins.size(); ++i) out << i << ',' << format_real(bins[i]) << '\n';
}

void write_raw_returns(std::ostream& out, const LearningCurve& curve) {
  out << "episode,return\n";
  for (std::size_t i = 0; i < curve.returns.size(); ++i) out << i << ',' << format_real(curve.returns[i]) << '\n';
}

CurveRecord read_curve(std::istream& in, const std::string& source) {
  std::string line;
  int line_no = 0;
  auto next = [&](bool required) -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line.front() == '#') continue;
      return true;
    }
    if (required) throw ParseError(source, line_no, "unexpected end of curve file");
    return false;
  };
  next(true);
  if (line != "task,mode,trial,bin_size") throw ParseError(source, line_no, "expected 'task,mode,trial,bin_size'");
  next(true);
  CurveRecord rec;
  {
    std::istringstream ls(line);
    std::string task, mode, trial, bin;
    if (!std::getline(ls, task, ',') || !std::getline(ls, mode, ',') || !std::getline(ls, trial, ',') ||
        !std::getline(ls, bin))
      throw ParseError(source, line_no, "expected four curve header values");
    const auto m = parse_mode(mode);
    if (!m) throw ParseError(source, line_no, "unknown mode '" + mode + "'");
    try {
      rec.task_id = std::stoi(task);
      rec.trial = std::stoi(trial);
      rec.bin_size = std::stoi(bin);
    } catch (const std::exception&) {
      throw ParseError(source, line_no, "non-numeric curve header value");
    }
    rec.mode = *m;
  }
  next(true);
  if (line != "bin_index,mean_return") throw ParseError(source, line_no, "expected 'bin_index,mean_return'");
  while (next(false)) {
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ParseError(source, line_no, "expected 'bin_index,mean_return' values");
    try {
      const int idx = std::stoi(line.substr(0, comma));
      if (idx != static_cast<int>(rec.bins.size())) throw ParseError(source, line_no, "bins out of order");
      rec.bins.push_back(std::stod(line.substr(comma + 1)));
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception&) {
      throw ParseError(source, line_no, "non-numeric bin value");
    }
  }
  return rec;
}

}  // namespace sgt::hrl
