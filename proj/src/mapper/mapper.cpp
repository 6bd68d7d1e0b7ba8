#include "sgt/mapper/mapper.hpp"

#include <algorithm>
#include <atomic>
#include <stdexcept>
#include <string>
#include <thread>

#include "sgt/meteor.hpp"
#include "sgt/nn/adam.hpp"
#include "sgt/rng.hpp"

namespace sgt::mapper {

using nn::require;

void MapperHyperparams::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("mapper: learning rate must be positive");
  if (epochs <= 0) throw std::invalid_argument("mapper: epochs must be positive");
  if (batch_size <= 0) throw std::invalid_argument("mapper: batch size must be positive");
  if (!(clip_norm > 0.0)) throw std::invalid_argument("mapper: clip norm must be positive");
}

namespace {

void put_coordinates(Vector& v, std::size_t offset, int square_index) {
  const chess::Square s = chess::Square::from_index(square_index);
  v[offset + static_cast<std::size_t>(s.file)] = 1.0;
  v[offset + chess::kBoardSize + static_cast<std::size_t>(s.rank)] = 1.0;
}

// Pawns enter in ascending square order so the encoding ignores their labelling.
Vector context_onehot(const chess::Task& task) {
  constexpr std::size_t block = chess::kNumSquares + kCoordDim;
  Vector onehot(kContextDim, 0.0);
  const int lo = std::min(task.pawn_a.index(), task.pawn_b.index());
  const int hi = std::max(task.pawn_a.index(), task.pawn_b.index());
  const int squares[3] = {task.start.index(), lo, hi};
  for (std::size_t k = 0; k < 3; ++k) {
    onehot[k * block + static_cast<std::size_t>(squares[k])] = 1.0;
    put_coordinates(onehot, k * block + chess::kNumSquares, squares[k]);
  }
  return onehot;
}

}  // namespace

MappingModel::MappingModel(const MapperConfig& config, std::uint64_t seed) : config_(config) {
  require(config.embed_dim > 0 && config.encoder_hidden > 0 && config.bridge_dim > 0 &&
              config.decoder_hidden > 0 && config.max_length > 0,
          "mapper: all dimensions must be positive");
  Rng rng(seed);
  embedding_ = nn::Param("embedding", kEmbeddingRows, config.embed_dim);
  nn::init_uniform_fan_in(embedding_.value, config.embed_dim, rng);
  context_ = nn::Dense("context", kContextDim, config.encoder_hidden, nn::Activation::tanh, rng);
  encoder_ = nn::BiLstm("encoder", config.token_input_dim(), config.encoder_hidden, rng);
  bridge_ = nn::Dense("bridge", 2 * config.encoder_hidden, config.bridge_dim, nn::Activation::tanh, rng);
  decoder_fwd_ =
      nn::LstmCell("decoder.fwd", config.token_input_dim() + config.bridge_dim, config.decoder_hidden, rng);
  decoder_bwd_ = nn::LstmCell("decoder.bwd", config.bridge_dim, config.decoder_hidden, rng);
  output_ = nn::Dense("output", 2 * config.decoder_hidden, kOutputVocab, nn::Activation::identity, rng);
}

std::vector<nn::Param*> MappingModel::params() {
  std::vector<nn::Param*> out{&embedding_};
  for (auto* p : context_.params()) out.push_back(p);
  for (auto* p : encoder_.params()) out.push_back(p);
  for (auto* p : bridge_.params()) out.push_back(p);
  for (auto* p : decoder_fwd_.params()) out.push_back(p);
  for (auto* p : decoder_bwd_.params()) out.push_back(p);
  for (auto* p : output_.params()) out.push_back(p);
  return out;
}

std::vector<const nn::Param*> MappingModel::params() const {
  auto mut = const_cast<MappingModel*>(this)->params();
  return {mut.begin(), mut.end()};
}

void MappingModel::zero_output_layer() {
  output_.weight.value.fill(0.0);
  output_.bias.value.fill(0.0);
}

Vector MappingModel::encode_context(const chess::Task& task) const {
  return context_.forward(context_onehot(task));
}

void MappingModel::check_expert(const SubgoalSequence& expert) const {
  require(!expert.empty(), "mapper: expert sequence is empty");
  require(expert.size() <= config_.max_length,
          "mapper: expert sequence longer than " + std::to_string(config_.max_length));
}

std::vector<Vector> MappingModel::backward_decoder_states(std::span<const double> bridge) const {
  const std::vector<Vector> inputs(config_.max_length, Vector(bridge.begin(), bridge.end()));
  return nn::run_lstm(decoder_bwd_, inputs, decoder_bwd_.zero_state(), true).hidden;
}

Vector MappingModel::token_input(int token) const {
  const auto row = embedding_.value.row(static_cast<std::size_t>(token));
  Vector v(config_.token_input_dim(), 0.0);
  std::copy(row.begin(), row.end(), v.begin());
  if (config_.coordinate_features && token < chess::kNumSquares) put_coordinates(v, config_.embed_dim, token);
  return v;
}

namespace {

// Only the leading learned part of d reaches the table.
void add_embedding_grad(nn::Param& table, int token, std::span<const double> d) {
  auto row = table.grad.row(static_cast<std::size_t>(token));
  for (std::size_t j = 0; j < row.size(); ++j) row[j] += d[j];
}

}  // namespace

Prediction MappingModel::predict_detailed(const SubgoalSequence& expert, const chess::Task& task) const {
  check_expert(expert);
  const Vector h0 = encode_context(task);
  std::vector<Vector> enc_inputs;
  for (const auto& sq : expert.tokens) enc_inputs.push_back(token_input(sq.index()));
  nn::BiLstmCache enc_cache;
  encoder_.forward(enc_inputs, h0, &enc_cache);
  const std::size_t H = config_.encoder_hidden;
  const Vector summary = nn::concat(enc_cache.fwd.hidden.back(), enc_cache.bwd.hidden.front());
  require(summary.size() == 2 * H, "mapper: summary dimension");
  const Vector bridge = bridge_.forward(summary);
  const auto back_states = backward_decoder_states(bridge);

  Prediction pred;
  nn::LstmState state = decoder_fwd_.zero_state();
  int prev = kBosToken;
  for (std::size_t t = 0; t < config_.max_length; ++t) {
    state = decoder_fwd_.step(nn::concat(token_input(prev), bridge), state);
    const Vector probs = nn::softmax(output_.forward(nn::concat(state.h, back_states[t])));
    int best = 0;
    for (int tok = 1; tok < kOutputVocab; ++tok) {
      if (tok == kPadToken) continue;
      if (probs[static_cast<std::size_t>(tok)] > probs[static_cast<std::size_t>(best)]) best = tok;
    }
    pred.step_distributions.push_back(probs);
    if (best == kEosToken) break;
    pred.tokens.tokens.push_back(chess::Square::from_index(best));
    prev = best;
  }
  return pred;
}

double MappingModel::loss(const SubgoalSequence& expert, const chess::Task& task,
                          const SubgoalSequence& learner) const {
  return const_cast<MappingModel*>(this)->run(expert, task, learner, false);
}

double MappingModel::loss_and_grad(const SubgoalSequence& expert, const chess::Task& task,
                                   const SubgoalSequence& learner) {
  return run(expert, task, learner, true);
}

double MappingModel::run(const SubgoalSequence& expert, const chess::Task& task,
                         const SubgoalSequence& learner, bool with_grad) {
  check_expert(expert);
  const std::size_t positions = learner.size() + 1;
  require(positions <= config_.max_length,
          "mapper: learner sequence does not fit in " + std::to_string(config_.max_length) + " positions");
  const std::size_t H = config_.encoder_hidden;
  const std::size_t D = config_.decoder_hidden;
  const std::size_t E = config_.embed_dim;
  const std::size_t X = config_.token_input_dim();

  // Context and encoder.
  nn::DenseCache ctx_cache;
  const Vector h0 = context_.forward(context_onehot(task), &ctx_cache);

  std::vector<Vector> enc_inputs;
  for (const auto& sq : expert.tokens) enc_inputs.push_back(token_input(sq.index()));
  nn::BiLstmCache enc_cache;
  encoder_.forward(enc_inputs, h0, &enc_cache);
  const Vector summary = nn::concat(enc_cache.fwd.hidden.back(), enc_cache.bwd.hidden.front());
  nn::DenseCache bridge_cache;
  const Vector bridge = bridge_.forward(summary, &bridge_cache);

  // Decoder.
  std::vector<int> dec_tokens{kBosToken};
  for (const auto& sq : learner.tokens) dec_tokens.push_back(sq.index());
  std::vector<int> targets;
  for (const auto& sq : learner.tokens) targets.push_back(sq.index());
  targets.push_back(kEosToken);

  std::vector<Vector> fwd_inputs;
  for (std::size_t t = 0; t < positions; ++t) fwd_inputs.push_back(nn::concat(token_input(dec_tokens[t]), bridge));
  const nn::LstmRun dec_fwd = nn::run_lstm(decoder_fwd_, fwd_inputs, decoder_fwd_.zero_state(), false);
  const std::vector<Vector> bwd_inputs(config_.max_length, bridge);
  const nn::LstmRun dec_bwd = nn::run_lstm(decoder_bwd_, bwd_inputs, decoder_bwd_.zero_state(), true);

  double total = 0.0;
  std::vector<Vector> d_fwd(positions), d_bwd(config_.max_length);
  for (std::size_t t = 0; t < positions; ++t) {
    nn::DenseCache out_cache;
    const Vector logits = output_.forward(nn::concat(dec_fwd.hidden[t], dec_bwd.hidden[t]), &out_cache);
    const Vector probs = nn::softmax(logits);
    const auto target = static_cast<std::size_t>(targets[t]);
    total += nn::cross_entropy(probs, target).loss;
    if (!with_grad) continue;
    const Vector d_cat = output_.backward(out_cache, nn::softmax_cross_entropy_grad(probs, target));
    d_fwd[t].assign(d_cat.begin(), d_cat.begin() + static_cast<std::ptrdiff_t>(D));
    d_bwd[t].assign(d_cat.begin() + static_cast<std::ptrdiff_t>(D), d_cat.end());
  }
  if (!with_grad) return total;

  const nn::LstmRunGrad gf = nn::backprop_lstm(decoder_fwd_, dec_fwd, d_fwd);
  const nn::LstmRunGrad gb = nn::backprop_lstm(decoder_bwd_, dec_bwd, d_bwd);
  Vector d_bridge(config_.bridge_dim, 0.0);
  for (std::size_t t = 0; t < positions; ++t) {
    const Vector& d = gf.d_inputs[t];
    add_embedding_grad(embedding_, dec_tokens[t], std::span<const double>(d).first(E));
    for (std::size_t j = 0; j < config_.bridge_dim; ++j) d_bridge[j] += d[X + j];
  }
  for (const Vector& d : gb.d_inputs)
    for (std::size_t j = 0; j < config_.bridge_dim; ++j) d_bridge[j] += d[j];

  const Vector d_summary = bridge_.backward(bridge_cache, d_bridge);
  const std::size_t n = expert.size();
  std::vector<Vector> d_enc(n);
  d_enc[n - 1].assign(2 * H, 0.0);
  d_enc[0].resize(2 * H, 0.0);
  for (std::size_t j = 0; j < H; ++j) {
    d_enc[n - 1][j] += d_summary[j];
    d_enc[0][H + j] += d_summary[H + j];
  }
  const nn::BiLstmGrad ge = encoder_.backward(enc_cache, d_enc);
  for (std::size_t t = 0; t < n; ++t) {
    const int tok = expert.tokens[t].index();
    add_embedding_grad(embedding_, tok, ge.d_fwd_inputs[t]);
    add_embedding_grad(embedding_, tok, ge.d_bwd_inputs[t]);
  }
  context_.backward(ctx_cache, ge.dh0);
  return total;
}

nn::Checkpoint MappingModel::to_checkpoint() const {
  nn::Checkpoint ckpt;
  ckpt.meta = {
      {"model", "sgt-mapper"},
      {"embed_dim", std::to_string(config_.embed_dim)},
      {"encoder_hidden", std::to_string(config_.encoder_hidden)},
      {"bridge_dim", std::to_string(config_.bridge_dim)},
      {"decoder_hidden", std::to_string(config_.decoder_hidden)},
      {"max_length", std::to_string(config_.max_length)},
      {"coordinate_features", config_.coordinate_features ? "1" : "0"},
  };
  for (const nn::Param* p : params()) ckpt.tensors.push_back({p->name, p->value});
  return ckpt;
}

MappingModel MappingModel::from_checkpoint(const nn::Checkpoint& ckpt) {
  const std::string* model = ckpt.find_meta("model");
  if (!model || *model != "sgt-mapper") throw nn::CheckpointError("checkpoint does not hold a subgoal mapper");
  auto dim = [&](const std::string& key) -> std::size_t {
    const std::string* v = ckpt.find_meta(key);
    if (!v) throw nn::CheckpointError("checkpoint meta missing " + key);
    try {
      return static_cast<std::size_t>(std::stoul(*v));
    } catch (const std::exception&) {
      throw nn::CheckpointError("checkpoint meta " + key + " is not a number");
    }
  };
  MapperConfig cfg;
  cfg.embed_dim = dim("embed_dim");
  cfg.encoder_hidden = dim("encoder_hidden");
  cfg.bridge_dim = dim("bridge_dim");
  cfg.decoder_hidden = dim("decoder_hidden");
  cfg.max_length = dim("max_length");
  cfg.coordinate_features = dim("coordinate_features") != 0;
  MappingModel m(cfg, 0);
  const auto ps = m.params();
  nn::restore(ckpt, ps);
  return m;
}

TrainResult train_mapper(std::span<const oracle::DatasetEntry> entries, const MapperHyperparams& hp,
                         const MapperConfig& config, const EpochCallback& on_epoch) {
  hp.validate();
  if (entries.empty()) throw std::invalid_argument("mapper: no training entries");
  TrainResult result{MappingModel(config, derive_seed(hp.seed, "mapper-init")), {}};
  MappingModel& model = result.model;
  const auto params = model.params();
  nn::Adam adam({hp.learning_rate});
  Rng rng(derive_seed(hp.seed, "mapper-shuffle"));

  std::vector<std::size_t> order(entries.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const auto batch = static_cast<std::size_t>(hp.batch_size);

  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double total = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += batch) {
      const std::size_t end = std::min(order.size(), begin + batch);
      nn::zero_grads(params);
      for (std::size_t k = begin; k < end; ++k) {
        const auto& e = entries[order[k]];
        total += model.loss_and_grad(e.expert, e.task, e.learner);
      }
      nn::scale_grads(params, 1.0 / static_cast<double>(end - begin));
      nn::clip_grad_norm(params, hp.clip_norm);
      adam.step(params);
      for (const nn::Param* p : params)
        if (!p->value.all_finite()) throw std::runtime_error("mapper: non-finite parameter in " + p->name);
    }
    const double mean = total / static_cast<double>(entries.size());
    result.loss_history.push_back(mean);
    if (on_epoch) on_epoch(epoch, mean, model);
  }
  return result;
}

double corpus_score(const MappingModel& model, std::span<const oracle::DatasetEntry> entries) {
  std::vector<metrics::SequencePair> pairs;
  pairs.reserve(entries.size());
  for (const auto& e : entries) pairs.emplace_back(e.learner, model.predict(e.expert, e.task));
  return metrics::corpus_meteor(pairs);
}

KFoldReport evaluate_kfold(const oracle::Dataset& dataset, int k, const MapperHyperparams& hp,
                           const MapperConfig& config, unsigned threads) {
  const auto folds = oracle::kfold_split(dataset, k);
  KFoldReport report;
  report.fold_scores.assign(folds.size(), 0.0);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (std::size_t f = next++; f < folds.size() && !failed; f = next++) {
      try {
        const auto train = dataset.select(folds[f].train_ids);
        const auto valid = dataset.select(folds[f].validation_ids);
        const TrainResult trained = train_mapper(train, hp, config);
        report.fold_scores[f] = corpus_score(trained.model, valid);
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    }
  };
  const unsigned n_threads = std::max(1U, std::min<unsigned>(threads, static_cast<unsigned>(folds.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  double total = 0.0;
  for (double s : report.fold_scores) total += s;
  report.mean = total / static_cast<double>(report.fold_scores.size());
  return report;
}

}  // namespace sgt::mapper
