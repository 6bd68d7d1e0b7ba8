#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "sgt/nn/checkpoint.hpp"
#include "sgt/nn/layers.hpp"
#include "sgt/oracle/dataset.hpp"

namespace sgt::mapper {

using nn::Vector;
using oracle::SubgoalSequence;

// Token ids: 0..63 are squares (Square::index), then EOS and PAD. The output
// head covers ids 0..65; BOS only ever appears as a decoder input.
inline constexpr int kEosToken = 64;
inline constexpr int kPadToken = 65;
inline constexpr int kOutputVocab = 66;
inline constexpr int kBosToken = 66;
inline constexpr int kEmbeddingRows = 67;
// Fixed geometric features per square: one-hot file followed by one-hot rank.
inline constexpr int kCoordDim = 2 * chess::kBoardSize;
inline constexpr int kContextDim = 3 * (chess::kNumSquares + kCoordDim);

struct MapperConfig {
  std::size_t embed_dim = 32;
  std::size_t encoder_hidden = 75;  // per direction; summary is 2x
  std::size_t bridge_dim = 64;
  std::size_t decoder_hidden = 50;  // per direction; decoder output is 2x
  std::size_t max_length = 12;      // decoder positions, EOS included
  // Token inputs carry kCoordDim file/rank features after the learned embedding.
  bool coordinate_features = true;

  std::size_t token_input_dim() const { return embed_dim + (coordinate_features ? kCoordDim : 0); }
};

struct MapperHyperparams {
  double learning_rate = 1e-3;
  int epochs = 300;
  int batch_size = 16;
  double clip_norm = 5.0;
  std::uint64_t seed = 1;

  void validate() const;
};

struct Prediction {
  SubgoalSequence tokens;
  std::vector<Vector> step_distributions;  // one per decoded position, EOS step included
};

// Encoder-decoder subgoal mapping.
//
// Token input: learned embedding, followed (by default) by one-hot file and
// one-hot rank of the square; zero coordinates for BOS.
// Context: square one-hots of start, lower pawn and higher pawn, each followed
// by its file/rank one-hots -> tanh projection -> initial hidden state of both
// encoder directions.
// Encoder: bidirectional LSTM over expert token inputs; the summary is the
// final forward state joined with the final backward state.
// Bridge: tanh dense layer on the summary.
// Decoder: forward LSTM over [embed(previous learner token) ; bridge] and a
// backward LSTM over `bridge` repeated across all max_length positions, so the
// backward half carries position-from-end information and is identical at
// training and decode time. A softmax head reads [forward ; backward].
class MappingModel {
 public:
  MappingModel(const MapperConfig& config, std::uint64_t seed);

  const MapperConfig& config() const { return config_; }

  Vector encode_context(const chess::Task& task) const;

  // Greedy decode; argmax ties go to the lowest token id and PAD is never emitted.
  Prediction predict_detailed(const SubgoalSequence& expert, const chess::Task& task) const;
  SubgoalSequence predict(const SubgoalSequence& expert, const chess::Task& task) const {
    return predict_detailed(expert, task).tokens;
  }

  // Teacher-forced summed cross-entropy over learner tokens plus EOS.
  double loss(const SubgoalSequence& expert, const chess::Task& task, const SubgoalSequence& learner) const;
  // Same loss; accumulates parameter gradients.
  double loss_and_grad(const SubgoalSequence& expert, const chess::Task& task, const SubgoalSequence& learner);

  std::vector<nn::Param*> params();
  std::vector<const nn::Param*> params() const;

  // Output head to zero: every decoder step becomes uniform.
  void zero_output_layer();

  nn::Checkpoint to_checkpoint() const;
  static MappingModel from_checkpoint(const nn::Checkpoint& ckpt);
  void save(const std::filesystem::path& path) const { nn::save_checkpoint(path, to_checkpoint()); }
  static MappingModel load(const std::filesystem::path& path) { return from_checkpoint(nn::load_checkpoint(path)); }

 private:
  double run(const SubgoalSequence& expert, const chess::Task& task, const SubgoalSequence& learner,
             bool with_grad);
  void check_expert(const SubgoalSequence& expert) const;
  std::vector<Vector> backward_decoder_states(std::span<const double> bridge) const;
  Vector token_input(int token) const;

  MapperConfig config_;
  nn::Param embedding_;  // kEmbeddingRows x embed_dim
  nn::Dense context_;
  nn::BiLstm encoder_;
  nn::Dense bridge_;
  nn::LstmCell decoder_fwd_;
  nn::LstmCell decoder_bwd_;
  nn::Dense output_;
};

struct TrainResult {
  MappingModel model;
  std::vector<double> loss_history;  // mean summed-token loss per sequence, one per epoch
};

// Called after each epoch with (0-based epoch, mean loss, model); may be empty.
using EpochCallback = std::function<void(int, double, const MappingModel&)>;

TrainResult train_mapper(std::span<const oracle::DatasetEntry> entries, const MapperHyperparams& hp,
                         const MapperConfig& config = {}, const EpochCallback& on_epoch = {});

double corpus_score(const MappingModel& model, std::span<const oracle::DatasetEntry> entries);

struct KFoldReport {
  std::vector<double> fold_scores;
  double mean = 0.0;
};

// One model per fold; folds run on up to `threads` worker threads.
KFoldReport evaluate_kfold(const oracle::Dataset& dataset, int k, const MapperHyperparams& hp,
                           const MapperConfig& config = {}, unsigned threads = 1);

}  // namespace sgt::mapper
