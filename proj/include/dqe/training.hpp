#pragma once
// Batched training with padding/masking, early stopping on validation loss,
// and hyperparameter grid search.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dqe/corpus.hpp"
#include "dqe/features.hpp"
#include "dqe/models.hpp"
#include "dqe/optim.hpp"

namespace dqe {

struct TrainConfig {
    std::size_t batch_size = 64;
    double lr = 1e-4;
    std::size_t max_epochs = 100;
    std::size_t patience = 5;  // epochs without val improvement before stopping
    std::size_t max_sequence_length = 20;
    std::uint64_t seed = 1;
    OptimizerKind optimizer = OptimizerKind::adam;
};

// One dialogue with assembled features and training labels.
struct FeaturizedDialogue {
    std::string dialogue_id;
    FeatureMatrix features;
    std::vector<double> turn_labels;      // rq_rating or 0 where absent
    std::vector<double> turn_label_mask;  // 1 where rq_rating present
    std::optional<double> dialogue_label;
};

std::vector<FeaturizedDialogue> featurize_corpus(const Corpus& corpus,
                                                 const EmbeddingProvider& provider,
                                                 const PopularityTables& tables,
                                                 const FeatureNormalizer& normalizer);

// A dialogue inside a batch, padded to the batch length. Padding rows carry
// zero features and a zero loss mask; `length` counts the real turns.
struct PaddedDialogue {
    std::string dialogue_id;
    Tensor features;  // padded_length x F leaf
    std::size_t length = 0;
    std::vector<double> turn_labels;      // padded_length
    std::vector<double> turn_label_mask;  // padded_length, 0 on padding
    std::optional<double> dialogue_label;
};

struct Batch {
    std::vector<PaddedDialogue> dialogues;
    std::size_t padded_length = 0;
};

// Shuffles dialogues by seed, groups them, pads each batch to its own max
// length capped at max_len (tail truncation, counted in *truncated when
// given).
std::vector<Batch> make_batches(const std::vector<FeaturizedDialogue>& data,
                                std::size_t batch_size, std::size_t max_len, std::uint64_t seed,
                                std::size_t* truncated = nullptr);

struct BatchLossParts {
    Tensor total;          // scalar loss to minimize
    double turn_mse = 0.0;     // masked turn MSE (when the variant has a turn head)
    double dialogue_mse = 0.0; // dialogue MSE (when the variant has a dialogue head)
};

// Forward + loss over one batch on the given tape. Turn losses pool every
// labelled turn in the batch; dialogue losses pool every labelled dialogue.
BatchLossParts batch_loss(Tape& tape, const ModelParameters& params, const Batch& batch,
                          bool training, Rng& rng);

struct TrainHistory {
    struct Epoch {
        double train_loss = 0.0;  // mean batch loss
        double val_loss = 0.0;
        double s_t = 0.0;
        double s_d = 0.0;
    };
    std::vector<Epoch> epochs;
    std::size_t best_epoch = 0;  // index of the epoch whose parameters were kept
    std::size_t truncated_dialogues = 0;
};

struct TrainResult {
    ModelParameters params;  // parameters from the best validation epoch
    TrainHistory history;
};

// Deterministic in (data, configs, seed). Throws on empty splits and on
// non-finite loss.
TrainResult train(const ModelConfig& model_config, const std::vector<FeaturizedDialogue>& train,
                  const std::vector<FeaturizedDialogue>& val, const TrainConfig& train_config);

// Loss of `params` over a whole dataset treated as one pool (no dropout).
double dataset_loss(const ModelParameters& params, const std::vector<FeaturizedDialogue>& data);

ModelParameters clone_parameters(const ModelParameters& params);

void export_history(const TrainHistory& history, std::ostream& out);

struct GridSpace {
    std::vector<std::size_t> n_layers = {1};
    std::vector<std::size_t> hidden_sizes = {32};
    std::vector<std::size_t> batch_sizes = {16};
    std::vector<OptimizerKind> optimizers = {OptimizerKind::adam};
    std::vector<double> dropouts = {0.0};
    std::vector<double> learning_rates = {1e-3};
    std::vector<std::size_t> sequence_lengths = {20};

    std::size_t size() const;
};

struct GridTrial {
    ModelConfig model;
    TrainConfig train;
    double val_loss = 0.0;
    std::size_t best_epoch = 0;
};

// Trains every combination in the space (trial seeds derived from the master
// seed and trial index) and returns trials sorted by ascending val loss.
// jobs > 1 runs trials on that many threads; results are identical either
// way.
std::vector<GridTrial> grid_search(ModelVariant variant, std::size_t embedding_dim,
                                   const GridSpace& space,
                                   const std::vector<FeaturizedDialogue>& train,
                                   const std::vector<FeaturizedDialogue>& val,
                                   std::size_t max_epochs, std::size_t patience,
                                   std::uint64_t master_seed, std::size_t jobs = 1);

void export_grid_report(const std::vector<GridTrial>& trials, std::ostream& out);

}  // namespace dqe
