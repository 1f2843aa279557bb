#include "dqe/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "dqe/log.hpp"
#include "dqe/rng.hpp"

namespace dqe {

std::vector<FeaturizedDialogue> featurize_corpus(const Corpus& corpus,
                                                 const EmbeddingProvider& provider,
                                                 const PopularityTables& tables,
                                                 const FeatureNormalizer& normalizer) {
    std::vector<FeaturizedDialogue> out;
    out.reserve(corpus.dialogues.size());
    for (const auto& d : corpus.dialogues) {
        FeaturizedDialogue fd;
        fd.dialogue_id = d.dialogue_id;
        fd.features = assemble_feature_matrix(d, provider, tables, normalizer);
        fd.turn_labels.reserve(d.turns.size());
        fd.turn_label_mask.reserve(d.turns.size());
        for (const auto& t : d.turns) {
            fd.turn_labels.push_back(t.rq_rating.value_or(0.0));
            fd.turn_label_mask.push_back(t.rq_rating ? 1.0 : 0.0);
        }
        fd.dialogue_label = d.dialogue_rating;
        out.push_back(std::move(fd));
    }
    return out;
}

std::vector<Batch> make_batches(const std::vector<FeaturizedDialogue>& data,
                                std::size_t batch_size, std::size_t max_len, std::uint64_t seed,
                                std::size_t* truncated) {
    if (max_len < 1) throw std::invalid_argument("make_batches: max_len must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("make_batches: batch_size must be >= 1");
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(seed, 0xBA7C4));
    rng.shuffle(order);

    std::vector<Batch> batches;
    std::size_t trunc_count = 0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        const std::size_t end = std::min(order.size(), start + batch_size);
        Batch batch;
        for (std::size_t i = start; i < end; ++i) {
            const std::size_t len = std::min(data[order[i]].features.n_turns, max_len);
            batch.padded_length = std::max(batch.padded_length, len);
        }
        for (std::size_t i = start; i < end; ++i) {
            const FeaturizedDialogue& src = data[order[i]];
            PaddedDialogue pd;
            pd.dialogue_id = src.dialogue_id;
            pd.length = std::min(src.features.n_turns, max_len);
            if (pd.length < src.features.n_turns) {
                ++trunc_count;
                log::debug("truncating dialogue " + src.dialogue_id + " from " +
                           std::to_string(src.features.n_turns) + " to " +
                           std::to_string(pd.length) + " turns");
            }
            const std::size_t width = src.features.width;
            std::vector<double> padded(batch.padded_length * width, 0.0);
            std::copy(src.features.values.begin(),
                      src.features.values.begin() + pd.length * width, padded.begin());
            pd.features = Tensor::from(batch.padded_length, width, std::move(padded));
            pd.turn_labels.assign(batch.padded_length, 0.0);
            pd.turn_label_mask.assign(batch.padded_length, 0.0);
            for (std::size_t t = 0; t < pd.length; ++t) {
                pd.turn_labels[t] = src.turn_labels[t];
                pd.turn_label_mask[t] = src.turn_label_mask[t];
            }
            pd.dialogue_label = src.dialogue_label;
            batch.dialogues.push_back(std::move(pd));
        }
        batches.push_back(std::move(batch));
    }
    if (truncated) *truncated += trunc_count;
    return batches;
}

BatchLossParts batch_loss(Tape& tape, const ModelParameters& params, const Batch& batch,
                          bool training, Rng& rng) {
    const ModelVariant variant = params.config.variant;
    const bool turn_head = is_turn_variant(variant) || is_joint_variant(variant);
    const bool dialogue_head = is_dialogue_variant(variant);

    std::vector<Tensor> turn_preds, dlg_preds;
    std::vector<double> turn_labels, turn_mask, dlg_labels, dlg_mask;
    for (const PaddedDialogue& pd : batch.dialogues) {
        ForwardOutput out = model_forward(tape, params, pd.features, pd.length, training, rng);
        if (turn_head) {
            turn_preds.push_back(out.turn_ratings);
            for (std::size_t t = 0; t < pd.length; ++t) {
                turn_labels.push_back(pd.turn_labels[t]);
                turn_mask.push_back(pd.turn_label_mask[t]);
            }
        }
        if (dialogue_head) {
            dlg_preds.push_back(out.dialogue_rating);
            dlg_labels.push_back(pd.dialogue_label.value_or(0.0));
            dlg_mask.push_back(pd.dialogue_label ? 1.0 : 0.0);
        }
    }

    BatchLossParts parts;
    Tensor l_t, l_d;
    if (turn_head) {
        Tensor preds = tape.concat_rows(turn_preds);
        const std::size_t n = turn_labels.size();
        l_t = tape.mse(preds, Tensor::from(n, 1, std::move(turn_labels)),
                       Tensor::from(n, 1, std::move(turn_mask)));
        parts.turn_mse = l_t.value();
    }
    if (dialogue_head) {
        Tensor preds = tape.concat_rows(dlg_preds);
        const std::size_t n = dlg_labels.size();
        l_d = tape.mse(preds, Tensor::from(n, 1, std::move(dlg_labels)),
                       Tensor::from(n, 1, std::move(dlg_mask)));
        parts.dialogue_mse = l_d.value();
    }

    if (is_joint_variant(variant)) {
        parts.total = multitask_loss_from_components(tape, l_t, l_d, params.s_t, params.s_d);
    } else if (turn_head) {
        parts.total = l_t;
    } else {
        parts.total = l_d;
    }
    return parts;
}

namespace {

Batch whole_set_as_batch(const std::vector<FeaturizedDialogue>& data) {
    std::size_t max_len = 1;
    for (const auto& d : data) max_len = std::max(max_len, d.features.n_turns);
    // 64-bit max_len: no truncation when pooling a whole set.
    std::size_t ignored = 0;
    auto batches = make_batches(data, data.size(), max_len, /*seed=*/0, &ignored);
    return batches.at(0);
}

}  // namespace

double dataset_loss(const ModelParameters& params, const std::vector<FeaturizedDialogue>& data) {
    if (data.empty()) throw std::invalid_argument("dataset_loss: empty dataset");
    Batch batch = whole_set_as_batch(data);
    Tape tape(/*grad_enabled=*/false);
    Rng rng(0);
    return batch_loss(tape, params, batch, /*training=*/false, rng).total.value();
}

ModelParameters clone_parameters(const ModelParameters& params) {
    ModelParameters copy = params;
    auto deep = [](Tensor& t) {
        if (t.defined()) t = Tensor::from(t.rows(), t.cols(), t.vec(), t.requires_grad());
    };
    for (auto& layer : copy.layers) {
        for (LstmCellWeights* w : {&layer.fwd, &layer.bwd}) {
            deep(w->w_x);
            deep(w->w_h);
            deep(w->b);
        }
    }
    deep(copy.turn_w);
    deep(copy.turn_b);
    deep(copy.attn_w);
    deep(copy.attn_b);
    deep(copy.attn_v);
    deep(copy.dlg_w);
    deep(copy.dlg_b);
    deep(copy.s_t);
    deep(copy.s_d);
    return copy;
}

TrainResult train(const ModelConfig& model_config, const std::vector<FeaturizedDialogue>& train,
                  const std::vector<FeaturizedDialogue>& val, const TrainConfig& train_config) {
    if (train.empty()) throw std::invalid_argument("train: empty training split");
    if (val.empty()) throw std::invalid_argument("train: empty validation split");
    if (train_config.patience < 1) throw std::invalid_argument("train: patience must be >= 1");

    ModelParameters params =
        init_parameters(model_config, derive_seed(train_config.seed, 0x1217));
    std::vector<Tensor> tensors = params.all();
    Optimizer optimizer(train_config.optimizer, train_config.lr);

    TrainResult result;
    result.params = clone_parameters(params);
    double best_val = std::numeric_limits<double>::infinity();

    for (std::size_t epoch = 0; epoch < train_config.max_epochs; ++epoch) {
        std::size_t truncated = 0;
        auto batches = make_batches(train, train_config.batch_size,
                                    train_config.max_sequence_length,
                                    derive_seed(train_config.seed, 0xE000 + epoch), &truncated);
        result.history.truncated_dialogues += truncated;
        Rng rng(derive_seed(train_config.seed, 0xD000 + epoch));

        double loss_sum = 0.0;
        for (std::size_t b = 0; b < batches.size(); ++b) {
            Tape tape;
            BatchLossParts parts = batch_loss(tape, params, batches[b], /*training=*/true, rng);
            const double loss = parts.total.value();
            if (!std::isfinite(loss)) {
                throw std::runtime_error(
                    "train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                    std::to_string(b) + " (turn_mse=" + std::to_string(parts.turn_mse) +
                    ", dialogue_mse=" + std::to_string(parts.dialogue_mse) + ")");
            }
            loss_sum += loss;
            params.zero_grads();
            tape.backward(parts.total);
            optimizer.step(tensors);
            params.clamp_noise_params();
        }

        TrainHistory::Epoch entry;
        entry.train_loss = loss_sum / static_cast<double>(batches.size());
        entry.val_loss = dataset_loss(params, val);
        if (params.s_t.defined()) {
            entry.s_t = params.s_t.value();
            entry.s_d = params.s_d.value();
        }
        result.history.epochs.push_back(entry);

        if (entry.val_loss < best_val) {
            best_val = entry.val_loss;
            result.params = clone_parameters(params);
            result.history.best_epoch = epoch;
        } else if (epoch - result.history.best_epoch >= train_config.patience) {
            log::info("early stop at epoch " + std::to_string(epoch) + " (best epoch " +
                      std::to_string(result.history.best_epoch) + ")");
            break;
        }
    }
    return result;
}

void export_history(const TrainHistory& history, std::ostream& out) {
    out << "epoch\ttrain_loss\tval_loss\ts_t\ts_d\tbest\n";
    out.precision(10);
    for (std::size_t e = 0; e < history.epochs.size(); ++e) {
        const auto& h = history.epochs[e];
        out << e << '\t' << h.train_loss << '\t' << h.val_loss << '\t' << h.s_t << '\t' << h.s_d
            << '\t' << (e == history.best_epoch ? 1 : 0) << "\n";
    }
}

std::size_t GridSpace::size() const {
    return n_layers.size() * hidden_sizes.size() * batch_sizes.size() * optimizers.size() *
           dropouts.size() * learning_rates.size() * sequence_lengths.size();
}

std::vector<GridTrial> grid_search(ModelVariant variant, std::size_t embedding_dim,
                                   const GridSpace& space,
                                   const std::vector<FeaturizedDialogue>& train_data,
                                   const std::vector<FeaturizedDialogue>& val_data,
                                   std::size_t max_epochs, std::size_t patience,
                                   std::uint64_t master_seed, std::size_t jobs) {
    if (space.size() == 0) throw std::invalid_argument("grid_search: empty space");

    std::vector<GridTrial> trials;
    for (std::size_t nl : space.n_layers)
        for (std::size_t hs : space.hidden_sizes)
            for (std::size_t bs : space.batch_sizes)
                for (OptimizerKind opt : space.optimizers)
                    for (double dp : space.dropouts)
                        for (double lr : space.learning_rates)
                            for (std::size_t sl : space.sequence_lengths) {
                                GridTrial t;
                                t.model.variant = variant;
                                t.model.n_layers = nl;
                                t.model.hidden_size = hs;
                                t.model.dropout_p = dp;
                                t.model.embedding_dim = embedding_dim;
                                t.train.batch_size = bs;
                                t.train.optimizer = opt;
                                t.train.lr = lr;
                                t.train.max_sequence_length = sl;
                                t.train.max_epochs = max_epochs;
                                t.train.patience = patience;
                                trials.push_back(t);
                            }
    for (std::size_t i = 0; i < trials.size(); ++i)
        trials[i].train.seed = derive_seed(master_seed, i);

    auto run_trial = [&](GridTrial& t) {
        TrainResult r = train(t.model, train_data, val_data, t.train);
        t.val_loss = r.history.epochs[r.history.best_epoch].val_loss;
        t.best_epoch = r.history.best_epoch;
    };

    if (jobs <= 1 || trials.size() <= 1) {
        for (auto& t : trials) run_trial(t);
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= trials.size()) return;
                run_trial(trials[i]);
            }
        };
        std::vector<std::thread> pool;
        for (std::size_t j = 0; j < std::min(jobs, trials.size()); ++j)
            pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    std::stable_sort(trials.begin(), trials.end(),
                     [](const GridTrial& a, const GridTrial& b) { return a.val_loss < b.val_loss; });
    return trials;
}

void export_grid_report(const std::vector<GridTrial>& trials, std::ostream& out) {
    out << "rank\tval_loss\tn_layers\thidden\tbatch\toptimizer\tdropout\tlr\tmax_seq_len\tbest_epoch\n";
    out.precision(10);
    for (std::size_t i = 0; i < trials.size(); ++i) {
        const auto& t = trials[i];
        out << (i + 1) << '\t' << t.val_loss << '\t' << t.model.n_layers << '\t'
            << t.model.hidden_size << '\t' << t.train.batch_size << '\t'
            << to_string(t.train.optimizer) << '\t' << t.model.dropout_p << '\t' << t.train.lr
            << '\t' << t.train.max_sequence_length << '\t' << t.best_epoch << "\n";
    }
}

}  // namespace dqe
