#include "dqe/models.hpp"

#include <cmath>
#include <stdexcept>

namespace dqe {

const std::vector<ModelVariant>& all_variants() {
    static const std::vector<ModelVariant> v = {
        ModelVariant::lstm_embedding,
        ModelVariant::lstm_embedding_features,
        ModelVariant::bilstm_features,
        ModelVariant::bilstm_embeddings_features,
        ModelVariant::bilstm_features_attn,
        ModelVariant::bilstm_embeddings_features_attn,
        ModelVariant::joint_embeddings_attn,
        ModelVariant::joint_embeddings_features_attn,
    };
    return v;
}

std::string to_string(ModelVariant v) {
    switch (v) {
        case ModelVariant::lstm_embedding: return "LSTM_embedding";
        case ModelVariant::lstm_embedding_features: return "LSTM_embedding_features";
        case ModelVariant::bilstm_features: return "BiLSTM_features";
        case ModelVariant::bilstm_embeddings_features: return "BiLSTM_embeddings_features";
        case ModelVariant::bilstm_features_attn: return "BiLSTM_features_attn";
        case ModelVariant::bilstm_embeddings_features_attn:
            return "BiLSTM_embeddings_features_attn";
        case ModelVariant::joint_embeddings_attn: return "Joint_embeddings_attn";
        case ModelVariant::joint_embeddings_features_attn:
            return "Joint_embeddings_features_attn";
    }
    return "?";
}

ModelVariant variant_from_string(const std::string& s) {
    for (ModelVariant v : all_variants())
        if (to_string(v) == s) return v;
    throw std::invalid_argument("unknown model variant: " + s);
}

bool is_turn_variant(ModelVariant v) {
    return v == ModelVariant::lstm_embedding || v == ModelVariant::lstm_embedding_features;
}

bool is_joint_variant(ModelVariant v) {
    return v == ModelVariant::joint_embeddings_attn ||
           v == ModelVariant::joint_embeddings_features_attn;
}

bool is_dialogue_variant(ModelVariant v) { return !is_turn_variant(v); }

bool has_attention(ModelVariant v) {
    return v == ModelVariant::bilstm_features_attn ||
           v == ModelVariant::bilstm_embeddings_features_attn || is_joint_variant(v);
}

bool uses_embeddings(ModelVariant v) {
    return v != ModelVariant::bilstm_features && v != ModelVariant::bilstm_features_attn;
}

bool uses_scalar_features(ModelVariant v) {
    return v != ModelVariant::lstm_embedding && v != ModelVariant::joint_embeddings_attn;
}

void ModelConfig::validate() const {
    if (hidden_size < 1) throw std::invalid_argument("hidden_size must be >= 1");
    if (n_layers < 1 || n_layers > 3) throw std::invalid_argument("n_layers must be 1, 2 or 3");
    if (dropout_p < 0.0 || dropout_p >= 1.0)
        throw std::invalid_argument("dropout_p must be in [0, 1)");
    if (embedding_dim < 1) throw std::invalid_argument("embedding_dim must be >= 1");
}

std::pair<std::size_t, std::size_t> ModelConfig::input_columns() const {
    const std::size_t emb = 2 * embedding_dim;
    const std::size_t scalars = kScalarFeatureCount + kMaskCount;
    if (uses_embeddings(variant) && uses_scalar_features(variant)) return {0, emb + scalars};
    if (uses_embeddings(variant)) return {0, emb};
    return {emb, emb + scalars};
}

std::size_t ModelConfig::input_width() const {
    auto [b, e] = input_columns();
    return e - b;
}

std::pair<Tensor, Tensor> lstm_cell_forward(Tape& tape, const Tensor& x, const Tensor& h,
                                            const Tensor& c, const LstmCellWeights& weights) {
    const std::size_t hidden = weights.w_h.rows();
    Tensor z = tape.add_rowvec(tape.add(tape.matmul(x, weights.w_x), tape.matmul(h, weights.w_h)),
                               weights.b);
    Tensor gi = tape.sigmoid(tape.slice_cols(z, 0, hidden));
    Tensor gf = tape.sigmoid(tape.slice_cols(z, hidden, 2 * hidden));
    Tensor gg = tape.tanh(tape.slice_cols(z, 2 * hidden, 3 * hidden));
    Tensor go = tape.sigmoid(tape.slice_cols(z, 3 * hidden, 4 * hidden));
    Tensor c_next = tape.add(tape.mul(gf, c), tape.mul(gi, gg));
    Tensor h_next = tape.mul(go, tape.tanh(c_next));
    return {h_next, c_next};
}

namespace {

Tensor init_uniform(std::size_t rows, std::size_t cols, double bound, Rng& rng) {
    std::vector<double> data(rows * cols);
    for (auto& v : data) v = rng.uniform(-bound, bound);
    return Tensor::from(rows, cols, std::move(data), /*requires_grad=*/true);
}

LstmCellWeights init_cell(std::size_t in, std::size_t hidden, double bound, Rng& rng) {
    LstmCellWeights w;
    w.w_x = init_uniform(in, 4 * hidden, bound, rng);
    w.w_h = init_uniform(hidden, 4 * hidden, bound, rng);
    w.b = Tensor::zeros(1, 4 * hidden, /*requires_grad=*/true);
    // Forget-gate bias starts at 1 so early training does not wipe state.
    for (std::size_t j = hidden; j < 2 * hidden; ++j) w.b.data()[j] = 1.0;
    return w;
}

}  // namespace

ModelParameters init_parameters(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(derive_seed(seed, 0x9A7A));
    const std::size_t hidden = config.hidden_size;
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
    const bool bidir = is_dialogue_variant(config.variant);

    ModelParameters p;
    p.config = config;
    std::size_t in = config.input_width();
    for (std::size_t l = 0; l < config.n_layers; ++l) {
        ModelParameters::Layer layer;
        layer.fwd = init_cell(in, hidden, bound, rng);
        if (bidir) layer.bwd = init_cell(in, hidden, bound, rng);
        p.layers.push_back(std::move(layer));
        in = bidir ? 2 * hidden : hidden;
    }

    if (is_turn_variant(config.variant) || is_joint_variant(config.variant)) {
        p.turn_w = init_uniform(hidden, 1, bound, rng);
        p.turn_b = Tensor::zeros(1, 1, true);
    }
    if (has_attention(config.variant)) {
        p.attn_w = init_uniform(2 * hidden, hidden, bound, rng);
        p.attn_b = Tensor::zeros(1, hidden, true);
        p.attn_v = init_uniform(hidden, 1, bound, rng);
    }
    if (is_dialogue_variant(config.variant)) {
        std::size_t dlg_in = 2 * hidden;
        if (is_joint_variant(config.variant)) dlg_in = 1 + 2 * hidden;
        p.dlg_w = init_uniform(dlg_in, 1, bound, rng);
        p.dlg_b = Tensor::zeros(1, 1, true);
    }
    if (is_joint_variant(config.variant)) {
        p.s_t = Tensor::zeros(1, 1, true);
        p.s_d = Tensor::zeros(1, 1, true);
    }
    return p;
}

std::vector<std::pair<std::string, Tensor>> ModelParameters::named() const {
    std::vector<std::pair<std::string, Tensor>> out;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const std::string prefix = "layer" + std::to_string(l);
        out.emplace_back(prefix + ".fwd.w_x", layers[l].fwd.w_x);
        out.emplace_back(prefix + ".fwd.w_h", layers[l].fwd.w_h);
        out.emplace_back(prefix + ".fwd.b", layers[l].fwd.b);
        if (layers[l].bwd.w_x.defined()) {
            out.emplace_back(prefix + ".bwd.w_x", layers[l].bwd.w_x);
            out.emplace_back(prefix + ".bwd.w_h", layers[l].bwd.w_h);
            out.emplace_back(prefix + ".bwd.b", layers[l].bwd.b);
        }
    }
    auto push = [&out](const char* name, const Tensor& t) {
        if (t.defined()) out.emplace_back(name, t);
    };
    push("turn_head.w", turn_w);
    push("turn_head.b", turn_b);
    push("attention.w", attn_w);
    push("attention.b", attn_b);
    push("attention.v", attn_v);
    push("dialogue_head.w", dlg_w);
    push("dialogue_head.b", dlg_b);
    push("s_t", s_t);
    push("s_d", s_d);
    return out;
}

std::vector<Tensor> ModelParameters::all() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : named()) out.push_back(t);
    return out;
}

void ModelParameters::zero_grads() {
    for (auto& t : all()) t.zero_grad();
}

void ModelParameters::clamp_noise_params() {
    for (Tensor* t : {&s_t, &s_d}) {
        if (!t->defined()) continue;
        double& v = t->data()[0];
        if (v < -10.0) v = -10.0;
        if (v > 10.0) v = 10.0;
    }
}

namespace {

// 1 + 4 * sigmoid(head(x)): ratings live in the open interval (1, 5).
Tensor rating_head(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& b) {
    Tensor z = tape.add(tape.matmul(x, w), b);
    return tape.add_const(tape.scale(tape.sigmoid(z), 4.0), 1.0);
}

// Per-step leaf input rows for the variant's column slice.
std::vector<Tensor> input_rows(const Tensor& features, std::size_t length,
                               std::size_t col_begin, std::size_t col_end) {
    std::vector<Tensor> rows;
    rows.reserve(length);
    const std::size_t width = features.cols();
    for (std::size_t t = 0; t < length; ++t) {
        std::vector<double> row(features.data() + t * width + col_begin,
                                features.data() + t * width + col_end);
        rows.push_back(Tensor::row(std::move(row)));
    }
    return rows;
}

// Runs one LSTM direction over the given step inputs (already ordered) and
// returns the hidden state per step.
std::vector<Tensor> run_direction(Tape& tape, const std::vector<Tensor>& steps,
                                  const LstmCellWeights& weights, std::size_t hidden) {
    std::vector<Tensor> states;
    states.reserve(steps.size());
    Tensor h = Tensor::zeros(1, hidden);
    Tensor c = Tensor::zeros(1, hidden);
    for (const Tensor& x : steps) {
        auto [h_next, c_next] = lstm_cell_forward(tape, x, h, c, weights);
        h = h_next;
        c = c_next;
        states.push_back(h);
    }
    return states;
}

Tensor attention_scores(Tape& tape, const ModelParameters& p, const std::vector<Tensor>& states) {
    std::vector<Tensor> scores;
    scores.reserve(states.size());
    for (const Tensor& s : states) {
        Tensor hidden = tape.tanh(tape.add_rowvec(tape.matmul(s, p.attn_w), p.attn_b));
        scores.push_back(tape.matmul(hidden, p.attn_v));  // 1 x 1
    }
    return tape.concat_cols(scores);  // 1 x L
}

}  // namespace

ForwardOutput model_forward(Tape& tape, const ModelParameters& params, const Tensor& features,
                            std::size_t length, bool training, Rng& rng) {
    const ModelConfig& config = params.config;
    if (length == 0 || length > features.rows())
        throw std::invalid_argument("model_forward: bad dialogue length");
    auto [c0, c1] = config.input_columns();
    if (c1 > features.cols())
        throw std::invalid_argument("model_forward: feature width " +
                                    std::to_string(features.cols()) +
                                    " too small for variant input columns");
    const std::size_t hidden = config.hidden_size;
    const bool bidir = is_dialogue_variant(config.variant);

    std::vector<Tensor> inputs = input_rows(features, length, c0, c1);
    std::vector<Tensor> fwd_states, bwd_states;  // per original step, top layer
    for (std::size_t l = 0; l < config.n_layers; ++l) {
        if (l > 0 && training && config.dropout_p > 0.0) {
            for (auto& x : inputs) x = tape.dropout(x, config.dropout_p, true, rng);
        }
        fwd_states = run_direction(tape, inputs, params.layers[l].fwd, hidden);
        if (bidir) {
            std::vector<Tensor> rev(inputs.rbegin(), inputs.rend());
            std::vector<Tensor> rev_states = run_direction(tape, rev, params.layers[l].bwd, hidden);
            bwd_states.assign(rev_states.rbegin(), rev_states.rend());
            inputs.clear();
            for (std::size_t t = 0; t < length; ++t)
                inputs.push_back(tape.concat_cols({fwd_states[t], bwd_states[t]}));
        } else {
            inputs = fwd_states;
        }
    }

    ForwardOutput out;
    if (is_turn_variant(config.variant) || is_joint_variant(config.variant)) {
        // Turn ratings read forward-direction states only, keeping the
        // turn-level task causal.
        std::vector<Tensor> ratings;
        ratings.reserve(length);
        for (std::size_t t = 0; t < length; ++t) {
            Tensor h = fwd_states[t];
            if (training && config.dropout_p > 0.0)
                h = tape.dropout(h, config.dropout_p, true, rng);
            ratings.push_back(rating_head(tape, h, params.turn_w, params.turn_b));
        }
        out.turn_ratings = tape.concat_rows(ratings);  // L x 1
    }

    if (!is_dialogue_variant(config.variant)) return out;

    // h_{t_N}: forward final state and backward final state.
    Tensor h_final = tape.concat_cols({fwd_states[length - 1], bwd_states[0]});

    Tensor rep;
    if (!has_attention(config.variant)) {
        rep = h_final;
    } else {
        Tensor scores = attention_scores(tape, params, inputs);  // inputs = top BiLSTM states
        Tensor ones = Tensor::row(std::vector<double>(length, 1.0));
        out.attention = tape.masked_softmax(scores, ones);  // 1 x L
        if (is_joint_variant(config.variant)) {
            // Aggregate the predicted turn ratings under the learnt weights
            // and pair the aggregate with the dialogue representation.
            Tensor aggregate = tape.matmul(out.attention, out.turn_ratings);  // 1 x 1
            rep = tape.concat_cols({aggregate, h_final});
        } else {
            // Self-attention context over the BiLSTM states.
            Tensor stacked = tape.concat_rows(inputs);              // L x 2H
            rep = tape.matmul(out.attention, stacked);              // 1 x 2H
        }
    }
    if (training && config.dropout_p > 0.0) rep = tape.dropout(rep, config.dropout_p, true, rng);
    out.dialogue_rating = rating_head(tape, rep, params.dlg_w, params.dlg_b);
    return out;
}

namespace {

Tensor features_to_tensor(const FeatureMatrix& m) {
    return Tensor::from(m.n_turns, m.width, m.values);
}

}  // namespace

std::vector<double> turn_forward(const FeatureMatrix& features, const ModelParameters& params) {
    if (!is_turn_variant(params.config.variant) && !is_joint_variant(params.config.variant))
        throw std::invalid_argument("turn_forward: variant has no turn head");
    Tape tape(/*grad_enabled=*/false);
    Rng rng(0);
    ForwardOutput out =
        model_forward(tape, params, features_to_tensor(features), features.n_turns, false, rng);
    return out.turn_ratings.vec();
}

Prediction dialogue_forward(const FeatureMatrix& features, const ModelParameters& params) {
    if (!is_dialogue_variant(params.config.variant))
        throw std::invalid_argument("dialogue_forward: variant has no dialogue head");
    Tape tape(/*grad_enabled=*/false);
    Rng rng(0);
    ForwardOutput out =
        model_forward(tape, params, features_to_tensor(features), features.n_turns, false, rng);
    Prediction pred;
    if (out.turn_ratings.defined()) pred.turn_ratings = out.turn_ratings.vec();
    pred.dialogue_rating = out.dialogue_rating.value();
    if (out.attention.defined()) pred.attention_weights = out.attention.vec();
    return pred;
}

Tensor multitask_loss_from_components(Tape& tape, const Tensor& turn_loss,
                                      const Tensor& dialogue_loss, const Tensor& s_t,
                                      const Tensor& s_d) {
    Tensor st = tape.clamp(s_t, -10.0, 10.0);
    Tensor sd = tape.clamp(s_d, -10.0, 10.0);
    Tensor term_t = tape.scale(tape.mul(tape.exp(tape.scale(st, -1.0)), turn_loss), 0.5);
    Tensor term_d = tape.scale(tape.mul(tape.exp(tape.scale(sd, -1.0)), dialogue_loss), 0.5);
    Tensor reg = tape.add(tape.scale(st, 0.5), tape.scale(sd, 0.5));
    return tape.add(tape.add(term_t, term_d), reg);
}

Tensor multitask_loss(Tape& tape, const Tensor& turn_preds, const Tensor& turn_labels,
                      const Tensor& turn_mask, const Tensor& dialogue_preds,
                      const Tensor& dialogue_labels, const Tensor& dialogue_mask,
                      const Tensor& s_t, const Tensor& s_d) {
    Tensor l_t = tape.mse(turn_preds, turn_labels, turn_mask);
    Tensor l_d = tape.mse(dialogue_preds, dialogue_labels, dialogue_mask);
    return multitask_loss_from_components(tape, l_t, l_d, s_t, s_d);
}

double noise_ratio(const ModelParameters& params) {
    if (!is_joint_variant(params.config.variant))
        throw std::invalid_argument("noise_ratio: defined for joint variants only");
    return std::exp(params.s_d.value() - params.s_t.value());
}

}  // namespace dqe
