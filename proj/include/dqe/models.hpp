#pragma once
// Satisfaction-estimation model variants.
//
// Turn level: uni-directional stacked LSTM, rating head per step, strictly
// causal. Dialogue level: stacked BiLSTM, with either the final hidden state
// or a self-attention context feeding the rating head. Joint variants share
// the BiLSTM trunk, predict per-turn ratings from the forward-direction
// states, attend over those predicted ratings, and train both heads under a
// learned-noise weighted loss.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dqe/features.hpp"
#include "dqe/tensor.hpp"

namespace dqe {

enum class ModelVariant {
    lstm_embedding,
    lstm_embedding_features,
    bilstm_features,
    bilstm_embeddings_features,
    bilstm_features_attn,
    bilstm_embeddings_features_attn,
    joint_embeddings_attn,
    joint_embeddings_features_attn,
};

constexpr std::size_t kVariantCount = 8;
const std::vector<ModelVariant>& all_variants();

std::string to_string(ModelVariant v);
ModelVariant variant_from_string(const std::string& s);

bool is_turn_variant(ModelVariant v);      // uni-LSTM, turn head only
bool is_joint_variant(ModelVariant v);     // both heads + noise parameters
bool is_dialogue_variant(ModelVariant v);  // has a dialogue head
bool has_attention(ModelVariant v);
bool uses_embeddings(ModelVariant v);
bool uses_scalar_features(ModelVariant v);

struct ModelConfig {
    ModelVariant variant = ModelVariant::joint_embeddings_features_attn;
    std::size_t hidden_size = 32;
    std::size_t n_layers = 1;
    double dropout_p = 0.0;
    std::size_t embedding_dim = 16;

    void validate() const;
    // Width of the input slice this variant reads from a full feature row.
    std::size_t input_width() const;
    // Column range [begin, end) selected out of the assembled matrix.
    std::pair<std::size_t, std::size_t> input_columns() const;
};

struct LstmCellWeights {
    Tensor w_x;  // in x 4H, gate order [i f g o]
    Tensor w_h;  // H x 4H
    Tensor b;    // 1 x 4H
};

// Standard LSTM cell. x: 1 x in, h/c: 1 x H. Returns (h', c').
std::pair<Tensor, Tensor> lstm_cell_forward(Tape& tape, const Tensor& x, const Tensor& h,
                                            const Tensor& c, const LstmCellWeights& weights);

struct ModelParameters {
    ModelConfig config;

    struct Layer {
        LstmCellWeights fwd;
        LstmCellWeights bwd;  // defined only for BiLSTM variants
    };
    std::vector<Layer> layers;

    Tensor turn_w, turn_b;  // turn rating head
    Tensor attn_w, attn_b, attn_v;
    Tensor dlg_w, dlg_b;  // dialogue rating head
    Tensor s_t, s_d;      // log task variances (joint variants)

    std::vector<Tensor> all() const;
    std::vector<std::pair<std::string, Tensor>> named() const;
    void zero_grads();
    // Keeps the stored noise parameters inside [-10, 10].
    void clamp_noise_params();
};

ModelParameters init_parameters(const ModelConfig& config, std::uint64_t seed);

struct Prediction {
    std::vector<double> turn_ratings;          // empty for non-joint dialogue variants
    std::optional<double> dialogue_rating;     // dialogue variants only
    std::vector<double> attention_weights;     // attention variants only
};

// Differentiable forward pass over one dialogue. `features` is the full
// assembled matrix (leaf tensor, T x F); the variant's column slice is taken
// internally. Only rows [0, length) are real turns; trailing rows are
// padding and are never read.
struct ForwardOutput {
    Tensor turn_ratings;     // L x 1 when the variant has a turn head
    Tensor dialogue_rating;  // 1 x 1 when the variant has a dialogue head
    Tensor attention;        // 1 x L for attention variants
};

ForwardOutput model_forward(Tape& tape, const ModelParameters& params, const Tensor& features,
                            std::size_t length, bool training, Rng& rng);

// Inference wrappers (no tape kept, no dropout).
std::vector<double> turn_forward(const FeatureMatrix& features, const ModelParameters& params);
Prediction dialogue_forward(const FeatureMatrix& features, const ModelParameters& params);

// L = exp(-s_t)/2 * L_t + exp(-s_d)/2 * L_d + s_t/2 + s_d/2, with s_t, s_d
// clamped to [-10, 10] before use.
Tensor multitask_loss_from_components(Tape& tape, const Tensor& turn_loss,
                                      const Tensor& dialogue_loss, const Tensor& s_t,
                                      const Tensor& s_d);

Tensor multitask_loss(Tape& tape, const Tensor& turn_preds, const Tensor& turn_labels,
                      const Tensor& turn_mask, const Tensor& dialogue_preds,
                      const Tensor& dialogue_labels, const Tensor& dialogue_mask,
                      const Tensor& s_t, const Tensor& s_d);

// exp(s_d - s_t) = sigma_d^2 / sigma_t^2. Throws for non-joint variants.
double noise_ratio(const ModelParameters& params);

}  // namespace dqe
