#pragma once
// Per-turn feature extraction: similarity scalars over a (prev, this, next)
// turn window, SLU confidences, length/timing, popularity statistics derived
// from the training split, and the two sentence embeddings.

#include <array>
#include <map>
#include <string>
#include <vector>

#include "dqe/corpus.hpp"
#include "dqe/embedding.hpp"

namespace dqe {

// Lowercase, whitespace-split, leading/trailing punctuation stripped,
// empty tokens dropped.
std::vector<std::string> tokenize(const std::string& text);

// |A ∩ B| / |A ∪ B| over token sets; 0 when both are empty (degenerate).
double jaccard_similarity(const std::vector<std::string>& a, const std::vector<std::string>& b,
                          bool* degenerate = nullptr);

struct PopularityTables {
    std::map<std::string, double> domain_popularity;  // avg requests per user
    std::map<std::string, double> intent_popularity;
    double fallback = 0.0;  // value for unseen keys

    double domain(const std::string& d) const;
    double intent(const std::string& i) const;
};

// Average requests per user for each NLU domain/intent, with distinct
// dialogue ids standing in for distinct users. Built from the training
// split only.
PopularityTables compute_popularity_tables(const Corpus& train);

constexpr std::size_t kScalarFeatureCount = 15;
constexpr std::size_t kMaskCount = 3;

// Column order of the scalar block.
enum ScalarFeature : std::size_t {
    kAsrConf = 0,
    kNluConf,
    kBargeIn,
    kIntentSimilarity,
    kSemParaphrase,
    kSynParaphrase,
    kSemCoherence,
    kSynCoherence,
    kSemRepetition,
    kSynRepetition,
    kLenUser,
    kLenResp,
    kDurationNext,
    kDomainPop,
    kIntentPop,
};

const std::array<const char*, kScalarFeatureCount>& scalar_feature_names();

struct TurnFeatures {
    std::array<double, kScalarFeatureCount> scalars{};
    bool has_prev = false;
    bool has_next = false;
    bool has_nlu = false;
    EmbeddingVector e_usr;
    EmbeddingVector e_sys;
};

TurnFeatures extract_turn_features(const Dialogue& dialogue, std::size_t n,
                                   const EmbeddingProvider& provider,
                                   const PopularityTables& tables);

// Z-scores the scalar block with training-split statistics. Columns with
// zero variance normalize to 0.
class FeatureNormalizer {
public:
    void fit(const std::vector<std::vector<TurnFeatures>>& train_features);
    std::array<double, kScalarFeatureCount> apply(
        const std::array<double, kScalarFeatureCount>& scalars) const;

    bool fitted() const { return fitted_; }
    const std::array<double, kScalarFeatureCount>& mean() const { return mean_; }
    const std::array<double, kScalarFeatureCount>& stddev() const { return std_; }
    void set(const std::array<double, kScalarFeatureCount>& mean,
             const std::array<double, kScalarFeatureCount>& stddev);

private:
    bool fitted_ = false;
    std::array<double, kScalarFeatureCount> mean_{};
    std::array<double, kScalarFeatureCount> std_{};
};

// Row layout: e_usr | e_sys | normalized scalars | masks (0/1).
// F = 2 * provider.dimension() + kScalarFeatureCount + kMaskCount.
struct FeatureMatrix {
    std::size_t n_turns = 0;
    std::size_t width = 0;
    std::vector<double> values;  // row-major

    const double* row(std::size_t n) const { return values.data() + n * width; }
};

std::vector<TurnFeatures> extract_dialogue_features(const Dialogue& dialogue,
                                                    const EmbeddingProvider& provider,
                                                    const PopularityTables& tables);

FeatureMatrix assemble_feature_matrix(const Dialogue& dialogue,
                                      const EmbeddingProvider& provider,
                                      const PopularityTables& tables,
                                      const FeatureNormalizer& normalizer);

// Debug export: one row per turn, tab-separated, with a header naming every
// column in matrix order.
void export_feature_matrix(const FeatureMatrix& matrix, const Dialogue& dialogue,
                           std::size_t embedding_dim, std::ostream& out);

}  // namespace dqe
