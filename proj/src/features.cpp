#include "dqe/features.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <ostream>
#include <set>
#include <stdexcept>

namespace dqe {

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        while (i < n && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t j = i;
        while (j < n && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
        if (j > i) {
            std::size_t a = i, b = j;
            while (a < b && std::ispunct(static_cast<unsigned char>(text[a]))) ++a;
            while (b > a && std::ispunct(static_cast<unsigned char>(text[b - 1]))) --b;
            if (b > a) {
                std::string tok;
                tok.reserve(b - a);
                for (std::size_t k = a; k < b; ++k)
                    tok.push_back(static_cast<char>(
                        std::tolower(static_cast<unsigned char>(text[k]))));
                tokens.push_back(std::move(tok));
            }
        }
        i = j;
    }
    return tokens;
}

double jaccard_similarity(const std::vector<std::string>& a, const std::vector<std::string>& b,
                          bool* degenerate) {
    if (degenerate) *degenerate = false;
    std::set<std::string> sa(a.begin(), a.end());
    std::set<std::string> sb(b.begin(), b.end());
    if (sa.empty() && sb.empty()) {
        if (degenerate) *degenerate = true;
        return 0.0;
    }
    std::size_t inter = 0;
    for (const auto& t : sa) inter += sb.count(t);
    std::size_t uni = sa.size() + sb.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

double PopularityTables::domain(const std::string& d) const {
    auto it = domain_popularity.find(d);
    return it == domain_popularity.end() ? fallback : it->second;
}

double PopularityTables::intent(const std::string& i) const {
    auto it = intent_popularity.find(i);
    return it == intent_popularity.end() ? fallback : it->second;
}

PopularityTables compute_popularity_tables(const Corpus& train) {
    if (train.dialogues.empty())
        throw std::invalid_argument("compute_popularity_tables: training corpus is empty");
    PopularityTables tables;
    std::map<std::string, std::size_t> domain_counts, intent_counts;
    for (const auto& d : train.dialogues) {
        for (const auto& t : d.turns) {
            if (t.nlu_domain) domain_counts[*t.nlu_domain] += 1;
            if (t.nlu_intent) intent_counts[*t.nlu_intent] += 1;
        }
    }
    // Distinct dialogue ids approximate distinct users.
    const double users = static_cast<double>(train.dialogues.size());
    for (const auto& [k, c] : domain_counts)
        tables.domain_popularity[k] = static_cast<double>(c) / users;
    for (const auto& [k, c] : intent_counts)
        tables.intent_popularity[k] = static_cast<double>(c) / users;
    return tables;
}

const std::array<const char*, kScalarFeatureCount>& scalar_feature_names() {
    static const std::array<const char*, kScalarFeatureCount> names = {
        "asr_conf",       "nlu_conf",       "barge_in",       "intent_similarity",
        "sem_paraphrase", "syn_paraphrase", "sem_coherence",  "syn_coherence",
        "sem_repetition", "syn_repetition", "len_user",       "len_resp",
        "duration_next",  "domain_pop",     "intent_pop",
    };
    return names;
}

TurnFeatures extract_turn_features(const Dialogue& dialogue, std::size_t n,
                                   const EmbeddingProvider& provider,
                                   const PopularityTables& tables) {
    if (n >= dialogue.turns.size())
        throw std::out_of_range("extract_turn_features: turn index out of range");
    const Turn& turn = dialogue.turns[n];
    const Turn* prev = n > 0 ? &dialogue.turns[n - 1] : nullptr;
    const Turn* next = n + 1 < dialogue.turns.size() ? &dialogue.turns[n + 1] : nullptr;

    TurnFeatures f;
    f.has_prev = prev != nullptr;
    f.has_next = next != nullptr;
    f.has_nlu = turn.nlu_confidence.has_value() || turn.nlu_intent.has_value() ||
                turn.nlu_domain.has_value();

    const auto u_tok = tokenize(turn.user_text);
    const auto s_tok = tokenize(turn.system_text);
    f.e_usr = provider.embed(turn.user_text);
    f.e_sys = provider.embed(turn.system_text);

    auto& s = f.scalars;
    s[kAsrConf] = turn.asr_confidence;
    s[kBargeIn] = turn.barge_in ? 1.0 : 0.0;
    s[kLenUser] = static_cast<double>(u_tok.size());
    s[kLenResp] = static_cast<double>(s_tok.size());
    s[kSemCoherence] = cosine_similarity(f.e_usr, f.e_sys);
    s[kSynCoherence] = jaccard_similarity(u_tok, s_tok);

    if (f.has_nlu) {
        s[kNluConf] = turn.nlu_confidence.value_or(0.0);
        if (turn.nlu_domain) s[kDomainPop] = tables.domain(*turn.nlu_domain);
        if (turn.nlu_intent) s[kIntentPop] = tables.intent(*turn.nlu_intent);
    }

    if (f.has_next) {
        const auto nu_tok = tokenize(next->user_text);
        s[kSemParaphrase] = cosine_similarity(f.e_usr, provider.embed(next->user_text));
        s[kSynParaphrase] = jaccard_similarity(u_tok, nu_tok);
        s[kDurationNext] = next->user_timestamp - turn.user_timestamp;
        if (f.has_nlu && turn.nlu_intent && next->nlu_intent)
            s[kIntentSimilarity] = *turn.nlu_intent == *next->nlu_intent ? 1.0 : 0.0;
    }

    if (f.has_prev) {
        const auto ps_tok = tokenize(prev->system_text);
        s[kSemRepetition] = cosine_similarity(f.e_sys, provider.embed(prev->system_text));
        s[kSynRepetition] = jaccard_similarity(s_tok, ps_tok);
    }
    return f;
}

std::vector<TurnFeatures> extract_dialogue_features(const Dialogue& dialogue,
                                                    const EmbeddingProvider& provider,
                                                    const PopularityTables& tables) {
    std::vector<TurnFeatures> out;
    out.reserve(dialogue.turns.size());
    for (std::size_t n = 0; n < dialogue.turns.size(); ++n)
        out.push_back(extract_turn_features(dialogue, n, provider, tables));
    return out;
}

void FeatureNormalizer::fit(const std::vector<std::vector<TurnFeatures>>& train_features) {
    std::array<double, kScalarFeatureCount> sum{}, sumsq{};
    std::size_t count = 0;
    for (const auto& dlg : train_features) {
        for (const auto& f : dlg) {
            for (std::size_t k = 0; k < kScalarFeatureCount; ++k) {
                sum[k] += f.scalars[k];
                sumsq[k] += f.scalars[k] * f.scalars[k];
            }
            ++count;
        }
    }
    if (count == 0) throw std::invalid_argument("FeatureNormalizer::fit: no turns");
    for (std::size_t k = 0; k < kScalarFeatureCount; ++k) {
        mean_[k] = sum[k] / static_cast<double>(count);
        double var = sumsq[k] / static_cast<double>(count) - mean_[k] * mean_[k];
        std_[k] = var > 0.0 ? std::sqrt(var) : 0.0;
    }
    fitted_ = true;
}

std::array<double, kScalarFeatureCount> FeatureNormalizer::apply(
    const std::array<double, kScalarFeatureCount>& scalars) const {
    if (!fitted_) throw std::logic_error("FeatureNormalizer: not fitted");
    std::array<double, kScalarFeatureCount> out{};
    for (std::size_t k = 0; k < kScalarFeatureCount; ++k) {
        out[k] = std_[k] > 0.0 ? (scalars[k] - mean_[k]) / std_[k] : 0.0;
    }
    return out;
}

void FeatureNormalizer::set(const std::array<double, kScalarFeatureCount>& mean,
                            const std::array<double, kScalarFeatureCount>& stddev) {
    mean_ = mean;
    std_ = stddev;
    fitted_ = true;
}

FeatureMatrix assemble_feature_matrix(const Dialogue& dialogue,
                                      const EmbeddingProvider& provider,
                                      const PopularityTables& tables,
                                      const FeatureNormalizer& normalizer) {
    if (!normalizer.fitted())
        throw std::logic_error("assemble_feature_matrix: normalizer not fitted");
    const std::size_t dim = provider.dimension();
    FeatureMatrix m;
    m.n_turns = dialogue.turns.size();
    m.width = 2 * dim + kScalarFeatureCount + kMaskCount;
    m.values.assign(m.n_turns * m.width, 0.0);
    for (std::size_t n = 0; n < m.n_turns; ++n) {
        TurnFeatures f = extract_turn_features(dialogue, n, provider, tables);
        double* row = m.values.data() + n * m.width;
        std::copy(f.e_usr.begin(), f.e_usr.end(), row);
        std::copy(f.e_sys.begin(), f.e_sys.end(), row + dim);
        auto norm = normalizer.apply(f.scalars);
        std::copy(norm.begin(), norm.end(), row + 2 * dim);
        row[2 * dim + kScalarFeatureCount + 0] = f.has_prev ? 1.0 : 0.0;
        row[2 * dim + kScalarFeatureCount + 1] = f.has_next ? 1.0 : 0.0;
        row[2 * dim + kScalarFeatureCount + 2] = f.has_nlu ? 1.0 : 0.0;
    }
    return m;
}

void export_feature_matrix(const FeatureMatrix& matrix, const Dialogue& dialogue,
                           std::size_t embedding_dim, std::ostream& out) {
    out << "dialogue_id\tturn_id";
    for (std::size_t d = 0; d < embedding_dim; ++d) out << "\te_usr_" << d;
    for (std::size_t d = 0; d < embedding_dim; ++d) out << "\te_sys_" << d;
    for (const char* name : scalar_feature_names()) out << '\t' << name;
    out << "\thas_prev\thas_next\thas_nlu\n";
    out.precision(17);
    for (std::size_t n = 0; n < matrix.n_turns; ++n) {
        out << dialogue.dialogue_id << '\t' << dialogue.turns[n].turn_id;
        const double* row = matrix.row(n);
        for (std::size_t j = 0; j < matrix.width; ++j) out << '\t' << row[j];
        out << "\n";
    }
}

}  // namespace dqe
