#pragma once
// Dialogue corpus data model, line-delimited JSON serialization, splitting,
// and a synthetic corpus generator with planted ground truth.

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace dqe {

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Slot {
    std::string slot_type;
    std::string slot_value;

    bool operator==(const Slot&) const = default;
};

struct Turn {
    std::string turn_id;
    std::string user_text;
    std::string system_text;
    double asr_confidence = 0.0;
    std::optional<double> nlu_confidence;
    std::optional<std::string> nlu_intent;
    std::optional<std::string> nlu_domain;
    bool barge_in = false;
    double user_timestamp = 0.0;  // seconds since dialogue start
    std::vector<Slot> slots;
    std::optional<double> rq_rating;  // expert turn label, 1..5

    bool operator==(const Turn&) const = default;
};

enum class DialogueSystem { A, B };
enum class UserGroup { novice, some_experience, experienced };

std::string to_string(DialogueSystem s);
std::string to_string(UserGroup g);
DialogueSystem dialogue_system_from_string(const std::string& s);
UserGroup user_group_from_string(const std::string& s);

struct Dialogue {
    std::string dialogue_id;
    DialogueSystem system = DialogueSystem::A;
    UserGroup user_group = UserGroup::experienced;
    std::vector<Turn> turns;
    std::optional<double> dialogue_rating;  // end-user label, 1..5

    bool operator==(const Dialogue&) const = default;
};

struct Corpus {
    std::vector<Dialogue> dialogues;
    std::map<std::string, std::string> metadata;

    std::size_t total_turns() const;

    bool operator==(const Corpus&) const = default;
};

// Throws ValidationError naming the dialogue_id and offending field.
void validate_corpus(const Corpus& corpus);

// File format: one JSON object per line; an optional leading
// {"metadata": {...}} record carries corpus metadata. See
// docs/corpus_format.md.
Corpus load_corpus(const std::string& path);
void save_corpus(const Corpus& corpus, const std::string& path);

// Dialogue-granularity split. Sizes are floor allocations of
// (train, val, test) ratios with the remainder going to train;
// deterministic in seed. Relative corpus order is preserved inside
// each split. Metadata is copied to all three splits.
std::tuple<Corpus, Corpus, Corpus> split_corpus(const Corpus& corpus,
                                                double train_ratio, double val_ratio,
                                                double test_ratio, std::uint64_t seed);

enum class Aggregation { uniform_mean, failure_weighted };

std::string to_string(Aggregation a);
Aggregation aggregation_from_string(const std::string& s);

struct SyntheticConfig {
    int n_dialogues = 100;
    std::vector<std::string> domains;  // empty -> default domain set
    double avg_turns = 5.0;
    double sigma_turn = 0.3;      // std of noise added to latent turn quality
    double sigma_dialogue = 0.6;  // std of noise added to latent dialogue rating
    Aggregation aggregation = Aggregation::uniform_mean;
    std::uint64_t seed = 1;
    // failure_weighted mode: turns with latent quality < 3 get this weight,
    // the rest get 1, weights normalized.
    double failure_weight = 3.0;
};

std::vector<std::string> default_domains();

// Latent per-turn qualities and the latent dialogue rating are stored in
// corpus metadata under "latent.turn_quality.<dialogue_id>" (space-separated)
// and "latent.dialogue_rating.<dialogue_id>" so tests can check recovery
// without the model ever seeing them as features.
Corpus generate_synthetic(const SyntheticConfig& config);

// The aggregation rule used by the generator, exposed for tests.
double aggregate_latent(const std::vector<double>& turn_quality, Aggregation aggregation,
                        double failure_weight);

// Parses the planted latents back out of metadata.
std::vector<double> latent_turn_quality(const Corpus& corpus, const std::string& dialogue_id);
double latent_dialogue_rating(const Corpus& corpus, const std::string& dialogue_id);

}  // namespace dqe
