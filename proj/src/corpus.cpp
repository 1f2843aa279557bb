#include "dqe/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "dqe/rng.hpp"

namespace dqe {

using nlohmann::json;

std::string to_string(DialogueSystem s) { return s == DialogueSystem::A ? "A" : "B"; }

std::string to_string(UserGroup g) {
    switch (g) {
        case UserGroup::novice: return "novice";
        case UserGroup::some_experience: return "some_experience";
        case UserGroup::experienced: return "experienced";
    }
    return "?";
}

DialogueSystem dialogue_system_from_string(const std::string& s) {
    if (s == "A") return DialogueSystem::A;
    if (s == "B") return DialogueSystem::B;
    throw ParseError("unknown dialogue system: " + s);
}

UserGroup user_group_from_string(const std::string& s) {
    if (s == "novice") return UserGroup::novice;
    if (s == "some_experience") return UserGroup::some_experience;
    if (s == "experienced") return UserGroup::experienced;
    throw ParseError("unknown user group: " + s);
}

std::string to_string(Aggregation a) {
    return a == Aggregation::uniform_mean ? "uniform_mean" : "failure_weighted";
}

Aggregation aggregation_from_string(const std::string& s) {
    if (s == "uniform_mean") return Aggregation::uniform_mean;
    if (s == "failure_weighted") return Aggregation::failure_weighted;
    throw ParseError("unknown aggregation: " + s);
}

std::size_t Corpus::total_turns() const {
    std::size_t n = 0;
    for (const auto& d : dialogues) n += d.turns.size();
    return n;
}

namespace {

void fail_validation(const std::string& dialogue_id, const std::string& field,
                     const std::string& what) {
    throw ValidationError("dialogue '" + dialogue_id + "': field '" + field + "' " + what);
}

void validate_dialogue(const Dialogue& d) {
    if (d.turns.empty()) fail_validation(d.dialogue_id, "turns", "must contain at least 1 turn");
    if (d.dialogue_rating && (*d.dialogue_rating < 1.0 || *d.dialogue_rating > 5.0))
        fail_validation(d.dialogue_id, "dialogue_rating", "out of range [1,5]");
    std::vector<std::string> ids;
    double prev_ts = -1.0;
    for (const auto& t : d.turns) {
        ids.push_back(t.turn_id);
        if (t.asr_confidence < 0.0 || t.asr_confidence > 1.0)
            fail_validation(d.dialogue_id, "asr_confidence", "out of range [0,1]");
        if (t.nlu_confidence && (*t.nlu_confidence < 0.0 || *t.nlu_confidence > 1.0))
            fail_validation(d.dialogue_id, "nlu_confidence", "out of range [0,1]");
        if (t.rq_rating && (*t.rq_rating < 1.0 || *t.rq_rating > 5.0))
            fail_validation(d.dialogue_id, "rq_rating", "out of range [1,5]");
        if (t.user_timestamp < prev_ts)
            fail_validation(d.dialogue_id, "user_timestamp", "decreases within dialogue");
        prev_ts = t.user_timestamp;
    }
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
        fail_validation(d.dialogue_id, "turn_id", "duplicated within dialogue");
}

json slot_to_json(const Slot& s) {
    return json{{"slot_type", s.slot_type}, {"slot_value", s.slot_value}};
}

json turn_to_json(const Turn& t) {
    json j;
    j["turn_id"] = t.turn_id;
    j["user_text"] = t.user_text;
    j["system_text"] = t.system_text;
    j["asr_confidence"] = t.asr_confidence;
    if (t.nlu_confidence) j["nlu_confidence"] = *t.nlu_confidence;
    if (t.nlu_intent) j["nlu_intent"] = *t.nlu_intent;
    if (t.nlu_domain) j["nlu_domain"] = *t.nlu_domain;
    j["barge_in"] = t.barge_in;
    j["user_timestamp"] = t.user_timestamp;
    if (!t.slots.empty()) {
        json arr = json::array();
        for (const auto& s : t.slots) arr.push_back(slot_to_json(s));
        j["slots"] = arr;
    }
    if (t.rq_rating) j["rq_rating"] = *t.rq_rating;
    return j;
}

json dialogue_to_json(const Dialogue& d) {
    json j;
    j["dialogue_id"] = d.dialogue_id;
    j["system"] = to_string(d.system);
    j["user_group"] = to_string(d.user_group);
    json turns = json::array();
    for (const auto& t : d.turns) turns.push_back(turn_to_json(t));
    j["turns"] = std::move(turns);
    if (d.dialogue_rating) j["dialogue_rating"] = *d.dialogue_rating;
    return j;
}

Turn turn_from_json(const json& j) {
    Turn t;
    t.turn_id = j.at("turn_id").get<std::string>();
    t.user_text = j.at("user_text").get<std::string>();
    t.system_text = j.at("system_text").get<std::string>();
    t.asr_confidence = j.at("asr_confidence").get<double>();
    if (j.contains("nlu_confidence")) t.nlu_confidence = j["nlu_confidence"].get<double>();
    if (j.contains("nlu_intent")) t.nlu_intent = j["nlu_intent"].get<std::string>();
    if (j.contains("nlu_domain")) t.nlu_domain = j["nlu_domain"].get<std::string>();
    t.barge_in = j.at("barge_in").get<bool>();
    t.user_timestamp = j.at("user_timestamp").get<double>();
    if (j.contains("slots")) {
        for (const auto& s : j["slots"]) {
            t.slots.push_back({s.at("slot_type").get<std::string>(),
                               s.at("slot_value").get<std::string>()});
        }
    }
    if (j.contains("rq_rating")) t.rq_rating = j["rq_rating"].get<double>();
    return t;
}

Dialogue dialogue_from_json(const json& j) {
    Dialogue d;
    d.dialogue_id = j.at("dialogue_id").get<std::string>();
    d.system = dialogue_system_from_string(j.at("system").get<std::string>());
    d.user_group = user_group_from_string(j.at("user_group").get<std::string>());
    for (const auto& tj : j.at("turns")) d.turns.push_back(turn_from_json(tj));
    if (j.contains("dialogue_rating")) d.dialogue_rating = j["dialogue_rating"].get<double>();
    return d;
}

}  // namespace

void validate_corpus(const Corpus& corpus) {
    std::vector<std::string> ids;
    ids.reserve(corpus.dialogues.size());
    for (const auto& d : corpus.dialogues) {
        validate_dialogue(d);
        ids.push_back(d.dialogue_id);
    }
    std::sort(ids.begin(), ids.end());
    auto dup = std::adjacent_find(ids.begin(), ids.end());
    if (dup != ids.end())
        throw ValidationError("duplicate dialogue_id '" + *dup + "' in corpus");
}

Corpus load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open corpus file: " + path);
    Corpus corpus;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError("parse error at line " + std::to_string(line_no) + " of " + path +
                             ": " + e.what());
        }
        try {
            if (j.contains("metadata") && !j.contains("dialogue_id")) {
                for (auto it = j["metadata"].begin(); it != j["metadata"].end(); ++it)
                    corpus.metadata[it.key()] = it.value().get<std::string>();
                continue;
            }
            corpus.dialogues.push_back(dialogue_from_json(j));
        } catch (const json::exception& e) {
            throw ParseError("parse error at line " + std::to_string(line_no) + " of " + path +
                             ": " + e.what());
        }
    }
    validate_corpus(corpus);
    return corpus;
}

void save_corpus(const Corpus& corpus, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    if (!corpus.metadata.empty()) {
        json meta;
        for (const auto& [k, v] : corpus.metadata) meta[k] = v;
        out << json{{"metadata", meta}}.dump() << "\n";
    }
    for (const auto& d : corpus.dialogues) out << dialogue_to_json(d).dump() << "\n";
    if (!out) throw std::runtime_error("write failure on: " + path);
}

std::tuple<Corpus, Corpus, Corpus> split_corpus(const Corpus& corpus, double train_ratio,
                                                double val_ratio, double test_ratio,
                                                std::uint64_t seed) {
    if (train_ratio < 0 || val_ratio < 0 || test_ratio < 0)
        throw std::invalid_argument("split_corpus: ratios must be nonnegative");
    if (std::abs(train_ratio + val_ratio + test_ratio - 1.0) > 1e-9)
        throw std::invalid_argument("split_corpus: ratios must sum to 1");
    const std::size_t n = corpus.dialogues.size();
    std::size_t nonzero = (train_ratio > 0) + (val_ratio > 0) + (test_ratio > 0);
    if (n < nonzero)
        throw std::invalid_argument("split_corpus: fewer dialogues than nonzero split buckets");

    std::size_t n_train = static_cast<std::size_t>(train_ratio * static_cast<double>(n));
    std::size_t n_val = static_cast<std::size_t>(val_ratio * static_cast<double>(n));
    std::size_t n_test = static_cast<std::size_t>(test_ratio * static_cast<double>(n));
    n_train += n - n_train - n_val - n_test;  // remainder to train

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(seed, 0x5197ULL));
    rng.shuffle(order);

    std::vector<int> bucket(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (i < n_train) bucket[order[i]] = 0;
        else if (i < n_train + n_val) bucket[order[i]] = 1;
        else bucket[order[i]] = 2;
    }
    Corpus train, val, test;
    train.metadata = corpus.metadata;
    val.metadata = corpus.metadata;
    test.metadata = corpus.metadata;
    for (std::size_t i = 0; i < n; ++i) {
        switch (bucket[i]) {
            case 0: train.dialogues.push_back(corpus.dialogues[i]); break;
            case 1: val.dialogues.push_back(corpus.dialogues[i]); break;
            default: test.dialogues.push_back(corpus.dialogues[i]); break;
        }
    }
    return {std::move(train), std::move(val), std::move(test)};
}

double aggregate_latent(const std::vector<double>& turn_quality, Aggregation aggregation,
                        double failure_weight) {
    if (turn_quality.empty()) throw std::invalid_argument("aggregate_latent: no turns");
    double wsum = 0.0, acc = 0.0;
    for (double q : turn_quality) {
        double w = 1.0;
        if (aggregation == Aggregation::failure_weighted && q < 3.0) w = failure_weight;
        wsum += w;
        acc += w * q;
    }
    return acc / wsum;
}

// ---------------------------------------------------------------------------
// Synthetic generator
// ---------------------------------------------------------------------------

namespace {

struct DomainSpec {
    const char* name;
    const char* intent_verb;                    // verb class for the NLU intent
    std::vector<const char*> verbs;             // user-utterance verbs
    std::vector<const char*> nouns;             // user-utterance objects
    std::vector<const char*> slot_types;        // plausible slot types
};

const std::vector<DomainSpec>& domain_specs() {
    static const std::vector<DomainSpec> specs = {
        {"Music", "play",
         {"play", "start", "resume"},
         {"song", "playlist", "album", "station", "track"},
         {"artist", "song", "device"}},
        {"Weather", "query",
         {"what", "tell", "check"},
         {"weather", "forecast", "temperature", "rain"},
         {"location", "date"}},
        {"MovieBooking", "book",
         {"book", "get", "find"},
         {"tickets", "showtimes", "movie", "seats"},
         {"theater", "numeric", "date"}},
        {"Restaurant", "book",
         {"book", "reserve", "find"},
         {"table", "restaurant", "reservation", "dinner"},
         {"cuisine", "location", "numeric"}},
        {"Shopping", "order",
         {"order", "buy", "add"},
         {"batteries", "detergent", "cart", "list"},
         {"numeric", "device"}},
        {"Knowledge", "query",
         {"who", "what", "tell"},
         {"capital", "height", "population", "age"},
         {"artist", "location"}},
        {"Calendar", "schedule",
         {"schedule", "cancel", "move"},
         {"meeting", "appointment", "reminder", "alarm"},
         {"date", "numeric"}},
        {"CabBooking", "book",
         {"book", "call", "order"},
         {"cab", "ride", "taxi"},
         {"location", "numeric", "date"}},
    };
    return specs;
}

const std::map<std::string, std::vector<const char*>>& slot_value_pools() {
    static const std::map<std::string, std::vector<const char*>> pools = {
        {"artist", {"aurora", "mozart", "willie", "brel", "santana", "adele", "coltrane", "bjork"}},
        {"song", {"daydream", "hustle", "moonlight", "anthem", "horizon", "ember", "tides"}},
        {"theater", {"amc", "regal", "cinemark", "odeon", "grand", "rialto"}},
        {"numeric", {"one", "two", "three", "four", "five", "seven", "ten"}},
        {"date", {"today", "tomorrow", "friday", "monday", "saturday", "sunday"}},
        {"location", {"berlin", "seattle", "downtown", "airport", "madrid", "harbor", "uptown"}},
        {"cuisine", {"thai", "italian", "korean", "mexican", "sushi", "tapas"}},
        {"device", {"kitchen", "bedroom", "speaker", "everywhere", "office"}},
    };
    return pools;
}

const std::vector<const char*>& failure_responses() {
    static const std::vector<const char*> v = {
        "sorry i could not understand that",
        "i do not know how to help with that",
        "something went wrong please try again",
        "sorry this is not supported right now",
        "i did not catch that",
    };
    return v;
}

const std::vector<const char*>& partial_responses() {
    static const std::vector<const char*> v = {
        "which one would you like",
        "can you tell me more about that",
        "i found a few options for you",
        "did you mean something else",
    };
    return v;
}

double clamp(double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); }

const DomainSpec& spec_for(const std::string& name) {
    for (const auto& s : domain_specs())
        if (name == s.name) return s;
    // Unknown domain names reuse a generic spec with the requested name kept
    // on the dialogue metadata side via nlu_domain.
    static const DomainSpec generic = {
        "Generic", "query",
        {"do", "get", "find"},
        {"thing", "item", "task", "request"},
        {"numeric", "date"}};
    return generic;
}

std::string join(const std::vector<std::string>& words) {
    std::string out;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i) out += ' ';
        out += words[i];
    }
    return out;
}

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& pool) {
    return pool[rng.index(pool.size())];
}

// Biased index so low-index values dominate; keeps rare slot values rare,
// which makes slot-value coverage grow slowly with corpus size.
std::size_t zipfish_index(Rng& rng, std::size_t n) {
    double u = rng.uniform();
    return static_cast<std::size_t>(static_cast<double>(n) * u * u * 0.999);
}

}  // namespace

std::vector<std::string> default_domains() {
    std::vector<std::string> names;
    for (const auto& s : domain_specs()) names.push_back(s.name);
    return names;
}

std::vector<double> latent_turn_quality(const Corpus& corpus, const std::string& dialogue_id) {
    auto it = corpus.metadata.find("latent.turn_quality." + dialogue_id);
    if (it == corpus.metadata.end())
        throw std::invalid_argument("no latent turn quality stored for " + dialogue_id);
    std::vector<double> q;
    std::istringstream ss(it->second);
    double v;
    while (ss >> v) q.push_back(v);
    return q;
}

double latent_dialogue_rating(const Corpus& corpus, const std::string& dialogue_id) {
    auto it = corpus.metadata.find("latent.dialogue_rating." + dialogue_id);
    if (it == corpus.metadata.end())
        throw std::invalid_argument("no latent dialogue rating stored for " + dialogue_id);
    return std::stod(it->second);
}

Corpus generate_synthetic(const SyntheticConfig& config) {
    if (config.n_dialogues < 1)
        throw std::invalid_argument("generate_synthetic: n_dialogues must be >= 1");
    if (config.avg_turns < 1.0)
        throw std::invalid_argument("generate_synthetic: avg_turns must be >= 1");
    if (config.sigma_turn < 0.0 || config.sigma_dialogue < 0.0)
        throw std::invalid_argument("generate_synthetic: sigmas must be >= 0");

    const std::vector<std::string> domains =
        config.domains.empty() ? default_domains() : config.domains;

    Corpus corpus;
    corpus.metadata["generator.aggregation"] = to_string(config.aggregation);

    char idbuf[32];
    for (int di = 0; di < config.n_dialogues; ++di) {
        Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(di)));
        std::snprintf(idbuf, sizeof(idbuf), "d%06d", di);

        Dialogue dlg;
        dlg.dialogue_id = idbuf;
        dlg.system = rng.uniform() < 0.2 ? DialogueSystem::B : DialogueSystem::A;
        double ug = rng.uniform();
        dlg.user_group = ug < 0.15 ? UserGroup::novice
                        : ug < 0.48 ? UserGroup::some_experience
                                    : UserGroup::experienced;

        const int n_turns = 1 + rng.poisson(config.avg_turns - 1.0);

        // Latent quality: uniform draws smoothed 50/50 with the predecessor
        // so consecutive turns are correlated.
        std::vector<double> quality(n_turns);
        for (int n = 0; n < n_turns; ++n) {
            double u = rng.uniform(1.0, 5.0);
            quality[n] = n == 0 ? u : 0.5 * u + 0.5 * quality[n - 1];
        }

        const bool has_nlu = dlg.system == DialogueSystem::A;
        double timestamp = 0.0;
        std::vector<std::string> prev_content;  // content words of previous user turn
        std::string prev_system_text;
        std::string prev_intent;
        bool retry_pending = false;

        for (int n = 0; n < n_turns; ++n) {
            const double q = quality[n];
            Turn turn;
            turn.turn_id = dlg.dialogue_id + "-t" + std::to_string(n);

            const std::string& domain_name = pick(rng, domains);
            const DomainSpec& dom = spec_for(domain_name);

            // User utterance: verb + object + slot values. A retry after a
            // failed turn re-uses the previous content words (paraphrase).
            std::vector<std::string> content;
            std::vector<Slot> slots;
            std::string intent;
            if (retry_pending && !prev_content.empty()) {
                content = prev_content;
                intent = prev_intent;
                slots = dlg.turns.back().slots;
            } else {
                content.push_back(pick(rng, dom.verbs));
                content.push_back(pick(rng, dom.nouns));
                intent = domain_name + "." + dom.intent_verb;
                const int n_slots = 1 + (rng.uniform() < 0.35 ? 1 : 0);
                for (int s = 0; s < n_slots; ++s) {
                    // Low-quality turns skew toward the hard slot types.
                    std::string stype;
                    if (q < 3.0 && rng.uniform() < 0.55) {
                        stype = rng.uniform() < 0.5 ? "theater" : "numeric";
                    } else {
                        stype = dom.slot_types[rng.index(dom.slot_types.size())];
                    }
                    const auto& pool = slot_value_pools().at(stype);
                    std::string sval = pool[zipfish_index(rng, pool.size())];
                    slots.push_back({stype, sval});
                    content.push_back(sval);
                }
            }
            std::vector<std::string> uwords = {"please"};
            if (rng.uniform() < 0.5) uwords.clear();
            uwords.insert(uwords.end(), content.begin(), content.end());
            turn.user_text = join(uwords);

            // System response quality tracks the latent turn quality: echo
            // the request on success, partial prompt midway, canned error on
            // failure, and repeat the previous failed response sometimes.
            if (q >= 3.5) {
                std::vector<std::string> swords = {"sure"};
                swords.insert(swords.end(), content.begin(), content.end());
                swords.push_back("done");
                turn.system_text = join(swords);
            } else if (q >= 2.5) {
                std::string partial = pick(rng, partial_responses());
                if (!content.empty() && rng.uniform() < 0.5)
                    partial += " " + content.back();
                turn.system_text = partial;
            } else {
                if (!prev_system_text.empty() && quality[std::max(0, n - 1)] < 2.5 &&
                    rng.uniform() < 0.5) {
                    turn.system_text = prev_system_text;  // verbatim repeat
                } else {
                    turn.system_text = pick(rng, failure_responses());
                }
            }

            turn.asr_confidence = clamp(0.62 + 0.10 * (q - 3.0) + rng.normal(0.0, 0.04), 0.0, 1.0);
            if (has_nlu) {
                turn.nlu_confidence = clamp(0.60 + 0.09 * (q - 3.0) + rng.normal(0.0, 0.05), 0.0, 1.0);
                turn.nlu_intent = intent;
                turn.nlu_domain = domain_name;
            }
            turn.barge_in = rng.bernoulli(0.04 + 0.20 * (5.0 - q) / 4.0);
            turn.user_timestamp = timestamp;
            timestamp += 3.0 + 1.2 * (5.0 - q) + std::abs(rng.normal(0.0, 0.6));
            turn.slots = std::move(slots);
            if (config.sigma_turn == 0.0) {
                turn.rq_rating = q;
            } else {
                turn.rq_rating = clamp(q + rng.normal(0.0, config.sigma_turn), 1.0, 5.0);
            }

            retry_pending = q < 3.0 && rng.uniform() < 0.6;
            prev_content = std::move(content);
            prev_system_text = turn.system_text;
            prev_intent = intent;
            dlg.turns.push_back(std::move(turn));
        }

        const double latent = aggregate_latent(quality, config.aggregation, config.failure_weight);
        if (config.sigma_dialogue == 0.0) {
            dlg.dialogue_rating = latent;
        } else {
            dlg.dialogue_rating = clamp(latent + rng.normal(0.0, config.sigma_dialogue), 1.0, 5.0);
        }

        std::ostringstream qss;
        qss.precision(17);
        for (int n = 0; n < n_turns; ++n) {
            if (n) qss << ' ';
            qss << quality[n];
        }
        corpus.metadata["latent.turn_quality." + dlg.dialogue_id] = qss.str();
        std::ostringstream dss;
        dss.precision(17);
        dss << latent;
        corpus.metadata["latent.dialogue_rating." + dlg.dialogue_id] = dss.str();

        corpus.dialogues.push_back(std::move(dlg));
    }
    return corpus;
}

}  // namespace dqe
