#pragma once
// Sentence-embedding provider: a file-backed lookup table for externally
// computed vectors, and a deterministic hashed n-gram fallback. The rest of
// the pipeline only sees fixed-dimension vectors, so any encoder can sit
// behind this interface.

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace dqe {

using EmbeddingVector = std::vector<double>;

// dot(a,b) / (|a||b|); 0 when either norm is 0 (degenerate, flagged via
// *degenerate when provided). Throws on dimension mismatch.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b,
                         bool* degenerate = nullptr);

class EmbeddingProvider {
public:
    enum class Kind { table, hashed };

    // Unit-norm hashed word 1..3-gram embeddings ("" maps to the zero vector).
    static EmbeddingProvider hashed(std::size_t dimension = 512, std::uint64_t seed = 0);

    // Exact lookup table loaded from `key<TAB>v1 v2 ... vD` lines. Misses
    // throw unless a hashed fallback is enabled via with_hashed_fallback().
    static EmbeddingProvider load_table(const std::string& path);

    EmbeddingProvider with_hashed_fallback() const;

    EmbeddingVector embed(const std::string& text) const;

    Kind kind() const { return kind_; }
    std::size_t dimension() const { return dimension_; }
    std::uint64_t seed() const { return seed_; }
    const std::string& table_path() const { return table_path_; }

    // Identity string recorded in checkpoint manifests.
    std::string identity() const;

private:
    Kind kind_ = Kind::hashed;
    std::size_t dimension_ = 512;
    std::uint64_t seed_ = 0;
    bool fallback_ = false;
    std::string table_path_;
    std::shared_ptr<const std::map<std::string, EmbeddingVector>> table_;

    EmbeddingVector embed_hashed(const std::string& text) const;
};

}  // namespace dqe
