#include "dqe/embedding.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dqe/corpus.hpp"  // ParseError
#include "dqe/features.hpp"
#include "dqe/kernels.hpp"

namespace dqe {

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b, bool* degenerate) {
    if (a.size() != b.size())
        throw std::invalid_argument("cosine_similarity: dimension mismatch");
    if (degenerate) *degenerate = false;
    const auto& ops = kernels::active();
    double na = ops.dot(a.data(), a.data(), a.size());
    double nb = ops.dot(b.data(), b.data(), b.size());
    if (na == 0.0 || nb == 0.0) {
        if (degenerate) *degenerate = true;
        return 0.0;
    }
    return ops.dot(a.data(), b.data(), a.size()) / (std::sqrt(na) * std::sqrt(nb));
}

namespace {

// FNV-1a, seed-mixed, over an n-gram of tokens.
std::uint64_t ngram_hash(const std::vector<std::string>& tokens, std::size_t start,
                         std::size_t len, std::uint64_t seed) {
    std::uint64_t h = 1469598103934665603ULL ^ (seed * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL);
    for (std::size_t i = 0; i < len; ++i) {
        for (char c : tokens[start + i]) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ULL;
        }
        h ^= 0x1f;  // token boundary
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace

EmbeddingProvider EmbeddingProvider::hashed(std::size_t dimension, std::uint64_t seed) {
    if (dimension < 1) throw std::invalid_argument("embedding dimension must be >= 1");
    EmbeddingProvider p;
    p.kind_ = Kind::hashed;
    p.dimension_ = dimension;
    p.seed_ = seed;
    return p;
}

EmbeddingProvider EmbeddingProvider::load_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open embedding table: " + path);
    auto table = std::make_shared<std::map<std::string, EmbeddingVector>>();
    std::size_t dim = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw ParseError("embedding table line " + std::to_string(line_no) +
                             ": missing tab separator");
        std::string key = line.substr(0, tab);
        EmbeddingVector vec;
        std::istringstream ss(line.substr(tab + 1));
        double v;
        while (ss >> v) vec.push_back(v);
        if (vec.empty())
            throw ParseError("embedding table line " + std::to_string(line_no) +
                             ": no values for key '" + key + "'");
        if (dim == 0) {
            dim = vec.size();
        } else if (vec.size() != dim) {
            throw ParseError("embedding table: key '" + key + "' has dimension " +
                             std::to_string(vec.size()) + ", expected " + std::to_string(dim));
        }
        if (!table->emplace(std::move(key), std::move(vec)).second)
            throw ParseError("embedding table: duplicate key '" + line.substr(0, tab) + "'");
    }
    EmbeddingProvider p;
    p.kind_ = Kind::table;
    p.dimension_ = dim == 0 ? 512 : dim;
    p.table_path_ = path;
    p.table_ = std::move(table);
    return p;
}

EmbeddingProvider EmbeddingProvider::with_hashed_fallback() const {
    EmbeddingProvider p = *this;
    p.fallback_ = true;
    return p;
}

EmbeddingVector EmbeddingProvider::embed_hashed(const std::string& text) const {
    EmbeddingVector vec(dimension_, 0.0);
    std::vector<std::string> tokens = tokenize(text);
    if (tokens.empty()) return vec;  // zero vector for empty text
    for (std::size_t len = 1; len <= 3; ++len) {
        if (tokens.size() < len) break;
        for (std::size_t start = 0; start + len <= tokens.size(); ++start) {
            std::uint64_t h = ngram_hash(tokens, start, len, seed_);
            double sign = (h >> 63) ? 1.0 : -1.0;
            vec[h % dimension_] += sign;
        }
    }
    double norm2 = kernels::active().dot(vec.data(), vec.data(), vec.size());
    if (norm2 > 0.0) {
        kernels::active().scale(1.0 / std::sqrt(norm2), vec.data(), vec.size());
    }
    return vec;
}

EmbeddingVector EmbeddingProvider::embed(const std::string& text) const {
    if (kind_ == Kind::hashed) return embed_hashed(text);
    auto it = table_->find(text);
    if (it != table_->end()) return it->second;
    if (fallback_) return embed_hashed(text);
    throw std::out_of_range("embedding table miss for text: '" + text + "'");
}

std::string EmbeddingProvider::identity() const {
    if (kind_ == Kind::hashed)
        return "hashed:d=" + std::to_string(dimension_) + ":seed=" + std::to_string(seed_);
    return "table:d=" + std::to_string(dimension_) + ":path=" + table_path_ +
           (fallback_ ? ":fallback=hashed" : "");
}

}  // namespace dqe
