#include "dqe/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dqe {

namespace {
constexpr const char* kMagic = "dqe-checkpoint v1";
}

void save_tensors(const NamedTensors& tensors, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << kMagic << "\n";
    char buf[40];
    for (const auto& [name, t] : tensors) {
        out << "tensor " << name << ' ' << t.rows() << ' ' << t.cols() << "\n";
        for (std::size_t i = 0; i < t.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%a", t.data()[i]);
            out << buf << ((i + 1) % t.cols() == 0 ? '\n' : ' ');
        }
    }
    if (!out) throw std::runtime_error("write failure on: " + path);
}

NamedTensors load_tensors(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    std::string line;
    if (!std::getline(in, line) || line != kMagic)
        throw std::runtime_error("bad checkpoint header in " + path);
    NamedTensors out;
    std::string word;
    while (in >> word) {
        if (word != "tensor")
            throw std::runtime_error("malformed checkpoint near '" + word + "' in " + path);
        std::string name;
        std::size_t rows, cols;
        if (!(in >> name >> rows >> cols))
            throw std::runtime_error("truncated tensor header in " + path);
        std::vector<double> data(rows * cols);
        for (std::size_t i = 0; i < data.size(); ++i) {
            std::string tok;
            if (!(in >> tok))
                throw std::runtime_error("truncated tensor '" + name + "' in " + path);
            data[i] = std::strtod(tok.c_str(), nullptr);
        }
        out.emplace_back(name, Tensor::from(rows, cols, std::move(data)));
    }
    return out;
}

}  // namespace dqe
