#pragma once

// Fixture builders shared by the unit, service and acceptance suites.

#include "steerlens/engine.hpp"
#include "steerlens/ingest.hpp"
#include "steerlens/sae.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace steerlens::testing {

inline std::vector<float> unit_rows(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<float> out(rows * cols);
    std::vector<double> row(cols);
    for (std::size_t r = 0; r < rows; ++r) {
        double sq = 0.0;
        for (auto& v : row) {
            v = gauss(rng);
            sq += v * v;
        }
        const double n = std::sqrt(sq);
        for (std::size_t c = 0; c < cols; ++c) {
            out[r * cols + c] = static_cast<float>(row[c] / n);
        }
    }
    return out;
}

inline std::vector<float> gaussian(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
    std::normal_distribution<double> gauss(0.0, scale);
    std::vector<float> out(n);
    for (auto& v : out) {
        v = static_cast<float>(gauss(rng));
    }
    return out;
}

/// Random SAE whose encoder is biased so that roughly half the components fire.
inline SaeModel random_model(std::mt19937_64& rng, std::size_t dim, std::size_t k,
                             bool zero_dec_bias = false) {
    auto enc_w = gaussian(rng, k * dim, 1.0 / std::sqrt(static_cast<double>(dim)));
    auto enc_b = gaussian(rng, k, 0.1);
    auto dec_w = unit_rows(rng, k, dim);
    auto dec_b = zero_dec_bias ? std::vector<float>(dim, 0.0f) : gaussian(rng, dim, 0.2);
    return SaeModel(dim, k, std::move(enc_w), std::move(enc_b), std::move(dec_w), std::move(dec_b));
}

/// Identity SAE: enc = dec = I, zero biases.
inline SaeModel identity_model(std::size_t dim) {
    std::vector<float> eye(dim * dim, 0.0f);
    for (std::size_t i = 0; i < dim; ++i) {
        eye[i * dim + i] = 1.0f;
    }
    return SaeModel(dim, dim, eye, std::vector<float>(dim, 0.0f), eye,
                    std::vector<float>(dim, 0.0f));
}

inline ClassSet random_classes(std::mt19937_64& rng, std::size_t dim, std::size_t n) {
    std::vector<std::string> labels;
    for (std::size_t c = 0; c < n; ++c) {
        labels.push_back("class" + std::to_string(c));
    }
    auto emb = gaussian(rng, n * dim);
    return ClassSet("random", labels, dim, std::vector<double>(emb.begin(), emb.end()));
}

inline std::vector<std::string> numbered_ids(std::size_t n, const std::string& prefix = "id") {
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) {
        ids.push_back(prefix + std::to_string(i));
    }
    return ids;
}

/// Scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("steerlens-" + tag + "-" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string file_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string to_hex(std::string_view bytes) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    for (unsigned char c : bytes) {
        out.push_back(digits[c >> 4]);
        out.push_back(digits[c & 0xF]);
    }
    return out;
}

} // namespace steerlens::testing
