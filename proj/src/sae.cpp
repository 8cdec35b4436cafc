#include "steerlens/sae.hpp"

#include "steerlens/container.hpp"
#include "steerlens/error.hpp"

#include <cmath>
#include <json.hpp>

namespace steerlens {

namespace {

void check_size(const std::vector<float>& v, std::size_t expected, const char* name) {
    if (v.size() != expected) {
        throw Error(ErrorCode::DimMismatch, std::string(name) + " has " +
                                                std::to_string(v.size()) + " values, expected " +
                                                std::to_string(expected));
    }
    for (float x : v) {
        if (!std::isfinite(x)) {
            throw Error(ErrorCode::NonFiniteValue, std::string(name) + " contains non-finite values");
        }
    }
}

template <typename T>
SaeCode encode_impl(const SaeModel& model, std::span<const T> x) {
    const std::size_t d = model.dim_in();
    if (x.size() != d) {
        throw Error(ErrorCode::DimMismatch, "input has dimension " + std::to_string(x.size()) +
                                                ", model expects " + std::to_string(d));
    }
    std::vector<double> centered(d);
    for (std::size_t i = 0; i < d; ++i) {
        centered[i] = static_cast<double>(x[i]) - model.dec_bias()[i];
    }
    SaeCode code;
    code.activations.resize(model.dim_sae());
    for (std::size_t j = 0; j < model.dim_sae(); ++j) {
        const auto w = model.enc_row(j);
        double pre = model.enc_bias()[j];
        for (std::size_t i = 0; i < d; ++i) {
            pre += static_cast<double>(w[i]) * centered[i];
        }
        code.activations[j] = pre > 0.0 ? pre : 0.0;
    }
    code.residual = decode(model, code.activations);
    for (std::size_t i = 0; i < d; ++i) {
        code.residual[i] = static_cast<double>(x[i]) - code.residual[i];
    }
    return code;
}

} // namespace

SaeModel::SaeModel(std::size_t dim_in, std::size_t dim_sae, std::vector<float> enc_weights,
                   std::vector<float> enc_bias, std::vector<float> dec_directions,
                   std::vector<float> dec_bias)
    : dim_in_(dim_in), dim_sae_(dim_sae), enc_weights_(std::move(enc_weights)),
      enc_bias_(std::move(enc_bias)), dec_directions_(std::move(dec_directions)),
      dec_bias_(std::move(dec_bias)) {
    if (dim_in_ == 0 || dim_sae_ == 0) {
        throw Error(ErrorCode::InvalidModel, "SAE dimensions must be positive");
    }
    check_size(enc_weights_, dim_sae_ * dim_in_, "enc_weights");
    check_size(enc_bias_, dim_sae_, "enc_bias");
    check_size(dec_directions_, dim_sae_ * dim_in_, "dec_directions");
    check_size(dec_bias_, dim_in_, "dec_bias");
    for (std::size_t j = 0; j < dim_sae_; ++j) {
        double sq = 0.0;
        for (float v : direction(j)) {
            sq += static_cast<double>(v) * v;
        }
        if (std::abs(std::sqrt(sq) - 1.0) > kUnitNormTolerance) {
            throw Error(ErrorCode::InvalidModel,
                        "decoder direction " + std::to_string(j) + " is not unit norm");
        }
    }
}

SaeCode encode(const SaeModel& model, std::span<const double> x) {
    return encode_impl(model, x);
}

SaeCode encode(const SaeModel& model, std::span<const float> x) {
    return encode_impl(model, x);
}

double component_activation(const SaeModel& model, std::span<const float> x, std::size_t j) {
    const auto w = model.enc_row(j);
    double pre = model.enc_bias()[j];
    for (std::size_t i = 0; i < model.dim_in(); ++i) {
        pre += static_cast<double>(w[i]) * (static_cast<double>(x[i]) - model.dec_bias()[i]);
    }
    return pre > 0.0 ? pre : 0.0;
}

std::vector<double> decode(const SaeModel& model, std::span<const double> activations) {
    if (activations.size() != model.dim_sae()) {
        throw Error(ErrorCode::DimMismatch,
                    "activation vector has length " + std::to_string(activations.size()) +
                        ", model has " + std::to_string(model.dim_sae()) + " components");
    }
    std::vector<double> out(model.dec_bias().begin(), model.dec_bias().end());
    for (std::size_t j = 0; j < model.dim_sae(); ++j) {
        const double a = activations[j];
        if (a == 0.0) {
            continue;
        }
        const auto v = model.direction(j);
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i] += a * static_cast<double>(v[i]);
        }
    }
    return out;
}

std::vector<std::size_t> dead_components(const SaeModel& model, const EmbeddingCorpus& corpus) {
    if (corpus.dim() != model.dim_in()) {
        throw Error(ErrorCode::DimMismatch, "corpus dimension differs from model input dimension");
    }
    std::vector<std::size_t> dead;
    for (std::size_t j = 0; j < model.dim_sae(); ++j) {
        bool alive = false;
        for (std::size_t n = 0; n < corpus.count() && !alive; ++n) {
            alive = component_activation(model, corpus.row(n), j) > 0.0;
        }
        if (!alive) {
            dead.push_back(j);
        }
    }
    return dead;
}

// SAE1 checkpoints

namespace {

struct TensorSpec {
    const char* name;
    std::size_t rows;
    std::size_t cols;
};

std::vector<TensorSpec> tensor_layout(std::size_t dim_in, std::size_t dim_sae) {
    return {{"enc_weights", dim_sae, dim_in},
            {"enc_bias", dim_sae, 1},
            {"dec_directions", dim_sae, dim_in},
            {"dec_bias", dim_in, 1}};
}

} // namespace

void save_sae(const SaeModel& model, const std::filesystem::path& path) {
    nlohmann::ordered_json meta;
    meta["version"] = 1;
    meta["dim_in"] = model.dim_in();
    meta["dim_sae"] = model.dim_sae();
    meta["tensors"] = nlohmann::ordered_json::array();
    for (const auto& t : tensor_layout(model.dim_in(), model.dim_sae())) {
        nlohmann::ordered_json entry;
        entry["name"] = t.name;
        entry["rows"] = t.rows;
        entry["cols"] = t.cols;
        meta["tensors"].push_back(std::move(entry));
    }
    std::string payload;
    container::append_f32_le(payload, model.enc_weights());
    container::append_f32_le(payload, model.enc_bias());
    container::append_f32_le(payload, model.dec_directions());
    container::append_f32_le(payload, model.dec_bias());
    container::write_framed(path, kSaeMagic, meta.dump(), payload);
}

SaeModel load_sae(const std::filesystem::path& path) {
    const auto framed = container::read_framed(path, kSaeMagic);
    std::size_t dim_in = 0;
    std::size_t dim_sae = 0;
    nlohmann::json tensors;
    try {
        const auto meta = nlohmann::json::parse(framed.header);
        if (meta.value("version", 0) != 1) {
            throw Error(ErrorCode::MalformedHeader, "unsupported SAE1 version");
        }
        dim_in = meta.at("dim_in").get<std::size_t>();
        dim_sae = meta.at("dim_sae").get<std::size_t>();
        tensors = meta.at("tensors");
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedHeader, path.string() + ": bad metadata: " + e.what());
    }

    const auto layout = tensor_layout(dim_in, dim_sae);
    if (!tensors.is_array() || tensors.size() != layout.size()) {
        throw Error(ErrorCode::MalformedHeader, path.string() + ": expected 4 tensors");
    }
    std::size_t total = 0;
    for (std::size_t i = 0; i < layout.size(); ++i) {
        const auto& t = tensors[i];
        try {
            if (t.at("name").get<std::string>() != layout[i].name) {
                throw Error(ErrorCode::MalformedHeader,
                            path.string() + ": tensor " + std::to_string(i) + " must be " +
                                layout[i].name);
            }
            if (t.at("rows").get<std::size_t>() != layout[i].rows ||
                t.at("cols").get<std::size_t>() != layout[i].cols) {
                throw Error(ErrorCode::DimMismatch,
                            path.string() + ": tensor " + layout[i].name + " has wrong shape");
            }
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::MalformedHeader, path.string() + ": bad tensor entry: " + e.what());
        }
        total += layout[i].rows * layout[i].cols;
    }
    if (framed.payload.size() != total * 4) {
        throw Error(ErrorCode::DimMismatch, path.string() + ": payload size mismatch");
    }

    std::size_t offset = 0;
    auto take = [&](const TensorSpec& t) {
        auto values = container::decode_f32_le(framed.payload, offset, t.rows * t.cols);
        offset += values.size() * 4;
        return values;
    };
    auto enc_w = take(layout[0]);
    auto enc_b = take(layout[1]);
    auto dec_w = take(layout[2]);
    auto dec_b = take(layout[3]);
    return SaeModel(dim_in, dim_sae, std::move(enc_w), std::move(enc_b), std::move(dec_w),
                    std::move(dec_b));
}

} // namespace steerlens
