#include "steerlens/ingest.hpp"

#include "steerlens/container.hpp"
#include "steerlens/error.hpp"

#include <cmath>
#include <json.hpp>

namespace steerlens {

namespace {

using ordered_json = nlohmann::ordered_json;

void check_optional_column(const std::optional<std::vector<std::string>>& column,
                           std::size_t count, const char* name) {
    if (column && column->size() != count) {
        throw Error(ErrorCode::DimMismatch,
                    std::string(name) + " has " + std::to_string(column->size()) +
                        " entries, expected " + std::to_string(count));
    }
}

std::optional<std::vector<std::string>> optional_strings(const nlohmann::json& manifest,
                                                         const char* key) {
    auto it = manifest.find(key);
    if (it == manifest.end() || it->is_null()) {
        return std::nullopt;
    }
    return it->get<std::vector<std::string>>();
}

} // namespace

EmbeddingCorpus::EmbeddingCorpus(std::size_t dim, std::vector<std::string> ids,
                                 std::vector<float> vectors,
                                 std::optional<std::vector<std::string>> labels,
                                 std::optional<std::vector<std::string>> asset_refs)
    : dim_(dim), ids_(std::move(ids)), vectors_(std::move(vectors)), labels_(std::move(labels)),
      asset_refs_(std::move(asset_refs)) {
    if (dim_ == 0) {
        throw Error(ErrorCode::DimMismatch, "embedding dimension must be positive");
    }
    if (vectors_.size() != ids_.size() * dim_) {
        throw Error(ErrorCode::DimMismatch,
                    "payload holds " + std::to_string(vectors_.size()) + " values, expected " +
                        std::to_string(ids_.size()) + " x " + std::to_string(dim_));
    }
    check_optional_column(labels_, ids_.size(), "labels");
    check_optional_column(asset_refs_, ids_.size(), "asset_refs");
    for (std::size_t i = 0; i < vectors_.size(); ++i) {
        if (!std::isfinite(vectors_[i])) {
            throw Error(ErrorCode::NonFiniteValue,
                        "non-finite value in row " + std::to_string(i / dim_));
        }
    }
    index_.reserve(ids_.size());
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        if (!index_.emplace(ids_[i], i).second) {
            throw Error(ErrorCode::DuplicateId, "duplicate id \"" + ids_[i] + "\"");
        }
    }
}

std::optional<std::size_t> EmbeddingCorpus::index_of(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) {
        return std::nullopt;
    }
    return it->second;
}

Vocabulary::Vocabulary(EmbeddingCorpus entries) : entries_(std::move(entries)) {
    if (!entries_.labels()) {
        throw Error(ErrorCode::MissingEmptyPrompt, "vocabulary has no labels");
    }
    const auto& labels = *entries_.labels();
    bool found = false;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (!labels[i].empty()) {
            continue;
        }
        if (found) {
            throw Error(ErrorCode::DuplicateEmptyPrompt,
                        "vocabulary has more than one empty-prompt entry");
        }
        found = true;
        empty_index_ = i;
    }
    if (!found) {
        throw Error(ErrorCode::MissingEmptyPrompt, "vocabulary lacks the empty-prompt entry");
    }
}

EmbeddingCorpus read_corpus(const std::filesystem::path& path) {
    const auto framed = container::read_framed(path, kCorpusMagic);

    nlohmann::json manifest;
    std::size_t dim = 0;
    std::size_t count = 0;
    std::vector<std::string> ids;
    std::optional<std::vector<std::string>> labels;
    std::optional<std::vector<std::string>> asset_refs;
    try {
        manifest = nlohmann::json::parse(framed.header);
        if (manifest.value("version", 0) != 1) {
            throw Error(ErrorCode::MalformedHeader, "unsupported EMB1 version");
        }
        dim = manifest.at("dim").get<std::size_t>();
        count = manifest.at("count").get<std::size_t>();
        ids = manifest.at("ids").get<std::vector<std::string>>();
        labels = optional_strings(manifest, "labels");
        asset_refs = optional_strings(manifest, "asset_refs");
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedHeader, path.string() + ": bad manifest: " + e.what());
    }
    if (ids.size() != count) {
        throw Error(ErrorCode::DimMismatch, path.string() + ": ids length differs from count");
    }
    if (framed.payload.size() != count * dim * 4) {
        throw Error(ErrorCode::DimMismatch,
                    path.string() + ": payload is " + std::to_string(framed.payload.size()) +
                        " bytes, manifest implies " + std::to_string(count * dim * 4));
    }
    auto vectors = container::decode_f32_le(framed.payload, 0, count * dim);
    return EmbeddingCorpus(dim, std::move(ids), std::move(vectors), std::move(labels),
                           std::move(asset_refs));
}

void write_corpus(const EmbeddingCorpus& corpus, const std::filesystem::path& path) {
    ordered_json manifest;
    manifest["version"] = 1;
    manifest["dim"] = corpus.dim();
    manifest["count"] = corpus.count();
    manifest["ids"] = corpus.ids();
    manifest["labels"] = corpus.labels() ? ordered_json(*corpus.labels()) : ordered_json(nullptr);
    manifest["asset_refs"] =
        corpus.asset_refs() ? ordered_json(*corpus.asset_refs()) : ordered_json(nullptr);

    std::string payload;
    container::append_f32_le(payload, corpus.vectors());
    container::write_framed(path, kCorpusMagic, manifest.dump(), payload);
}

Vocabulary read_vocabulary(const std::filesystem::path& path) {
    return Vocabulary(read_corpus(path));
}

void write_vocabulary(const Vocabulary& vocab, const std::filesystem::path& path) {
    write_corpus(vocab.corpus(), path);
}

} // namespace steerlens
