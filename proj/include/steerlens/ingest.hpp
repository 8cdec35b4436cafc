#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace steerlens {

/// ID-indexed N x D matrix of float32 embeddings with optional per-row
/// labels and asset references. Immutable once constructed; the constructor
/// enforces every invariant so a corpus object is always valid.
class EmbeddingCorpus {
public:
    EmbeddingCorpus(std::size_t dim, std::vector<std::string> ids, std::vector<float> vectors,
                    std::optional<std::vector<std::string>> labels = std::nullopt,
                    std::optional<std::vector<std::string>> asset_refs = std::nullopt);

    std::size_t dim() const noexcept { return dim_; }
    std::size_t count() const noexcept { return ids_.size(); }
    bool empty() const noexcept { return ids_.empty(); }

    std::span<const float> row(std::size_t i) const {
        return {vectors_.data() + i * dim_, dim_};
    }
    const std::vector<float>& vectors() const noexcept { return vectors_; }
    const std::vector<std::string>& ids() const noexcept { return ids_; }
    const std::optional<std::vector<std::string>>& labels() const noexcept { return labels_; }
    const std::optional<std::vector<std::string>>& asset_refs() const noexcept { return asset_refs_; }

    std::optional<std::size_t> index_of(const std::string& id) const;

    friend bool operator==(const EmbeddingCorpus& a, const EmbeddingCorpus& b) {
        return a.dim_ == b.dim_ && a.ids_ == b.ids_ && a.vectors_ == b.vectors_ &&
               a.labels_ == b.labels_ && a.asset_refs_ == b.asset_refs_;
    }

private:
    std::size_t dim_;
    std::vector<std::string> ids_;
    std::vector<float> vectors_;
    std::optional<std::vector<std::string>> labels_;
    std::optional<std::vector<std::string>> asset_refs_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Text-label embeddings used for naming components. Exactly one entry
/// carries the empty label; its embedding is the empty-prompt baseline.
class Vocabulary {
public:
    explicit Vocabulary(EmbeddingCorpus entries);

    std::size_t size() const noexcept { return entries_.count(); }
    std::size_t dim() const noexcept { return entries_.dim(); }
    const std::string& label(std::size_t i) const { return (*entries_.labels())[i]; }
    std::span<const float> embedding(std::size_t i) const { return entries_.row(i); }
    std::size_t empty_prompt_index() const noexcept { return empty_index_; }
    std::span<const float> empty_prompt() const { return entries_.row(empty_index_); }
    const EmbeddingCorpus& corpus() const noexcept { return entries_; }

private:
    EmbeddingCorpus entries_;
    std::size_t empty_index_ = 0;
};

inline constexpr std::string_view kCorpusMagic = "EMB1";

EmbeddingCorpus read_corpus(const std::filesystem::path& path);
void write_corpus(const EmbeddingCorpus& corpus, const std::filesystem::path& path);

Vocabulary read_vocabulary(const std::filesystem::path& path);
void write_vocabulary(const Vocabulary& vocab, const std::filesystem::path& path);

} // namespace steerlens
