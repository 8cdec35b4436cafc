#pragma once

#include "steerlens/concepts.hpp"
#include "steerlens/engine.hpp"
#include "steerlens/ingest.hpp"
#include "steerlens/sae.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>

namespace steerlens {

/// Paths and scoring settings for one served model. Relative paths in the
/// JSON file resolve against the file's directory.
struct WorkbenchConfig {
    std::filesystem::path sae;
    std::filesystem::path inspection;
    std::filesystem::path reference;
    std::filesystem::path vocabulary;
    std::map<std::string, std::filesystem::path> class_sets;
    std::map<std::string, std::filesystem::path> eval_sets;
    std::filesystem::path assets;
    std::optional<std::filesystem::path> cards;       // CRD1 cache; built when absent
    std::optional<std::filesystem::path> history_dir; // per-session JSON-lines audit logs
    ScoreOptions score;
    std::size_t k = kDefaultExemplars;

    static WorkbenchConfig from_file(const std::filesystem::path& path);
};

/// Everything a Workbench serves, already in memory.
struct WorkbenchArtifacts {
    SaeModel model;
    EmbeddingCorpus inspection;
    EmbeddingCorpus reference;
    Vocabulary vocabulary;
    std::map<std::string, ClassSet> class_sets;
    std::map<std::string, EmbeddingCorpus> eval_sets;
    std::vector<ConceptCard> cards;
    std::filesystem::path assets;
    ScoreOptions score;
    std::size_t k = kDefaultExemplars;
};

/// Immutable, shareable bundle of loaded artifacts.
class Workbench {
public:
    explicit Workbench(WorkbenchArtifacts artifacts);

    /// Loads every file named by `config`; any failure aborts startup.
    static Workbench load(const WorkbenchConfig& config);

    const SaeModel& model() const noexcept { return a_.model; }
    const EmbeddingCorpus& inspection() const noexcept { return a_.inspection; }
    const EmbeddingCorpus& reference() const noexcept { return a_.reference; }
    const Vocabulary& vocabulary() const noexcept { return a_.vocabulary; }
    const std::vector<ConceptCard>& cards() const noexcept { return a_.cards; }
    const std::map<std::string, ClassSet>& class_sets() const noexcept { return a_.class_sets; }
    const std::map<std::string, EmbeddingCorpus>& eval_sets() const noexcept { return a_.eval_sets; }
    const ScoreOptions& score() const noexcept { return a_.score; }
    std::size_t k() const noexcept { return a_.k; }

    const ClassSet& class_set(const std::string& name) const;
    const EmbeddingCorpus& eval_set(const std::string& name) const;

    /// Maps an asset reference onto a file inside the asset directory.
    /// Rejects absolute paths and anything escaping the directory.
    std::filesystem::path resolve_asset(const std::string& ref) const;

    /// Asset reference of a reference-corpus sample, or "" when none.
    std::string reference_asset(const std::string& sample_id) const;

private:
    WorkbenchArtifacts a_;
};

} // namespace steerlens
