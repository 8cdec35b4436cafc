#include "steerlens/workbench.hpp"

#include "steerlens/error.hpp"

#include <fstream>
#include <json.hpp>

namespace steerlens {

namespace fs = std::filesystem;

namespace {

fs::path resolve(const fs::path& base, const std::string& value) {
    const fs::path p(value);
    return p.is_absolute() ? p : base / p;
}

void check_dim(const std::string& what, std::size_t got, std::size_t want) {
    if (got != want) {
        throw Error(ErrorCode::DimMismatch, what + " has dimension " + std::to_string(got) +
                                                ", model expects " + std::to_string(want));
    }
}

} // namespace

WorkbenchConfig WorkbenchConfig::from_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::IoFailure, "cannot open config " + path.string());
    }
    const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
    WorkbenchConfig cfg;
    try {
        const auto j = nlohmann::json::parse(in);
        cfg.sae = resolve(base, j.at("sae").get<std::string>());
        cfg.inspection = resolve(base, j.at("inspection").get<std::string>());
        cfg.reference = resolve(base, j.at("reference").get<std::string>());
        cfg.vocabulary = resolve(base, j.at("vocabulary").get<std::string>());
        for (const auto& [name, p] : j.at("class_sets").items()) {
            cfg.class_sets[name] = resolve(base, p.get<std::string>());
        }
        if (j.contains("eval_sets")) {
            for (const auto& [name, p] : j.at("eval_sets").items()) {
                cfg.eval_sets[name] = resolve(base, p.get<std::string>());
            }
        }
        cfg.assets = resolve(base, j.value("assets", std::string(".")));
        if (j.contains("cards")) {
            cfg.cards = resolve(base, j.at("cards").get<std::string>());
        }
        if (j.contains("history_dir")) {
            cfg.history_dir = resolve(base, j.at("history_dir").get<std::string>());
        }
        cfg.score.mode = parse_score_mode(j.value("score_mode", std::string("cosine")));
        cfg.score.logit_scale = j.value("logit_scale", 100.0);
        cfg.k = j.value("k", kDefaultExemplars);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
    }
    if (cfg.class_sets.empty()) {
        throw Error(ErrorCode::InvalidConfig, path.string() + ": at least one class set is required");
    }
    cfg.score.validate();
    if (cfg.k == 0) {
        throw Error(ErrorCode::InvalidConfig, path.string() + ": k must be positive");
    }
    return cfg;
}

Workbench::Workbench(WorkbenchArtifacts artifacts) : a_(std::move(artifacts)) {
    const std::size_t d = a_.model.dim_in();
    a_.score.validate();
    check_dim("inspection corpus", a_.inspection.dim(), d);
    check_dim("reference corpus", a_.reference.dim(), d);
    check_dim("vocabulary", a_.vocabulary.dim(), d);
    for (const auto& [name, cs] : a_.class_sets) {
        check_dim("class set " + name, cs.dim(), d);
    }
    for (const auto& [name, es] : a_.eval_sets) {
        check_dim("eval set " + name, es.dim(), d);
    }
    if (a_.cards.size() != a_.model.dim_sae()) {
        throw Error(ErrorCode::InvalidConfig, "card cache holds " + std::to_string(a_.cards.size()) +
                                                  " cards, model has " +
                                                  std::to_string(a_.model.dim_sae()) + " components");
    }
    for (std::size_t j = 0; j < a_.cards.size(); ++j) {
        if (a_.cards[j].component != j) {
            throw Error(ErrorCode::InvalidConfig, "card cache is not in component order");
        }
    }
}

Workbench Workbench::load(const WorkbenchConfig& config) {
    auto model = load_sae(config.sae);
    auto inspection = read_corpus(config.inspection);
    auto reference = read_corpus(config.reference);
    auto vocabulary = read_vocabulary(config.vocabulary);
    std::map<std::string, ClassSet> class_sets;
    for (const auto& [name, path] : config.class_sets) {
        class_sets.emplace(name, read_class_set(path, name));
    }
    std::map<std::string, EmbeddingCorpus> eval_sets;
    for (const auto& [name, path] : config.eval_sets) {
        eval_sets.emplace(name, read_corpus(path));
    }
    std::vector<ConceptCard> cards;
    if (config.cards && fs::exists(*config.cards)) {
        cards = read_cards(*config.cards);
    } else {
        cards = build_all_cards(model, reference, vocabulary, config.k);
        if (config.cards) {
            write_cards(cards, *config.cards);
        }
    }
    return Workbench(WorkbenchArtifacts{std::move(model), std::move(inspection),
                                        std::move(reference), std::move(vocabulary),
                                        std::move(class_sets), std::move(eval_sets),
                                        std::move(cards), config.assets, config.score, config.k});
}

const ClassSet& Workbench::class_set(const std::string& name) const {
    auto it = a_.class_sets.find(name);
    if (it == a_.class_sets.end()) {
        throw Error(ErrorCode::UnknownClassSet, "unknown class set \"" + name + "\"");
    }
    return it->second;
}

const EmbeddingCorpus& Workbench::eval_set(const std::string& name) const {
    auto it = a_.eval_sets.find(name);
    if (it == a_.eval_sets.end()) {
        throw Error(ErrorCode::UnknownEvalSet, "unknown eval set \"" + name + "\"");
    }
    return it->second;
}

fs::path Workbench::resolve_asset(const std::string& ref) const {
    const fs::path rel(ref);
    if (ref.empty() || rel.is_absolute() || rel.has_root_name() || rel.has_root_directory()) {
        throw Error(ErrorCode::PathTraversal, "asset reference must be a relative path");
    }
    for (const auto& part : rel) {
        if (part == "..") {
            throw Error(ErrorCode::PathTraversal, "asset reference escapes the asset directory");
        }
    }
    std::error_code ec;
    const fs::path root = fs::weakly_canonical(a_.assets, ec);
    const fs::path full = fs::weakly_canonical(a_.assets / rel, ec);
    if (ec) {
        throw Error(ErrorCode::NotFound, "asset not found: " + ref);
    }
    // Symlinks may still point outside the root.
    auto r = root.begin();
    auto f = full.begin();
    for (; r != root.end(); ++r, ++f) {
        if (f == full.end() || *r != *f) {
            if (r->empty()) {
                break; // trailing separator on the root
            }
            throw Error(ErrorCode::PathTraversal, "asset reference escapes the asset directory");
        }
    }
    if (!fs::is_regular_file(full)) {
        throw Error(ErrorCode::NotFound, "asset not found: " + ref);
    }
    return full;
}

std::string Workbench::reference_asset(const std::string& sample_id) const {
    if (!a_.reference.asset_refs()) {
        return {};
    }
    const auto idx = a_.reference.index_of(sample_id);
    return idx ? (*a_.reference.asset_refs())[*idx] : std::string();
}

} // namespace steerlens
