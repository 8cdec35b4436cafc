#include "steerlens/concepts.hpp"

#include "steerlens/container.hpp"
#include "steerlens/error.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <numeric>

namespace steerlens {

namespace {

double cosine(std::span<const double> a, std::span<const float> b) {
    double ab = 0.0;
    double aa = 0.0;
    double bb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double bi = b[i];
        ab += a[i] * bi;
        aa += a[i] * a[i];
        bb += bi * bi;
    }
    if (aa == 0.0 || bb == 0.0) {
        throw Error(ErrorCode::ZeroNormEmbedding, "cosine similarity with a zero-norm vector");
    }
    return ab / (std::sqrt(aa) * std::sqrt(bb));
}

void check_inputs(const SaeModel& model, const EmbeddingCorpus& reference, const Vocabulary& vocab,
                  std::size_t k) {
    if (k == 0) {
        throw Error(ErrorCode::InvalidConfig, "exemplar count k must be positive");
    }
    if (reference.empty()) {
        throw Error(ErrorCode::EmptyCorpus, "reference corpus is empty");
    }
    if (reference.dim() != model.dim_in() || vocab.dim() != model.dim_in()) {
        throw Error(ErrorCode::DimMismatch, "reference/vocabulary dimension differs from model");
    }
}

// Builds a card from the activations of one component over the reference corpus.
ConceptCard card_from_activations(const EmbeddingCorpus& reference, const Vocabulary& vocab,
                                  std::size_t component, std::span<const double> activations,
                                  std::size_t k, std::size_t label_limit) {
    ConceptCard card;
    card.component = component;

    std::vector<std::size_t> active;
    for (std::size_t n = 0; n < activations.size(); ++n) {
        if (activations[n] > 0.0) {
            active.push_back(n);
        }
    }
    if (active.empty()) {
        card.dead = true;
        return card;
    }
    const std::size_t take = std::min(k, active.size());
    auto by_activation = [&](std::size_t a, std::size_t b) {
        if (activations[a] != activations[b]) {
            return activations[a] > activations[b];
        }
        return a < b;
    };
    std::partial_sort(active.begin(), active.begin() + static_cast<std::ptrdiff_t>(take),
                      active.end(), by_activation);
    active.resize(take);

    card.mean_embedding.assign(reference.dim(), 0.0);
    for (std::size_t n : active) {
        card.exemplar_ids.push_back(reference.ids()[n]);
        card.exemplar_activations.push_back(activations[n]);
        const auto x = reference.row(n);
        for (std::size_t i = 0; i < x.size(); ++i) {
            card.mean_embedding[i] += x[i];
        }
    }
    double sq = 0.0;
    for (double& v : card.mean_embedding) {
        v /= static_cast<double>(take);
        sq += v * v;
    }
    if (sq == 0.0) {
        throw Error(ErrorCode::ZeroNormMean,
                    "mean exemplar embedding of component " + std::to_string(component) +
                        " has zero norm");
    }

    const auto empty = vocab.empty_prompt();
    for (std::size_t e = 0; e < vocab.size(); ++e) {
        if (e == vocab.empty_prompt_index()) {
            continue;
        }
        card.top_labels.push_back(
            {vocab.label(e), alignment_score(card.mean_embedding, vocab.embedding(e), empty)});
    }
    std::stable_sort(card.top_labels.begin(), card.top_labels.end(),
                     [](const LabelScore& a, const LabelScore& b) { return a.score > b.score; });
    if (label_limit > 0 && card.top_labels.size() > label_limit) {
        card.top_labels.resize(label_limit);
    }
    return card;
}

} // namespace

double alignment_score(std::span<const double> mean, std::span<const float> label,
                       std::span<const float> empty_prompt) {
    return cosine(mean, label) - cosine(mean, empty_prompt);
}

ConceptCard build_concept_card(const SaeModel& model, const EmbeddingCorpus& reference,
                               const Vocabulary& vocab, std::size_t component, std::size_t k,
                               std::size_t label_limit) {
    check_inputs(model, reference, vocab, k);
    if (component >= model.dim_sae()) {
        throw Error(ErrorCode::UnknownComponent, "component " + std::to_string(component) +
                                                     " out of range");
    }
    std::vector<double> activations(reference.count());
    for (std::size_t n = 0; n < reference.count(); ++n) {
        activations[n] = component_activation(model, reference.row(n), component);
    }
    return card_from_activations(reference, vocab, component, activations, k, label_limit);
}

std::vector<ConceptCard> build_all_cards(const SaeModel& model, const EmbeddingCorpus& reference,
                                         const Vocabulary& vocab, std::size_t k,
                                         std::size_t label_limit) {
    check_inputs(model, reference, vocab, k);
    const std::size_t n_ref = reference.count();
    // Component-major activation table.
    std::vector<double> table(model.dim_sae() * n_ref);
    for (std::size_t n = 0; n < n_ref; ++n) {
        const auto code = encode(model, reference.row(n));
        for (std::size_t j = 0; j < model.dim_sae(); ++j) {
            table[j * n_ref + n] = code.activations[j];
        }
    }
    std::vector<ConceptCard> cards;
    cards.reserve(model.dim_sae());
    for (std::size_t j = 0; j < model.dim_sae(); ++j) {
        cards.push_back(card_from_activations(
            reference, vocab, j, std::span<const double>(table).subspan(j * n_ref, n_ref), k,
            label_limit));
    }
    return cards;
}

// CRD1 cache

namespace {

nlohmann::ordered_json card_to_json(const ConceptCard& card) {
    nlohmann::ordered_json j;
    j["component"] = card.component;
    j["dead"] = card.dead;
    j["top_labels"] = nlohmann::ordered_json::array();
    for (const auto& ls : card.top_labels) {
        nlohmann::ordered_json entry;
        entry["label"] = ls.label;
        entry["score"] = ls.score;
        j["top_labels"].push_back(std::move(entry));
    }
    j["exemplar_ids"] = card.exemplar_ids;
    j["exemplar_activations"] = card.exemplar_activations;
    j["mean_embedding"] = card.mean_embedding;
    return j;
}

ConceptCard card_from_json(const nlohmann::json& j) {
    ConceptCard card;
    card.component = j.at("component").get<std::size_t>();
    card.dead = j.at("dead").get<bool>();
    for (const auto& entry : j.at("top_labels")) {
        card.top_labels.push_back(
            {entry.at("label").get<std::string>(), entry.at("score").get<double>()});
    }
    card.exemplar_ids = j.at("exemplar_ids").get<std::vector<std::string>>();
    card.exemplar_activations = j.at("exemplar_activations").get<std::vector<double>>();
    card.mean_embedding = j.at("mean_embedding").get<std::vector<double>>();
    if (card.exemplar_ids.size() != card.exemplar_activations.size()) {
        throw Error(ErrorCode::MalformedHeader, "card exemplar columns differ in length");
    }
    return card;
}

} // namespace

void write_cards(const std::vector<ConceptCard>& cards, const std::filesystem::path& path) {
    auto array = nlohmann::ordered_json::array();
    for (const auto& card : cards) {
        array.push_back(card_to_json(card));
    }
    container::write_framed(path, kCardMagic, array.dump(), {});
}

std::vector<ConceptCard> read_cards(const std::filesystem::path& path) {
    const auto framed = container::read_framed(path, kCardMagic);
    if (!framed.payload.empty()) {
        throw Error(ErrorCode::MalformedHeader, path.string() + ": trailing bytes after card array");
    }
    std::vector<ConceptCard> cards;
    try {
        const auto array = nlohmann::json::parse(framed.header);
        if (!array.is_array()) {
            throw Error(ErrorCode::MalformedHeader, path.string() + ": expected a JSON array");
        }
        for (const auto& j : array) {
            cards.push_back(card_from_json(j));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedHeader, path.string() + ": bad card JSON: " + e.what());
    }
    return cards;
}

} // namespace steerlens
