#include "steerlens/engine.hpp"

#include "steerlens/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

namespace steerlens {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

double norm(std::span<const double> a) {
    return std::sqrt(dot(a, a));
}

double similarity(std::span<const double> x, std::span<const double> t, ScoreMode mode) {
    if (mode == ScoreMode::Dot) {
        return dot(x, t);
    }
    const double nx = norm(x);
    const double nt = norm(t);
    if (nx == 0.0 || nt == 0.0) {
        throw Error(ErrorCode::ZeroNormEmbedding,
                    nx == 0.0 ? "steered embedding has zero norm in cosine mode"
                              : "class embedding has zero norm in cosine mode");
    }
    return dot(x, t) / (nx * nt);
}

void softmax(std::span<const double> logits, std::vector<double>& out) {
    const double top = *std::max_element(logits.begin(), logits.end());
    out.resize(logits.size());
    double total = 0.0;
    for (std::size_t c = 0; c < logits.size(); ++c) {
        out[c] = std::exp(logits[c] - top);
        total += out[c];
    }
    for (double& p : out) {
        p /= total;
    }
}

void check_input(const SaeModel& model, std::span<const float> x, const ClassSet& classes) {
    if (x.size() != model.dim_in()) {
        throw Error(ErrorCode::DimMismatch, "input embedding has dimension " +
                                                std::to_string(x.size()) + ", model expects " +
                                                std::to_string(model.dim_in()));
    }
    if (classes.dim() != model.dim_in()) {
        throw Error(ErrorCode::DimMismatch, "class set \"" + classes.name() +
                                                "\" dimension differs from model input");
    }
}

} // namespace

std::string_view to_string(ScoreMode mode) {
    return mode == ScoreMode::Cosine ? "cosine" : "dot";
}

ScoreMode parse_score_mode(std::string_view text) {
    if (text == "cosine") {
        return ScoreMode::Cosine;
    }
    if (text == "dot") {
        return ScoreMode::Dot;
    }
    throw Error(ErrorCode::InvalidConfig, "unknown score mode \"" + std::string(text) + "\"");
}

void ScoreOptions::validate() const {
    if (!(logit_scale > 0.0) || !std::isfinite(logit_scale)) {
        throw Error(ErrorCode::InvalidConfig, "logit scale must be a positive finite number");
    }
}

// ClassSet

ClassSet::ClassSet(std::string name, std::vector<std::string> labels, std::size_t dim,
                   std::vector<double> embeddings)
    : name_(std::move(name)), labels_(std::move(labels)), dim_(dim),
      embeddings_(std::move(embeddings)) {
    if (labels_.size() < 2) {
        throw Error(ErrorCode::InvalidClassSet, "class set \"" + name_ + "\" needs at least 2 classes");
    }
    if (dim_ == 0 || embeddings_.size() != labels_.size() * dim_) {
        throw Error(ErrorCode::DimMismatch, "class set \"" + name_ + "\" embedding shape mismatch");
    }
    std::unordered_set<std::string> seen;
    for (const auto& label : labels_) {
        if (!seen.insert(label).second) {
            throw Error(ErrorCode::InvalidClassSet,
                        "class set \"" + name_ + "\" repeats label \"" + label + "\"");
        }
    }
    for (double v : embeddings_) {
        if (!std::isfinite(v)) {
            throw Error(ErrorCode::NonFiniteValue, "class set \"" + name_ + "\" has non-finite values");
        }
    }
}

std::optional<std::size_t> ClassSet::index_of(std::string_view label) const {
    for (std::size_t c = 0; c < labels_.size(); ++c) {
        if (labels_[c] == label) {
            return c;
        }
    }
    return std::nullopt;
}

ClassSet class_set_from_corpus(std::string name, const EmbeddingCorpus& corpus) {
    if (!corpus.labels()) {
        throw Error(ErrorCode::InvalidClassSet, "class set \"" + name + "\" has no labels");
    }
    return ClassSet(std::move(name), *corpus.labels(), corpus.dim(),
                    std::vector<double>(corpus.vectors().begin(), corpus.vectors().end()));
}

ClassSet read_class_set(const std::filesystem::path& path, std::string name) {
    return class_set_from_corpus(std::move(name), read_corpus(path));
}

// SteeringConfig

SteeringConfig SteeringConfig::from_list(std::span<const std::pair<std::size_t, double>> entries) {
    SteeringConfig cfg;
    for (const auto& [component, m] : entries) {
        if (cfg.mods_.count(component)) {
            throw Error(ErrorCode::InvalidSteering,
                        "component " + std::to_string(component) + " appears more than once");
        }
        cfg.set(component, m);
    }
    return cfg;
}

void SteeringConfig::set(std::size_t component, double m) {
    if (!(m >= -1.0 && m <= 1.0)) {
        throw Error(ErrorCode::InvalidSteering, "steering value for component " +
                                                    std::to_string(component) +
                                                    " must lie in [-1, 1]");
    }
    mods_[component] = m;
}

void SteeringConfig::check_components(std::size_t dim_sae) const {
    if (!mods_.empty() && mods_.rbegin()->first >= dim_sae) {
        throw Error(ErrorCode::InvalidSteering,
                    "component " + std::to_string(mods_.rbegin()->first) +
                        " out of range (model has " + std::to_string(dim_sae) + ")");
    }
}

// Inference

SteeredState apply_steering(const SaeModel& model, std::span<const float> x,
                            const SteeringConfig& steering) {
    steering.check_components(model.dim_sae());
    SteeredState state;
    state.code = encode(model, x);
    state.activations = state.code.activations;
    bool modified = false;
    for (const auto& [j, m] : steering.modifications()) {
        state.activations[j] = state.code.activations[j] * (1.0 + m);
        modified = modified || state.activations[j] != state.code.activations[j];
    }
    if (!modified) {
        // decode(a) + (x - decode(a)) can differ from x in the last ulp.
        state.embedding.assign(x.begin(), x.end());
    } else {
        state.embedding = decode(model, state.activations);
        for (std::size_t i = 0; i < state.embedding.size(); ++i) {
            state.embedding[i] += state.code.residual[i];
        }
    }
    return state;
}

Prediction score_embedding(std::span<const double> embedding, const ClassSet& classes,
                           const ScoreOptions& options) {
    options.validate();
    if (embedding.size() != classes.dim()) {
        throw Error(ErrorCode::DimMismatch, "embedding dimension differs from class set");
    }
    Prediction p;
    p.labels = classes.labels();
    p.mode = options.mode;
    p.logit_scale = options.logit_scale;
    p.logits.resize(classes.size());
    for (std::size_t c = 0; c < classes.size(); ++c) {
        p.logits[c] = options.logit_scale * similarity(embedding, classes.embedding(c), options.mode);
    }
    // max_element returns the first maximum: ties go to the lowest index.
    p.predicted_index = static_cast<std::size_t>(
        std::max_element(p.logits.begin(), p.logits.end()) - p.logits.begin());
    softmax(p.logits, p.probabilities);
    return p;
}

Prediction predict(const SaeModel& model, std::span<const float> x, const ClassSet& classes,
                   const SteeringConfig& steering, const ScoreOptions& options) {
    check_input(model, x, classes);
    const auto state = apply_steering(model, x, steering);
    return score_embedding(state.embedding, classes, options);
}

std::vector<double> logit_gradient(std::span<const double> x, std::span<const double> t,
                                   const ScoreOptions& options) {
    std::vector<double> g(x.size());
    if (options.mode == ScoreMode::Dot) {
        for (std::size_t i = 0; i < x.size(); ++i) {
            g[i] = options.logit_scale * t[i];
        }
        return g;
    }
    const double nx = norm(x);
    const double nt = norm(t);
    if (nx == 0.0 || nt == 0.0) {
        throw Error(ErrorCode::ZeroNormEmbedding, "cosine gradient undefined at zero norm");
    }
    // d cos / dx = t / (|x||t|) - (x.t) x / (|x|^3 |t|)
    const double xt = dot(x, t);
    const double a = 1.0 / (nx * nt);
    const double b = xt / (nx * nx * nx * nt);
    for (std::size_t i = 0; i < x.size(); ++i) {
        g[i] = options.logit_scale * (a * t[i] - b * x[i]);
    }
    return g;
}

AttributionResult attribute(const SaeModel& model, std::span<const float> x,
                            const ClassSet& classes, const SteeringConfig& steering,
                            const std::optional<std::string>& target,
                            const ScoreOptions& options) {
    check_input(model, x, classes);
    const auto state = apply_steering(model, x, steering);
    const auto prediction = score_embedding(state.embedding, classes, options);

    AttributionResult result;
    if (target) {
        const auto idx = classes.index_of(*target);
        if (!idx) {
            throw Error(ErrorCode::UnknownClass,
                        "class \"" + *target + "\" not in class set \"" + classes.name() + "\"");
        }
        result.target_index = *idx;
    } else {
        result.target_index = prediction.predicted_index;
    }
    result.target_class = classes.label(result.target_index);
    result.target_logit = prediction.logits[result.target_index];

    const auto g = logit_gradient(state.embedding, classes.embedding(result.target_index), options);
    const std::size_t k = model.dim_sae();
    result.activations = state.activations;
    result.gradients.resize(k);
    result.relevance.resize(k);
    for (std::size_t j = 0; j < k; ++j) {
        const auto v = model.direction(j);
        double gv = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            gv += g[i] * static_cast<double>(v[i]);
        }
        result.gradients[j] = gv;
        result.relevance[j] = state.activations[j] * gv;
        if (state.code.activations[j] > 0.0) {
            result.ranking.push_back(j);
        }
    }
    std::stable_sort(result.ranking.begin(), result.ranking.end(),
                     [&](std::size_t a, std::size_t b) {
                         return std::abs(result.relevance[a]) > std::abs(result.relevance[b]);
                     });
    return result;
}

std::vector<double> steering_grid(std::size_t steps) {
    if (steps < 2) {
        throw Error(ErrorCode::InvalidRequest, "dose-response grid needs at least 2 steps");
    }
    std::vector<double> grid(steps);
    const double denom = static_cast<double>(steps - 1);
    for (std::size_t i = 0; i < steps; ++i) {
        // 2i - (steps-1) is exact in double, so odd grids hit 0 exactly.
        grid[i] = (2.0 * static_cast<double>(i) - denom) / denom;
    }
    return grid;
}

std::vector<DosePoint> dose_response(const SaeModel& model, std::span<const float> x,
                                     const ClassSet& classes, std::size_t component,
                                     std::span<const double> grid, const ScoreOptions& options) {
    check_input(model, x, classes);
    std::vector<DosePoint> curve;
    curve.reserve(grid.size());
    for (double m : grid) {
        SteeringConfig single;
        single.set(component, m);
        curve.push_back({m, predict(model, x, classes, single, options)});
    }
    return curve;
}

ImpactReport global_impact(const SaeModel& model, const EmbeddingCorpus& eval_set,
                           const ClassSet& classes, const SteeringConfig& steering,
                           const ScoreOptions& options) {
    if (!eval_set.labels()) {
        throw Error(ErrorCode::UnlabeledEvalSet, "evaluation set has no labels");
    }
    const auto& labels = *eval_set.labels();
    std::vector<std::size_t> truth(eval_set.count());
    for (std::size_t n = 0; n < eval_set.count(); ++n) {
        const auto idx = classes.index_of(labels[n]);
        if (!idx) {
            throw Error(ErrorCode::UnknownLabel, "evaluation label \"" + labels[n] +
                                                     "\" not in class set \"" + classes.name() + "\"");
        }
        truth[n] = *idx;
    }
    steering.check_components(model.dim_sae());

    const std::size_t num_classes = classes.size();
    ImpactReport report;
    report.samples = eval_set.count();
    report.per_class.resize(num_classes);
    std::vector<std::size_t> correct_before(num_classes, 0);
    std::vector<std::size_t> correct_after(num_classes, 0);
    const SteeringConfig none;
    double shift = 0.0;
    for (std::size_t n = 0; n < eval_set.count(); ++n) {
        const auto before = predict(model, eval_set.row(n), classes, none, options);
        const auto after = predict(model, eval_set.row(n), classes, steering, options);
        const std::size_t c = truth[n];
        auto& entry = report.per_class[c];
        ++entry.support;
        correct_before[c] += before.predicted_index == c;
        correct_after[c] += after.predicted_index == c;
        entry.mean_prob_before += before.probabilities[c];
        entry.mean_prob_after += after.probabilities[c];
        for (std::size_t k = 0; k < num_classes; ++k) {
            shift += std::abs(after.probabilities[k] - before.probabilities[k]);
        }
    }
    std::size_t total_before = 0;
    std::size_t total_after = 0;
    for (std::size_t c = 0; c < num_classes; ++c) {
        auto& entry = report.per_class[c];
        entry.label = classes.label(c);
        total_before += correct_before[c];
        total_after += correct_after[c];
        if (entry.support > 0) {
            const double s = static_cast<double>(entry.support);
            entry.accuracy_before = static_cast<double>(correct_before[c]) / s;
            entry.accuracy_after = static_cast<double>(correct_after[c]) / s;
            entry.mean_prob_before /= s;
            entry.mean_prob_after /= s;
        }
    }
    if (report.samples > 0) {
        const double n = static_cast<double>(report.samples);
        report.accuracy_before = static_cast<double>(total_before) / n;
        report.accuracy_after = static_cast<double>(total_after) / n;
        report.mean_abs_prob_shift = shift / (n * static_cast<double>(num_classes));
    }
    return report;
}

} // namespace steerlens
