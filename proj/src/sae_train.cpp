#include "steerlens/error.hpp"
#include "steerlens/sae.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace steerlens {

void TrainConfig::validate() const {
    if (!(sparsity_weight >= 0.0) || !std::isfinite(sparsity_weight)) {
        throw Error(ErrorCode::InvalidConfig, "sparsity_weight must be a non-negative number");
    }
    if (epochs == 0 || batch_size == 0) {
        throw Error(ErrorCode::InvalidConfig, "epochs and batch_size must be positive");
    }
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw Error(ErrorCode::InvalidConfig, "learning_rate must be positive");
    }
    if (dead_resample_interval && *dead_resample_interval == 0) {
        throw Error(ErrorCode::InvalidConfig, "dead_resample_interval must be positive");
    }
}

namespace {

// Parameter block in double precision, laid out like SaeModel.
struct Params {
    std::size_t d = 0;
    std::size_t k = 0;
    std::vector<double> enc_w; // k x d
    std::vector<double> enc_b; // k
    std::vector<double> dec_w; // k x d
    std::vector<double> dec_b; // d

    void zero() {
        std::fill(enc_w.begin(), enc_w.end(), 0.0);
        std::fill(enc_b.begin(), enc_b.end(), 0.0);
        std::fill(dec_w.begin(), dec_w.end(), 0.0);
        std::fill(dec_b.begin(), dec_b.end(), 0.0);
    }

    static Params shaped(std::size_t d, std::size_t k) {
        Params p;
        p.d = d;
        p.k = k;
        p.enc_w.assign(k * d, 0.0);
        p.enc_b.assign(k, 0.0);
        p.dec_w.assign(k * d, 0.0);
        p.dec_b.assign(d, 0.0);
        return p;
    }

    template <typename F>
    void for_each_block(Params& other, F&& f) {
        f(enc_w, other.enc_w);
        f(enc_b, other.enc_b);
        f(dec_w, other.dec_w);
        f(dec_b, other.dec_b);
    }
};

void normalize_row(double* row, std::size_t d) {
    double sq = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        sq += row[i] * row[i];
    }
    const double norm = std::sqrt(sq);
    if (norm > 0.0) {
        for (std::size_t i = 0; i < d; ++i) {
            row[i] /= norm;
        }
    }
}

class Trainer {
public:
    Trainer(const EmbeddingCorpus& corpus, std::size_t dim_sae, const TrainConfig& cfg)
        : corpus_(corpus), cfg_(cfg), rng_(cfg.seed),
          params_(Params::shaped(corpus.dim(), dim_sae)),
          grads_(Params::shaped(corpus.dim(), dim_sae)) {
        initialise();
        if (cfg_.optimizer == Optimizer::Adam) {
            m1_ = Params::shaped(corpus.dim(), dim_sae);
            m2_ = Params::shaped(corpus.dim(), dim_sae);
        }
        centered_.resize(corpus.dim());
        pre_.resize(dim_sae);
        act_.resize(dim_sae);
        err_.resize(corpus.dim());
        dact_.resize(dim_sae);
    }

    SaeModel run(TrainLog* log) {
        std::vector<std::size_t> order(corpus_.count());
        std::iota(order.begin(), order.end(), std::size_t{0});
        for (std::size_t epoch = 0; epoch < cfg_.epochs; ++epoch) {
            std::shuffle(order.begin(), order.end(), rng_);
            double epoch_loss = 0.0;
            for (std::size_t start = 0; start < order.size(); start += cfg_.batch_size) {
                const std::size_t end = std::min(order.size(), start + cfg_.batch_size);
                epoch_loss += step(std::span(order).subspan(start, end - start));
            }
            epoch_loss /= static_cast<double>(order.size());
            if (!std::isfinite(epoch_loss)) {
                throw Error(ErrorCode::DivergedLoss,
                            "training loss became non-finite in epoch " + std::to_string(epoch));
            }
            if (log) {
                log->epoch_loss.push_back(epoch_loss);
            }
            if (cfg_.dead_resample_interval && epoch + 1 < cfg_.epochs &&
                (epoch + 1) % *cfg_.dead_resample_interval == 0) {
                const std::size_t n = resample_dead();
                if (log) {
                    log->resampled += n;
                }
            }
        }
        return export_model();
    }

private:
    void initialise() {
        const std::size_t d = params_.d;
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (double& w : params_.dec_w) {
            w = gauss(rng_);
        }
        for (std::size_t j = 0; j < params_.k; ++j) {
            normalize_row(params_.dec_w.data() + j * d, d);
        }
        params_.enc_w = params_.dec_w;
        for (std::size_t n = 0; n < corpus_.count(); ++n) {
            const auto x = corpus_.row(n);
            for (std::size_t i = 0; i < d; ++i) {
                params_.dec_b[i] += x[i];
            }
        }
        for (double& b : params_.dec_b) {
            b /= static_cast<double>(corpus_.count());
        }
    }

    // Forward pass for one sample into pre_/act_/err_; returns the objective.
    double forward(std::span<const float> x) {
        const std::size_t d = params_.d;
        for (std::size_t i = 0; i < d; ++i) {
            centered_[i] = static_cast<double>(x[i]) - params_.dec_b[i];
        }
        double l1 = 0.0;
        for (std::size_t j = 0; j < params_.k; ++j) {
            const double* w = params_.enc_w.data() + j * d;
            double pre = params_.enc_b[j];
            for (std::size_t i = 0; i < d; ++i) {
                pre += w[i] * centered_[i];
            }
            pre_[j] = pre;
            act_[j] = pre > 0.0 ? pre : 0.0;
            l1 += act_[j];
        }
        // err = decode(a) - x = sum_j a_j v_j - centered
        for (std::size_t i = 0; i < d; ++i) {
            err_[i] = -centered_[i];
        }
        for (std::size_t j = 0; j < params_.k; ++j) {
            if (act_[j] == 0.0) {
                continue;
            }
            const double* v = params_.dec_w.data() + j * d;
            for (std::size_t i = 0; i < d; ++i) {
                err_[i] += act_[j] * v[i];
            }
        }
        double sq = 0.0;
        for (double e : err_) {
            sq += e * e;
        }
        return sq + cfg_.sparsity_weight * l1;
    }

    double step(std::span<const std::size_t> batch) {
        const std::size_t d = params_.d;
        const double scale = 1.0 / static_cast<double>(batch.size());
        grads_.zero();
        double loss = 0.0;
        for (std::size_t n : batch) {
            loss += forward(corpus_.row(n));
            // dL/dxhat = 2 err; dL/da_j = 2 v_j.err + lambda
            for (std::size_t i = 0; i < d; ++i) {
                grads_.dec_b[i] += 2.0 * err_[i] * scale;
            }
            for (std::size_t j = 0; j < params_.k; ++j) {
                const double* v = params_.dec_w.data() + j * d;
                double* gv = grads_.dec_w.data() + j * d;
                const double a = act_[j];
                double dot = 0.0;
                for (std::size_t i = 0; i < d; ++i) {
                    dot += v[i] * err_[i];
                    if (a != 0.0) {
                        gv[i] += 2.0 * a * err_[i] * scale;
                    }
                }
                dact_[j] = pre_[j] > 0.0 ? (2.0 * dot + cfg_.sparsity_weight) * scale : 0.0;
            }
            for (std::size_t j = 0; j < params_.k; ++j) {
                const double g = dact_[j];
                if (g == 0.0) {
                    continue;
                }
                grads_.enc_b[j] += g;
                double* gw = grads_.enc_w.data() + j * d;
                const double* w = params_.enc_w.data() + j * d;
                for (std::size_t i = 0; i < d; ++i) {
                    gw[i] += g * centered_[i];
                    grads_.dec_b[i] -= g * w[i];
                }
            }
        }
        apply_update();
        for (std::size_t j = 0; j < params_.k; ++j) {
            normalize_row(params_.dec_w.data() + j * d, d);
        }
        return loss;
    }

    void apply_update() {
        const double lr = cfg_.learning_rate;
        if (cfg_.optimizer == Optimizer::Sgd) {
            params_.for_each_block(grads_, [lr](std::vector<double>& p, std::vector<double>& g) {
                for (std::size_t i = 0; i < p.size(); ++i) {
                    p[i] -= lr * g[i];
                }
            });
            return;
        }
        constexpr double beta1 = 0.9;
        constexpr double beta2 = 0.999;
        constexpr double eps = 1e-8;
        ++adam_steps_;
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(adam_steps_));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(adam_steps_));
        auto update = [&](std::vector<double>& p, const std::vector<double>& g,
                          std::vector<double>& m, std::vector<double>& v) {
            for (std::size_t i = 0; i < p.size(); ++i) {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
            }
        };
        update(params_.enc_w, grads_.enc_w, m1_.enc_w, m2_.enc_w);
        update(params_.enc_b, grads_.enc_b, m1_.enc_b, m2_.enc_b);
        update(params_.dec_w, grads_.dec_w, m1_.dec_w, m2_.dec_w);
        update(params_.dec_b, grads_.dec_b, m1_.dec_b, m2_.dec_b);
    }

    // Dead components get the normalised residual of the worst-reconstructed
    // samples as their new direction (encoder and decoder alike).
    std::size_t resample_dead() {
        const std::size_t d = params_.d;
        std::vector<bool> alive(params_.k, false);
        std::vector<std::pair<double, std::size_t>> errors;
        errors.reserve(corpus_.count());
        for (std::size_t n = 0; n < corpus_.count(); ++n) {
            const double loss = forward(corpus_.row(n));
            for (std::size_t j = 0; j < params_.k; ++j) {
                alive[j] = alive[j] || act_[j] > 0.0;
            }
            errors.emplace_back(loss, n);
        }
        std::stable_sort(errors.begin(), errors.end(),
                         [](const auto& a, const auto& b) { return a.first > b.first; });
        std::size_t next = 0;
        std::size_t count = 0;
        for (std::size_t j = 0; j < params_.k && next < errors.size(); ++j) {
            if (alive[j]) {
                continue;
            }
            forward(corpus_.row(errors[next++].second));
            double* v = params_.dec_w.data() + j * d;
            for (std::size_t i = 0; i < d; ++i) {
                v[i] = -err_[i];
            }
            normalize_row(v, d);
            std::copy(v, v + d, params_.enc_w.data() + j * d);
            params_.enc_b[j] = 0.0;
            if (cfg_.optimizer == Optimizer::Adam) {
                for (Params* state : {&m1_, &m2_}) {
                    std::fill_n(state->enc_w.data() + j * d, d, 0.0);
                    std::fill_n(state->dec_w.data() + j * d, d, 0.0);
                    state->enc_b[j] = 0.0;
                }
            }
            ++count;
        }
        return count;
    }

    SaeModel export_model() const {
        auto to_float = [](const std::vector<double>& v) {
            return std::vector<float>(v.begin(), v.end());
        };
        return SaeModel(params_.d, params_.k, to_float(params_.enc_w), to_float(params_.enc_b),
                        to_float(params_.dec_w), to_float(params_.dec_b));
    }

    const EmbeddingCorpus& corpus_;
    const TrainConfig& cfg_;
    std::mt19937_64 rng_;
    Params params_;
    Params grads_;
    Params m1_;
    Params m2_;
    std::uint64_t adam_steps_ = 0;

    std::vector<double> centered_;
    std::vector<double> pre_;
    std::vector<double> act_;
    std::vector<double> err_;
    std::vector<double> dact_;
};

} // namespace

SaeModel train(const EmbeddingCorpus& corpus, std::size_t dim_sae, const TrainConfig& cfg,
               TrainLog* log) {
    cfg.validate();
    if (corpus.empty()) {
        throw Error(ErrorCode::EmptyCorpus, "cannot train on an empty corpus");
    }
    if (dim_sae == 0) {
        throw Error(ErrorCode::InvalidConfig, "dim_sae must be positive");
    }
    Trainer trainer(corpus, dim_sae, cfg);
    return trainer.run(log);
}

} // namespace steerlens
