#include "cli.hpp"

#include "steerlens/api.hpp"
#include "steerlens/concepts.hpp"
#include "steerlens/engine.hpp"
#include "steerlens/error.hpp"
#include "steerlens/http_server.hpp"
#include "steerlens/ingest.hpp"
#include "steerlens/json_codec.hpp"
#include "steerlens/sae.hpp"
#include "steerlens/synthetic.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <thread>

namespace steerlens::cli {

namespace {

// Recovery benchmark: 64-dim data built from 32 orthonormal directions.
constexpr std::size_t kBenchDim = 64;
constexpr std::size_t kBenchDirections = 32;
constexpr std::size_t kBenchSamples = 10000;
constexpr double kBenchThreshold = 0.9;

TrainConfig benchmark_config(std::uint64_t seed) {
    TrainConfig cfg;
    cfg.sparsity_weight = 5e-2;
    cfg.epochs = 30;
    cfg.batch_size = 32;
    cfg.learning_rate = 0.1;
    cfg.seed = seed;
    return cfg;
}

struct Globals {
    std::uint64_t seed = 0;
    bool quiet = false;
};

struct TrainArgs {
    std::string corpus;
    std::string out;
    std::size_t dim_sae = 0;
    std::size_t epochs = TrainConfig{}.epochs;
    std::size_t batch_size = TrainConfig{}.batch_size;
    double learning_rate = TrainConfig{}.learning_rate;
    double sparsity = TrainConfig{}.sparsity_weight;
    std::string optimizer = "sgd";
    std::size_t resample_interval = 0;
    bool benchmark = false;
};

struct NameArgs {
    std::string sae, reference, vocab, out;
    std::size_t k = kDefaultExemplars;
    std::size_t top_labels = 0;
};

struct SampleArgs {
    std::string sae, corpus, sample, class_set, mode = "cosine";
    double scale = 100.0;
};

struct AttributeArgs {
    SampleArgs s;
    std::string target;
    std::vector<std::string> steer;
    std::size_t limit = 0;
    bool json = false;
};

struct SweepArgs {
    SampleArgs s;
    std::vector<std::size_t> components;
    std::size_t steps = 21;
    std::string out;
};

struct ServeArgs {
    std::string config;
    std::string host = "127.0.0.1";
    int port = 8765;
};

std::string fmt_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_fixed(double v, int prec = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", prec, v);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) {
        return s;
    }
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += '"';
        q += c;
    }
    return q + "\"";
}

void add_sample_options(CLI::App* cmd, SampleArgs& a) {
    cmd->add_option("--sae", a.sae, "SAE1 checkpoint")->required();
    cmd->add_option("--corpus", a.corpus, "EMB1 corpus holding the sample")->required();
    cmd->add_option("--sample", a.sample, "sample id, or #N for the N-th row")->required();
    cmd->add_option("--class-set", a.class_set, "EMB1 class set (labels are class names)")->required();
    cmd->add_option("--mode", a.mode, "score mode")->check(CLI::IsMember({"cosine", "dot"}));
    cmd->add_option("--scale", a.scale, "logit scale");
}

std::size_t select_sample(const EmbeddingCorpus& corpus, const std::string& sel) {
    if (!sel.empty() && sel[0] == '#') {
        std::size_t i = 0;
        try {
            i = std::stoul(sel.substr(1));
        } catch (const std::exception&) {
            throw Error(ErrorCode::InvalidRequest, "bad sample index " + sel);
        }
        if (i >= corpus.count()) {
            throw Error(ErrorCode::UnknownSample, "sample index " + sel + " out of range");
        }
        return i;
    }
    auto idx = corpus.index_of(sel);
    if (!idx) {
        throw Error(ErrorCode::UnknownSample, "no sample " + sel);
    }
    return *idx;
}

SteeringConfig parse_steer(const std::vector<std::string>& items) {
    std::vector<std::pair<std::size_t, double>> entries;
    for (const auto& item : items) {
        const auto eq = item.find('=');
        try {
            if (eq == std::string::npos) throw std::invalid_argument(item);
            std::size_t used = 0;
            const auto j = std::stoul(item.substr(0, eq), &used);
            if (used != eq) throw std::invalid_argument(item);
            entries.emplace_back(j, std::stod(item.substr(eq + 1)));
        } catch (const std::exception&) {
            throw Error(ErrorCode::InvalidSteering, "expected COMPONENT=M, got " + item);
        }
    }
    return SteeringConfig::from_list(entries);
}

struct Loaded {
    SaeModel model;
    EmbeddingCorpus corpus;
    ClassSet classes;
    ScoreOptions score;
    std::size_t index;
};

Loaded load_sample(const SampleArgs& a) {
    auto model = load_sae(a.sae);
    auto corpus = read_corpus(a.corpus);
    auto classes = read_class_set(a.class_set, "classes");
    ScoreOptions score{parse_score_mode(a.mode), a.scale};
    score.validate();
    const auto index = select_sample(corpus, a.sample);
    return {std::move(model), std::move(corpus), std::move(classes), score, index};
}

int cmd_train(const Globals& g, const TrainArgs& a, std::ostream& out, std::ostream& err) {
    TrainConfig cfg;
    cfg.seed = g.seed;
    cfg.epochs = a.epochs;
    cfg.batch_size = a.batch_size;
    cfg.learning_rate = a.learning_rate;
    cfg.sparsity_weight = a.sparsity;
    cfg.optimizer = a.optimizer == "adam" ? Optimizer::Adam : Optimizer::Sgd;
    if (a.resample_interval > 0) cfg.dead_resample_interval = a.resample_interval;

    if (a.benchmark) {
        synthetic::SparseDatasetSpec spec;
        spec.dim = kBenchDim;
        spec.num_directions = kBenchDirections;
        spec.samples = kBenchSamples;
        spec.seed = g.seed;
        const auto data = synthetic::make_sparse_dataset(spec);
        const auto t0 = std::chrono::steady_clock::now();
        const auto model = train(data.corpus, a.dim_sae == 0 ? kBenchDim : a.dim_sae, benchmark_config(g.seed));
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const double score = synthetic::recovery_score(model, data.directions, data.num_directions);
        if (!a.out.empty()) save_sae(model, a.out);
        out << "recovery_score " << fmt_fixed(score) << " threshold " << fmt_fixed(kBenchThreshold, 2)
            << " seconds " << fmt_fixed(secs, 2) << ' ' << (score >= kBenchThreshold ? "PASS" : "FAIL") << '\n';
        return score >= kBenchThreshold ? 0 : 1;
    }

    if (a.corpus.empty() || a.out.empty() || a.dim_sae == 0) {
        throw Error(ErrorCode::InvalidConfig, "train needs --corpus, --out and --dim-sae (or --benchmark-recovery)");
    }
    const auto corpus = read_corpus(a.corpus);
    TrainLog log;
    const auto model = train(corpus, a.dim_sae, cfg, &log);
    save_sae(model, a.out);
    if (!g.quiet) {
        for (std::size_t e = 0; e < log.epoch_loss.size(); ++e) {
            err << "epoch " << e + 1 << " loss " << fmt_g(log.epoch_loss[e]) << '\n';
        }
        err << "dead components: " << dead_components(model, corpus).size() << " of " << a.dim_sae << '\n';
    }
    return 0;
}

int cmd_name(const Globals& g, const NameArgs& a, std::ostream&, std::ostream& err) {
    const auto model = load_sae(a.sae);
    const auto reference = read_corpus(a.reference);
    const auto vocab = read_vocabulary(a.vocab);
    const auto cards = build_all_cards(model, reference, vocab, a.k, a.top_labels);
    write_cards(cards, a.out);
    if (!g.quiet) {
        std::size_t dead = 0;
        for (const auto& c : cards) dead += c.dead ? 1 : 0;
        err << "wrote " << cards.size() << " cards (" << dead << " dead) to " << a.out << '\n';
    }
    return 0;
}

int cmd_attribute(const Globals&, const AttributeArgs& a, std::ostream& out, std::ostream&) {
    const auto in = load_sample(a.s);
    const auto steering = parse_steer(a.steer);
    steering.check_components(in.model.dim_sae());
    const auto x = in.corpus.row(in.index);
    std::optional<std::string> target;
    if (!a.target.empty()) target = a.target;
    const auto pred = predict(in.model, x, in.classes, steering, in.score);
    const auto r = attribute(in.model, x, in.classes, steering, target, in.score);
    const std::size_t limit = a.limit == 0 ? r.ranking.size() : std::min(a.limit, r.ranking.size());

    // Dot mode: sum_j R_j = y - scale * (b_dec + residual) . t
    std::optional<std::pair<double, double>> completeness;
    if (in.score.mode == ScoreMode::Dot) {
        const auto state = apply_steering(in.model, x, steering);
        const auto t = in.classes.embedding(r.target_index);
        double offset = 0.0;
        for (std::size_t d = 0; d < t.size(); ++d) {
            offset += (in.model.dec_bias()[d] + state.code.residual[d]) * t[d];
        }
        double sum = 0.0;
        for (double v : r.relevance) sum += v;
        completeness = {sum, r.target_logit - in.score.logit_scale * offset};
    }

    if (a.json) {
        json::Json j;
        j["sample_id"] = in.corpus.ids()[in.index];
        j["steering"] = json::to_json(steering);
        j["prediction"] = json::to_json(pred);
        j["attribution"] = json::to_json(r, limit);
        if (completeness) {
            j["completeness"] = {{"sum_relevance", completeness->first},
                                 {"expected", completeness->second},
                                 {"abs_error", std::abs(completeness->first - completeness->second)}};
        }
        out << j.dump(2) << '\n';
        return 0;
    }

    out << "sample " << in.corpus.ids()[in.index] << "  predicted " << pred.predicted() << "  target "
        << r.target_class << "  logit " << fmt_fixed(r.target_logit) << '\n';
    char line[160];
    std::snprintf(line, sizeof line, "%5s %9s %14s %14s %14s\n", "rank", "component", "activation", "gradient",
                  "attribution");
    out << line;
    for (std::size_t i = 0; i < limit; ++i) {
        const auto c = r.ranking[i];
        std::snprintf(line, sizeof line, "%5zu %9zu %14.6f %14.6f %14.6f\n", i + 1, c, r.activations[c],
                      r.gradients[c], r.relevance[c]);
        out << line;
    }
    if (completeness) {
        const double e = std::abs(completeness->first - completeness->second);
        out << "completeness sum_R " << fmt_g(completeness->first) << " expected " << fmt_g(completeness->second)
            << " abs_error " << fmt_g(e) << ' ' << (e <= 1e-5 ? "PASS" : "FAIL") << '\n';
    }
    return 0;
}

int cmd_sweep(const Globals& g, const SweepArgs& a, std::ostream& out, std::ostream& err) {
    const auto in = load_sample(a.s);
    const auto grid = steering_grid(a.steps);
    for (auto c : a.components) {
        if (c >= in.model.dim_sae()) {
            throw Error(ErrorCode::UnknownComponent, "component " + std::to_string(c) + " out of range");
        }
    }
    std::string csv = "component,m,predicted";
    for (const auto& l : in.classes.labels()) csv += "," + csv_field("logit_" + l);
    for (const auto& l : in.classes.labels()) csv += "," + csv_field("prob_" + l);
    csv += '\n';
    for (auto c : a.components) {
        for (const auto& p : dose_response(in.model, in.corpus.row(in.index), in.classes, c, grid, in.score)) {
            csv += std::to_string(c) + "," + fmt_g(p.m) + "," + csv_field(p.prediction.predicted());
            for (double v : p.prediction.logits) csv += "," + fmt_g(v);
            for (double v : p.prediction.probabilities) csv += "," + fmt_g(v);
            csv += '\n';
        }
    }
    if (a.out.empty() || a.out == "-") {
        out << csv;
        return 0;
    }
    std::ofstream f(a.out, std::ios::binary);
    f << csv;
    if (!f.flush()) {
        throw Error(ErrorCode::IoFailure, "cannot write " + a.out);
    }
    if (!g.quiet) {
        err << "wrote " << a.components.size() * grid.size() << " rows to " << a.out << '\n';
    }
    return 0;
}

std::atomic<bool> g_interrupted{false};

extern "C" void on_signal(int) {
    g_interrupted.store(true);
}

int cmd_serve(const Globals& g, const ServeArgs& a, std::ostream& out, std::ostream& err) {
    const auto cfg = WorkbenchConfig::from_file(a.config);
    const auto wb = Workbench::load(cfg);
    SessionStore store(cfg.history_dir);
    Api api(wb, store);
    HttpServer server(api);
    const int port = server.bind(a.host, a.port);
    if (port < 0) {
        throw Error(ErrorCode::IoFailure, "cannot bind " + a.host + ":" + std::to_string(a.port));
    }
    g_interrupted.store(false);
    auto prev_int = std::signal(SIGINT, on_signal);
    auto prev_term = std::signal(SIGTERM, on_signal);
    std::atomic<bool> done{false};
    std::thread watcher([&] {
        while (!done.load()) {
            if (g_interrupted.load()) {
                server.stop();
                return;
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(20));
        }
    });
    out << "listening on http://" << a.host << ":" << port << std::endl;
    const bool ok = server.listen_after_bind();
    done.store(true);
    watcher.join();
    store.close();
    std::signal(SIGINT, prev_int);
    std::signal(SIGTERM, prev_term);
    if (!g.quiet) err << "stopped; history flushed\n";
    return ok || g_interrupted.load() ? 0 : 1;
}

} // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Sparse-autoencoder steering and attribution toolkit for embedding classifiers"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--seed", g.seed, "random seed")->capture_default_str();
    app.add_flag("--quiet", g.quiet, "suppress progress output");

    TrainArgs ta;
    auto* train_cmd = app.add_subcommand("train", "train an SAE on an EMB1 corpus");
    train_cmd->add_option("--corpus", ta.corpus, "EMB1 training corpus");
    train_cmd->add_option("--out", ta.out, "output SAE1 checkpoint");
    train_cmd->add_option("--dim-sae", ta.dim_sae, "number of components");
    train_cmd->add_option("--epochs", ta.epochs)->capture_default_str();
    train_cmd->add_option("--batch-size", ta.batch_size)->capture_default_str();
    train_cmd->add_option("--lr", ta.learning_rate)->capture_default_str();
    train_cmd->add_option("--sparsity", ta.sparsity, "L1 weight")->capture_default_str();
    train_cmd->add_option("--optimizer", ta.optimizer)->check(CLI::IsMember({"sgd", "adam"}))->capture_default_str();
    train_cmd->add_option("--resample-interval", ta.resample_interval, "epochs between dead-component resampling");
    train_cmd->add_flag("--benchmark-recovery", ta.benchmark,
                        "train on synthetic sparse data (fixed hyperparameters) and report dictionary recovery");

    NameArgs na;
    auto* name_cmd = app.add_subcommand("name", "build concept cards (CRD1)");
    name_cmd->add_option("--sae", na.sae)->required();
    name_cmd->add_option("--reference", na.reference, "EMB1 reference corpus")->required();
    name_cmd->add_option("--vocab", na.vocab, "EMB1 vocabulary with one empty-prompt entry")->required();
    name_cmd->add_option("--k", na.k, "exemplars per card")->capture_default_str();
    name_cmd->add_option("--top-labels", na.top_labels, "labels kept per card (0 = all)");
    name_cmd->add_option("--out", na.out)->required();

    AttributeArgs aa;
    auto* attr_cmd = app.add_subcommand("attribute", "rank components by attribution for one sample");
    add_sample_options(attr_cmd, aa.s);
    attr_cmd->add_option("--target", aa.target, "class to explain (default: predicted)");
    attr_cmd->add_option("--steer", aa.steer, "COMPONENT=M modifications");
    attr_cmd->add_option("--limit", aa.limit, "rows to print (0 = all)");
    attr_cmd->add_flag("--json", aa.json, "machine-readable output");

    SweepArgs sa;
    auto* sweep_cmd = app.add_subcommand("sweep", "dose-response CSV for selected components");
    add_sample_options(sweep_cmd, sa.s);
    sweep_cmd->add_option("--components", sa.components)->required()->delimiter(',');
    sweep_cmd->add_option("--steps", sa.steps)->capture_default_str();
    sweep_cmd->add_option("--out", sa.out, "CSV path (default stdout)");

    ServeArgs va;
    auto* serve_cmd = app.add_subcommand("serve", "run the HTTP workbench API");
    serve_cmd->add_option("--config", va.config)->required();
    serve_cmd->add_option("--host", va.host)->capture_default_str();
    serve_cmd->add_option("--port", va.port)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (*train_cmd) return cmd_train(g, ta, out, err);
        if (*name_cmd) return cmd_name(g, na, out, err);
        if (*attr_cmd) return cmd_attribute(g, aa, out, err);
        if (*sweep_cmd) return cmd_sweep(g, sa, out, err);
        if (*serve_cmd) return cmd_serve(g, va, out, err);
    } catch (const Error& e) {
        err << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
    return 1;
}

} // namespace steerlens::cli
