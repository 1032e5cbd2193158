// fzr: prototype-based fuzzy rule classifier, command-line front end.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "fzr/classmap.hpp"
#include "fzr/dataset.hpp"
#include "fzr/eval.hpp"
#include "fzr/inference.hpp"
#include "fzr/pipeline.hpp"
#include "fzr/prototype.hpp"
#include "fzr/rulebase.hpp"
#include "fzr/sofm.hpp"
#include "fzr/tuning.hpp"

namespace fs = std::filesystem;
using namespace fzr;

namespace {

struct MissingFile : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require_file(const fs::path& p) {
    if (!fs::exists(p)) throw MissingFile(fmt::format("no such file: {}", p.string()));
}

// Flag values as typed; applied on top of a base RunConfig.
struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<double> k_w, q, eta_m, eta_s, eta_scale, eta_q, eps_reduce, firing_threshold, purity,
        merge_factor, sigma_floor, sofm_alpha;
    std::optional<std::size_t> maxiter, min_support, max_rounds, sofm_epochs;
    std::optional<std::string> tnorm;
    std::vector<std::size_t> features, train_counts;
    bool qtune_sign_corrected = false, qtune_sign_printed = false, rms_spread = false, printed_spread = false;

    void attach(CLI::App* app) {
        app->add_option("--seed", seed, "Seed for every random draw");
        app->add_option("--kw", k_w, "Initial spread multiplier");
        app->add_option("--tnorm", tnorm, "Conjunction: product, softmin or min");
        app->add_option("--q", q, "Softmin exponent of new rules");
        app->add_option("--eta-m", eta_m, "Center learning rate (uniform over features)");
        app->add_option("--eta-s", eta_s, "Spread learning rate (uniform over features)");
        app->add_option("--eta-scale", eta_scale, "Default rates as a multiple of each feature's squared range");
        app->add_option("--eta-q", eta_q, "Exponent learning rate");
        app->add_option("--eps-reduce", eps_reduce, "Learning-rate reduction on rollback");
        app->add_option("--maxiter", maxiter, "Maximum tuning epochs");
        app->add_option("--firing-threshold", firing_threshold, "Outlier threshold on the best firing strength");
        app->add_option("--features", features, "Zero-based feature columns to keep")->delimiter(',');
        app->add_option("--train-counts", train_counts, "Training samples per class")->delimiter(',');
        app->add_flag("--qtune-sign-corrected", qtune_sign_corrected, "Descent sign for the wrong-class exponent");
        app->add_flag("--qtune-sign-printed", qtune_sign_printed, "Default \"+\" sign for the wrong-class exponent");
        app->add_flag("--rms-spread", rms_spread, "Initial spreads as RMS distance");
        app->add_flag("--printed-spread", printed_spread, "Initial spreads as sqrt(sum of squares) / |X_i|");
        app->add_option("--sigma-floor", sigma_floor, "Spread floor as a fraction of feature range");
        app->add_option("--min-support", min_support, "Prototype support below which it is deleted");
        app->add_option("--purity", purity, "Prototype purity below which it is split");
        app->add_option("--merge-factor", merge_factor, "Same-class merge distance in units of spread");
        app->add_option("--max-rounds", max_rounds, "Prototype refinement rounds");
        app->add_option("--sofm-epochs", sofm_epochs, "SOFM training epochs");
        app->add_option("--sofm-alpha", sofm_alpha, "Initial SOFM learning rate");
    }

    RunConfig apply(RunConfig cfg) const {
        if (seed) cfg.seed = *seed;
        if (k_w) cfg.k_w = *k_w;
        if (tnorm) cfg.tnorm = parse_tnorm(*tnorm);
        if (q) cfg.q = *q;
        if (eta_m) cfg.eta_m = *eta_m;
        if (eta_s) cfg.eta_s = *eta_s;
        if (eta_scale) cfg.eta_scale = *eta_scale;
        if (eta_q) cfg.eta_q = *eta_q;
        if (eps_reduce) cfg.eps_reduce = *eps_reduce;
        if (maxiter) cfg.maxiter = *maxiter;
        if (firing_threshold) cfg.firing_threshold = *firing_threshold;
        if (!features.empty()) cfg.features = features;
        if (!train_counts.empty()) cfg.train_counts = train_counts;
        if (qtune_sign_corrected && qtune_sign_printed)
            throw std::invalid_argument("--qtune-sign-corrected and --qtune-sign-printed are exclusive");
        if (qtune_sign_corrected) cfg.qtune_sign_corrected = true;
        if (qtune_sign_printed) cfg.qtune_sign_corrected = false;
        if (rms_spread && printed_spread) throw std::invalid_argument("--rms-spread and --printed-spread are exclusive");
        if (rms_spread) cfg.rms_spread = true;
        if (printed_spread) cfg.rms_spread = false;
        if (sigma_floor) cfg.sigma_floor_fraction = *sigma_floor;
        if (min_support) cfg.min_support = *min_support;
        if (purity) cfg.purity_threshold = *purity;
        if (merge_factor) cfg.merge_distance_factor = *merge_factor;
        if (max_rounds) cfg.max_rounds = *max_rounds;
        if (sofm_epochs) cfg.sofm_epochs = *sofm_epochs;
        if (sofm_alpha) cfg.sofm_alpha0 = *sofm_alpha;
        cfg.validate();
        return cfg;
    }
};

void print_config(const RunConfig& cfg, const std::vector<std::pair<std::string, std::string>>& resolved = {}) {
    std::string line = "config";
    for (const auto& [k, v] : cfg.entries()) line += fmt::format(" {}={}", k, v);
    for (const auto& [k, v] : resolved) line += fmt::format(" {}={}", k, v);
    std::cerr << line << '\n';
}

std::string format_list(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += fmt::format("{}{}", i ? "," : "", v[i]);
    return s;
}

std::vector<std::pair<std::string, std::string>> resolved_tuning(const TuningConfig& t) {
    std::vector<std::pair<std::string, std::string>> out{{"resolved.eta_m", fmt::format("{}", t.eta_m)},
                                                         {"resolved.eta_s", fmt::format("{}", t.eta_s)}};
    if (!t.feature_scale.empty()) out.push_back({"resolved.eta_feature_scale", format_list(t.feature_scale)});
    return out;
}

Dataset load_selected(const fs::path& path, const RunConfig& cfg, bool labeled = true) {
    require_file(path);
    LoadOptions opts;
    opts.labeled = labeled;
    return apply_feature_selection(load_dataset(path, opts), cfg);
}

template <typename F>
void write_text(const fs::path& path, F&& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
    body(out);
    if (!out) throw std::runtime_error(fmt::format("write to {} failed", path.string()));
}

void write_trace_file(const fs::path& path, const TuningTrace& trace) {
    write_text(path, [&](std::ostream& o) { write_trace(trace, o); });
}

RuleBase load_rules(const fs::path& path) {
    require_file(path);
    return load_rulebase(path);
}

void check_width(const RuleBase& rb, const Dataset& d) {
    if (d.p() != rb.p)
        throw std::invalid_argument(fmt::format(
            "dataset has {} features but the rulebase expects {}; pass the --features used for training", d.p(),
            rb.p));
}

// ---- subcommands ----

struct PartitionArgs {
    std::string data, train_out, test_out;
};

int cmd_partition(const PartitionArgs& a, const RunConfig& cfg) {
    print_config(cfg);
    const Dataset d = load_selected(a.data, cfg);
    if (cfg.train_counts.empty()) throw std::invalid_argument("--train-counts is required");
    const auto part = stratified_partition(d, {cfg.train_counts, cfg.seed});
    save_dataset(part.train, a.train_out);
    save_dataset(part.test, a.test_out);
    fmt::print("train {} samples -> {}\ntest {} samples -> {}\n", part.train.size(), a.train_out, part.test.size(),
               a.test_out);
    return 0;
}

struct TrainArgs {
    std::string data, out, prototypes_out;
};

int cmd_train(const TrainArgs& a, const RunConfig& cfg) {
    const Dataset train = load_selected(a.data, cfg);
    const auto refine = resolve_refine(cfg, train);
    const auto schedule = resolve_schedule(cfg, train.c(), train.size());
    print_config(cfg, {{"resolved.min_support", fmt::format("{}", refine.min_support)},
                       {"resolved.sofm_epochs", fmt::format("{}", schedule.epochs)}});
    const auto protos = build_prototypes(train, cfg);
    const RuleBase rb = rules_from_prototypes(protos.prototypes, train, resolve_rulegen(cfg));
    save_rulebase(rb, a.out);
    if (!a.prototypes_out.empty()) {
        write_text(a.prototypes_out, [&](std::ostream& o) {
            o << "index,label,support,purity";
            for (std::size_t k = 0; k < train.p(); ++k) o << ",v" << k;
            o << '\n';
            for (std::size_t i = 0; i < protos.prototypes.size(); ++i) {
                const auto& p = protos.prototypes[i];
                o << fmt::format("{},{},{},{}", i, p.label, p.support, p.purity);
                for (double v : p.center) o << fmt::format(",{}", v);
                o << '\n';
            }
        });
    }
    fmt::print("rules: {}\nrefinement rounds: {}{}\nrulebase -> {}\n", rb.rules.size(), protos.rounds,
               protos.converged ? "" : " (impure prototypes remain)", a.out);
    return 0;
}

struct TuneArgs {
    std::string rules, data, out, trace;
    std::optional<double> initial_q;
};

int cmd_tune(const TuneArgs& a, const RunConfig& cfg, bool exponents) {
    RuleBase rb = load_rules(a.rules);
    const Dataset train = align_labels(load_selected(a.data, cfg), rb);
    check_width(rb, train);
    const TNorm tnorm = exponents ? TNorm::Softmin : cfg.tnorm;
    const auto tcfg = resolve_tuning(cfg, train, tnorm);
    print_config(cfg, resolved_tuning(tcfg));
    if (exponents && a.initial_q)
        for (auto& r : rb.rules) r.q = *a.initial_q;
    const auto result = exponents ? q_tune(rb, train, tcfg) : context_tune(rb, train, tcfg);
    save_rulebase(result.rulebase, a.out);
    if (!a.trace.empty()) write_trace_file(a.trace, result.trace);
    const auto& first = result.trace.records.front();
    const auto accepted = result.trace.accepted();
    const auto& last = accepted.back();
    fmt::print("epochs: {} ({} rolled back)\nE: {:.6f} -> {:.6f}\nmisclassified: {} -> {}\nrulebase -> {}\n",
               result.trace.records.size() - 1, result.trace.records.size() - accepted.size(), first.error,
               last.error, first.misclassified, last.misclassified, a.out);
    return 0;
}

struct EvaluateArgs {
    std::string rules, train, test, confusion, report;
};

int cmd_evaluate(const EvaluateArgs& a, const RunConfig& cfg) {
    print_config(cfg);
    const RuleBase rb = load_rules(a.rules);
    ReportInputs in;
    in.rulebase = &rb;
    in.config = cfg.entries();
    auto score = [&](const std::string& path) {
        Dataset d = load_selected(path, cfg);
        if (!d.labeled()) throw std::invalid_argument("evaluate needs labels; use classify for unlabeled data");
        d = align_labels(d, rb);
        check_width(rb, d);
        return evaluate_rulebase(rb, d);
    };
    if (a.train.empty() && a.test.empty()) throw std::invalid_argument("evaluate needs --train and/or --test data");
    if (!a.train.empty()) in.train = score(a.train);
    if (!a.test.empty()) in.test = score(a.test);
    const std::string report = render_report(in);
    if (a.report.empty())
        std::cout << report;
    else
        write_text(a.report, [&](std::ostream& o) { o << report; });
    if (!a.confusion.empty())
        write_text(a.confusion, [&](std::ostream& o) { write_confusion_csv(in.test ? *in.test : *in.train, o); });
    return 0;
}

struct ClassifyArgs {
    std::string rules, data, out, map_out;
    bool unlabeled = false;
    std::vector<std::size_t> emit_map;
    std::vector<std::string> bands;
    std::string label_plane;
    std::vector<std::size_t> image_size;
    std::string plane_format = "binary";
};

int cmd_classify(const ClassifyArgs& a, const RunConfig& cfg) {
    print_config(cfg);
    const RuleBase rb = load_rules(a.rules);
    Dataset d;
    if (!a.bands.empty()) {
        if (a.image_size.size() != 2) throw std::invalid_argument("band input needs --image-size W H");
        ImagePlanes planes;
        for (const auto& b : a.bands) {
            require_file(b);
            planes.bands.emplace_back(b);
        }
        if (!a.label_plane.empty()) {
            require_file(a.label_plane);
            planes.labels = a.label_plane;
        }
        planes.width = a.image_size[0];
        planes.height = a.image_size[1];
        planes.format = a.plane_format == "text" ? PlaneFormat::Text : PlaneFormat::Binary8;
        d = apply_feature_selection(load_image_dataset(planes), cfg);
    } else {
        if (a.data.empty()) throw std::invalid_argument("classify needs a dataset or --bands");
        d = load_selected(a.data, cfg, !a.unlabeled);
    }
    if (d.labeled()) d = align_labels(d, rb);
    check_width(rb, d);
    const auto results = classify_batch(rb, d);

    std::ostringstream out;
    out << "index,class,raw_label,rule,firing,runner_up\n";
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        if (r.outlier())
            out << fmt::format("{},outlier,-,-,{},{}\n", i, r.winning_firing, r.runner_up_firing);
        else
            out << fmt::format("{},{},{},{},{},{}\n", i, r.predicted,
                               rb.raw_labels.empty() ? fmt::format("{}", r.predicted)
                                                     : fmt::format("{}", rb.raw_labels[r.predicted]),
                               r.rule_id, r.winning_firing, r.runner_up_firing);
    }
    if (a.out.empty())
        std::cout << out.str();
    else
        write_text(a.out, [&](std::ostream& o) { o << out.str(); });

    std::optional<std::pair<std::size_t, std::size_t>> dims;
    if (!a.emit_map.empty()) dims = {{a.emit_map[0], a.emit_map[1]}};
    else if (d.layout() && !a.map_out.empty()) dims = {{d.layout()->width, d.layout()->height}};
    if (dims) {
        const fs::path map_path = a.map_out.empty() ? fs::path("classmap.pgm") : fs::path(a.map_out);
        write_class_map(map_path, results, dims->first, dims->second, rb.c);
        fs::path legend = map_path;
        legend += ".legend.txt";
        write_text(legend, [&](std::ostream& o) { o << class_map_legend(rb); });
        std::cerr << fmt::format("class map -> {} (legend {})\n", map_path.string(), legend.string());
    }
    if (d.labeled()) {
        const auto cm = confusion_matrix(results, d.labels(), rb.c);
        std::cerr << fmt::format("error: {:.2f}% ({} outliers)\n", error_rate(cm), cm.total_outliers());
    }
    return 0;
}

struct InspectArgs {
    std::string target;
    bool grid = false, prototypes = false;
};

int cmd_inspect(const InspectArgs& a, const RunConfig& cfg) {
    print_config(cfg);
    if (a.grid || a.prototypes) {
        const Dataset d = load_selected(a.target, cfg);
        if (a.grid) {
            Rng rng(cfg.seed);
            const auto s = resolve_schedule(cfg, d.c(), d.size());
            auto g = train_sofm(init_sofm(d.c(), d, rng), d, s, rng);
            fmt::print("node");
            for (std::size_t k = 0; k < d.p(); ++k) fmt::print(",w{}", k);
            fmt::print("\n");
            for (std::size_t i = 0; i < g.size(); ++i) {
                fmt::print("{}", i);
                for (double v : g.weights[i]) fmt::print(",{}", v);
                fmt::print("\n");
            }
        } else {
            const auto protos = build_prototypes(d, cfg);
            fmt::print("index,label,support,purity");
            for (std::size_t k = 0; k < d.p(); ++k) fmt::print(",v{}", k);
            fmt::print("\n");
            for (std::size_t i = 0; i < protos.prototypes.size(); ++i) {
                const auto& p = protos.prototypes[i];
                fmt::print("{},{},{},{}", i, p.label, p.support, p.purity);
                for (double v : p.center) fmt::print(",{}", v);
                fmt::print("\n");
            }
        }
        return 0;
    }
    const RuleBase rb = load_rules(a.target);
    ReportInputs in;
    in.rulebase = &rb;
    std::cout << render_report(in);
    return 0;
}

struct BenchArgs {
    std::string dataset = "satimage";
    std::string data;
    std::string out_dir;
    bool skip_qtune = false;
};

int cmd_bench(const BenchArgs& a, const RunConfig& cfg) {
    if (a.dataset != "satimage") throw std::invalid_argument(fmt::format("unknown bench '{}'", a.dataset));
    print_config(cfg);
    require_file(a.data);
    Dataset full = load_dataset(a.data);
    if (full.c() == satimage::kClassNames.size()) full.set_class_names(satimage::kClassNames);
    BenchOptions opts;
    opts.run_qtune = !a.skip_qtune;
    const auto r = run_bench(full, cfg, opts);
    const std::string summary = render_bench(r);
    std::cout << summary;
    if (a.out_dir.empty()) return 0;

    const fs::path dir(a.out_dir);
    fs::create_directories(dir);
    save_rulebase(r.initial, dir / "initial.json");
    save_rulebase(r.product, dir / "product.json");
    save_rulebase(r.softmin, dir / "softmin.json");
    write_trace_file(dir / "product_trace.csv", r.product_trace);
    write_trace_file(dir / "softmin_trace.csv", r.softmin_trace);
    for (const auto& q : r.qtune_runs) {
        const std::string stem = fmt::format("qtune_{}_{}", q.context_tuned ? "tuned" : "untuned", q.initial_q);
        save_rulebase(q.rulebase, dir / (stem + ".json"));
        write_trace_file(dir / (stem + "_trace.csv"), q.trace);
    }
    write_text(dir / "summary.txt", [&](std::ostream& o) { o << summary; });
    for (const auto& [name, rb, cm] : {std::tuple{"product", &r.product, &r.product_test_cm},
                                        std::tuple{"softmin", &r.softmin, &r.softmin_test_cm}}) {
        ReportInputs in;
        in.rulebase = rb;
        in.test = *cm;
        in.config = cfg.entries();
        const std::string report = render_report(in);
        write_text(dir / fmt::format("{}_report.txt", name), [&](std::ostream& o) { o << report; });
        write_text(dir / fmt::format("{}_confusion.csv", name), [&](std::ostream& o) { write_confusion_csv(*cm, o); });
    }
    std::cerr << fmt::format("artifacts -> {}\n", dir.string());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Prototype-based fuzzy rule classifier"};
    app.require_subcommand(1);
    app.fallthrough();

    Overrides ov;

    PartitionArgs pa;
    auto* partition = app.add_subcommand("partition", "Stratified train/test split");
    partition->add_option("data", pa.data, "Labeled dataset")->required();
    partition->add_option("--train-out", pa.train_out, "Training split file")->required();
    partition->add_option("--test-out", pa.test_out, "Test split file")->required();

    TrainArgs ta;
    auto* train = app.add_subcommand("train", "Generate prototypes and the initial rulebase");
    train->add_option("data", ta.data, "Labeled training data")->required();
    train->add_option("-o,--out", ta.out, "Rulebase file")->required();
    train->add_option("--prototypes-out", ta.prototypes_out, "Prototype table (CSV)");

    TuneArgs tu;
    auto* tune = app.add_subcommand("tune", "Context-tune centers and spreads");
    tune->add_option("rules", tu.rules, "Rulebase file")->required();
    tune->add_option("data", tu.data, "Labeled training data")->required();
    tune->add_option("-o,--out", tu.out, "Tuned rulebase file")->required();
    tune->add_option("--trace", tu.trace, "Per-epoch trace (CSV)");

    TuneArgs qa;
    auto* qtune = app.add_subcommand("qtune", "Tune the per-rule softmin exponents");
    qtune->add_option("rules", qa.rules, "Rulebase file")->required();
    qtune->add_option("data", qa.data, "Labeled training data")->required();
    qtune->add_option("-o,--out", qa.out, "Tuned rulebase file")->required();
    qtune->add_option("--trace", qa.trace, "Per-epoch trace (CSV)");
    qtune->add_option("--initial-q", qa.initial_q, "Reset every rule's exponent before tuning");

    EvaluateArgs ea;
    auto* evaluate = app.add_subcommand("evaluate", "Error rates, confusion matrix and report");
    evaluate->add_option("rules", ea.rules, "Rulebase file")->required();
    evaluate->add_option("--train", ea.train, "Labeled training data");
    evaluate->add_option("--test", ea.test, "Labeled test data");
    evaluate->add_option("--confusion", ea.confusion, "Confusion matrix (CSV) of the test data, else training");
    evaluate->add_option("--report", ea.report, "Report file instead of stdout");

    ClassifyArgs ca;
    auto* classify = app.add_subcommand("classify", "Predict classes, optionally as a PGM class map");
    classify->add_option("rules", ca.rules, "Rulebase file")->required();
    classify->add_option("data", ca.data, "Dataset (labels optional with --unlabeled)");
    classify->add_flag("--unlabeled", ca.unlabeled, "Every column is a feature");
    classify->add_option("-o,--out", ca.out, "Predictions (CSV) instead of stdout");
    classify->add_option("--emit-map", ca.emit_map, "Write a W x H class map")->expected(2);
    classify->add_option("--map-out", ca.map_out, "Class map path (default classmap.pgm)");
    classify->add_option("--bands", ca.bands, "Band planes, one per feature")->delimiter(',');
    classify->add_option("--label-plane", ca.label_plane, "Ground-truth plane for band input");
    classify->add_option("--image-size", ca.image_size, "Plane width and height")->expected(2);
    classify->add_option("--plane-format", ca.plane_format, "binary (8-bit) or text")
        ->check(CLI::IsMember({"binary", "text"}));

    InspectArgs ia;
    auto* inspect = app.add_subcommand("inspect", "Dump a rulebase, an SOFM grid or refined prototypes");
    inspect->add_option("target", ia.target, "Rulebase file, or dataset with --grid/--prototypes")->required();
    inspect->add_flag("--grid", ia.grid, "Train the SOFM on the dataset and dump its weights");
    inspect->add_flag("--prototypes", ia.prototypes, "Dump refined prototypes of the dataset");

    BenchArgs ba;
    auto* bench = app.add_subcommand("bench", "End-to-end benchmark recipe");
    bench->add_option("name", ba.dataset, "Recipe name (satimage)")->required();
    bench->add_option("data", ba.data, "Full 36-attribute satimage file")->required();
    bench->add_option("--out-dir", ba.out_dir, "Write rulebases, traces and reports here");
    bench->add_flag("--skip-qtune", ba.skip_qtune, "Only the context-tuning stages");

    for (auto* sub : {partition, train, tune, qtune, evaluate, classify, inspect, bench}) ov.attach(sub);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (bench->parsed()) return cmd_bench(ba, ov.apply(satimage::default_config()));
        const RunConfig cfg = ov.apply(RunConfig{});
        if (partition->parsed()) return cmd_partition(pa, cfg);
        if (train->parsed()) return cmd_train(ta, cfg);
        if (tune->parsed()) return cmd_tune(tu, cfg, false);
        if (qtune->parsed()) return cmd_tune(qa, cfg, true);
        if (evaluate->parsed()) return cmd_evaluate(ea, cfg);
        if (classify->parsed()) return cmd_classify(ca, cfg);
        if (inspect->parsed()) return cmd_inspect(ia, cfg);
    } catch (const MissingFile& e) {
        std::cerr << "fzr: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "fzr: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
