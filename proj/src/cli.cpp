// SPDX-License-Identifier: Apache-2.0

#include "autoprune/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "autoprune/gcot.hpp"
#include "autoprune/model_eval.hpp"
#include "autoprune/pruner.hpp"

namespace autoprune::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct RunConfig {
    std::string bundle;
    std::string calib_corpus;
    std::string eval_corpus;
    double sparsity = 0.5;
    std::optional<double> contrast_cap; // default depends on granularity
    stats::Granularity granularity = stats::Granularity::per_layer;
    sdsa::Allocator allocator = sdsa::Allocator::sdsa;
    std::string metric = "wanda";      // builtin name
    std::string metric_expr;           // DSL text; wins over `metric`
    std::string pattern = "unstructured";
    pruner::MaskGroup group = pruner::MaskGroup::per_row;
    eval::FitnessMode fitness = eval::FitnessMode::reconstruction;
    std::size_t nsamples = 128;
    std::size_t seq_len = 0; // 0 = bundle max
    std::size_t max_windows = 64;
    std::optional<double> lambda;
    std::string out = "out";
    std::uint64_t seed = 0;
    std::vector<double> bench_sparsities = {0.5, 0.6, 0.7};

    // sensitivity
    std::vector<std::string> target_layers; // empty = all prunable layers
    std::vector<double> probe_ratios = {0.0, 0.5};
    double background_ratio = 0.7;

    gcot::SearchConfig search;
    std::string candidates_file;

    double effective_contrast_cap() const {
        if (contrast_cap) return *contrast_cap;
        return granularity == stats::Granularity::per_layer ? sdsa::kDefaultContrastCapLayer
                                                            : sdsa::kDefaultContrastCapBlock;
    }

    json to_json() const;
};

[[noreturn]] void config_error(const std::string& field, const std::string& what) {
    fail(Errc::config_invalid, field + ": " + what);
}

template <typename T>
T get_field(const json& j, const std::string& path, const std::string& field, T fallback) {
    if (!j.contains(field)) return fallback;
    try {
        return j.at(field).get<T>();
    } catch (const json::exception&) {
        config_error(path + "." + field, "has the wrong type");
    }
}

void apply_search_json(const json& j, const std::string& path, gcot::SearchConfig& sc) {
    if (j.contains("branch_factors")) {
        const json& bf = j.at("branch_factors");
        for (std::size_t i = 0; i < gcot::kStageCount; ++i) {
            const char* name = gcot::stage_name(gcot::Stage(i));
            if (bf.contains(name)) {
                sc.stages[i].branch_factor =
                    get_field<std::size_t>(bf, path + ".branch_factors", name, 1);
                // Default temperature spread when none given explicitly.
                if (sc.stages[i].branch_factor != sc.stages[i].temperatures.size()) {
                    sc.stages[i].temperatures.clear();
                    static const double spread[] = {0.3, 0.7, 1.1};
                    for (std::size_t b = 0; b < sc.stages[i].branch_factor; ++b)
                        sc.stages[i].temperatures.push_back(spread[b % 3]);
                }
            }
        }
    }
    if (j.contains("temperatures")) {
        const json& ts = j.at("temperatures");
        for (std::size_t i = 0; i < gcot::kStageCount; ++i) {
            const char* name = gcot::stage_name(gcot::Stage(i));
            if (ts.contains(name))
                sc.stages[i].temperatures =
                    get_field<std::vector<double>>(ts, path + ".temperatures", name, {});
        }
    }
    sc.alpha = get_field<double>(j, path, "alpha", sc.alpha);
    sc.max_repairs = get_field<std::size_t>(j, path, "max_repairs", sc.max_repairs);
    sc.workers = get_field<std::size_t>(j, path, "workers", sc.workers);
    sc.llm_description = get_field<std::string>(j, path, "llm_description", sc.llm_description);
    const std::string gen = get_field<std::string>(j, path, "generator", "");
    if (!gen.empty()) {
        if (gen == "fixture")
            sc.generator = gcot::GeneratorKind::fixture;
        else if (gen == "llm_endpoint")
            sc.generator = gcot::GeneratorKind::llm_endpoint;
        else
            config_error(path + ".generator", "must be 'fixture' or 'llm_endpoint'");
    }
    if (j.contains("llm")) {
        const json& l = j.at("llm");
        sc.llm.base_url = get_field<std::string>(l, path + ".llm", "base_url", sc.llm.base_url);
        sc.llm.model = get_field<std::string>(l, path + ".llm", "model", sc.llm.model);
        sc.llm.api_key_env =
            get_field<std::string>(l, path + ".llm", "api_key_env", sc.llm.api_key_env);
        sc.llm.timeout_seconds =
            get_field<int>(l, path + ".llm", "timeout_seconds", sc.llm.timeout_seconds);
        sc.llm.max_retries =
            get_field<std::size_t>(l, path + ".llm", "max_retries", sc.llm.max_retries);
        sc.llm.backoff_ms = get_field<int>(l, path + ".llm", "backoff_ms", sc.llm.backoff_ms);
    }
}

RunConfig config_from_json(const json& j) {
    RunConfig c;
    c.bundle = get_field<std::string>(j, "config", "bundle", c.bundle);
    c.calib_corpus = get_field<std::string>(j, "config", "calib_corpus", c.calib_corpus);
    c.eval_corpus = get_field<std::string>(j, "config", "eval_corpus", c.eval_corpus);
    c.sparsity = get_field<double>(j, "config", "sparsity", c.sparsity);
    if (j.contains("contrast_cap")) c.contrast_cap = get_field<double>(j, "config", "contrast_cap", 1.8);
    if (j.contains("granularity")) {
        const auto g = get_field<std::string>(j, "config", "granularity", "layer");
        if (g == "layer")
            c.granularity = stats::Granularity::per_layer;
        else if (g == "block")
            c.granularity = stats::Granularity::per_block;
        else
            config_error("config.granularity", "must be 'layer' or 'block'");
    }
    if (j.contains("allocator"))
        c.allocator = sdsa::allocator_from_name(get_field<std::string>(j, "config", "allocator", "sdsa"));
    c.metric = get_field<std::string>(j, "config", "metric", c.metric);
    c.metric_expr = get_field<std::string>(j, "config", "metric_expr", c.metric_expr);
    c.pattern = get_field<std::string>(j, "config", "pattern", c.pattern);
    if (j.contains("group")) {
        const auto g = get_field<std::string>(j, "config", "group", "row");
        if (g == "row")
            c.group = pruner::MaskGroup::per_row;
        else if (g == "layer")
            c.group = pruner::MaskGroup::per_layer;
        else
            config_error("config.group", "must be 'row' or 'layer'");
    }
    if (j.contains("fitness"))
        c.fitness = eval::fitness_mode_from_name(get_field<std::string>(j, "config", "fitness", "recon"));
    c.nsamples = get_field<std::size_t>(j, "config", "nsamples", c.nsamples);
    c.seq_len = get_field<std::size_t>(j, "config", "seq_len", c.seq_len);
    c.max_windows = get_field<std::size_t>(j, "config", "max_windows", c.max_windows);
    if (j.contains("lambda")) c.lambda = get_field<double>(j, "config", "lambda", 0.0);
    c.out = get_field<std::string>(j, "config", "out", c.out);
    c.seed = get_field<std::uint64_t>(j, "config", "seed", c.seed);
    c.bench_sparsities =
        get_field<std::vector<double>>(j, "config", "bench_sparsities", c.bench_sparsities);
    c.target_layers =
        get_field<std::vector<std::string>>(j, "config", "target_layers", c.target_layers);
    c.probe_ratios = get_field<std::vector<double>>(j, "config", "probe_ratios", c.probe_ratios);
    c.background_ratio = get_field<double>(j, "config", "background_ratio", c.background_ratio);
    c.candidates_file = get_field<std::string>(j, "config", "candidates_file", c.candidates_file);
    if (j.contains("search")) apply_search_json(j.at("search"), "config.search", c.search);
    return c;
}

json RunConfig::to_json() const {
    json sj;
    json bf, ts;
    for (std::size_t i = 0; i < gcot::kStageCount; ++i) {
        bf[gcot::stage_name(gcot::Stage(i))] = search.stages[i].branch_factor;
        ts[gcot::stage_name(gcot::Stage(i))] = search.stages[i].temperatures;
    }
    sj["branch_factors"] = bf;
    sj["temperatures"] = ts;
    sj["alpha"] = search.alpha;
    sj["max_repairs"] = search.max_repairs;
    sj["workers"] = search.workers;
    sj["generator"] =
        search.generator == gcot::GeneratorKind::fixture ? "fixture" : "llm_endpoint";
    sj["llm"] = {{"base_url", search.llm.base_url},
                 {"model", search.llm.model},
                 {"api_key_env", search.llm.api_key_env},
                 {"timeout_seconds", search.llm.timeout_seconds},
                 {"max_retries", search.llm.max_retries},
                 {"backoff_ms", search.llm.backoff_ms}};

    json j = {
        {"bundle", bundle},
        {"calib_corpus", calib_corpus},
        {"eval_corpus", eval_corpus},
        {"sparsity", sparsity},
        {"contrast_cap", effective_contrast_cap()},
        {"granularity", granularity == stats::Granularity::per_layer ? "layer" : "block"},
        {"allocator", sdsa::allocator_name(allocator)},
        {"metric", metric},
        {"metric_expr", metric_expr},
        {"pattern", pattern},
        {"group", group == pruner::MaskGroup::per_row ? "row" : "layer"},
        {"fitness", eval::fitness_mode_name(fitness)},
        {"nsamples", nsamples},
        {"seq_len", seq_len},
        {"max_windows", max_windows},
        {"out", out},
        {"seed", seed},
        {"bench_sparsities", bench_sparsities},
        {"target_layers", target_layers},
        {"probe_ratios", probe_ratios},
        {"background_ratio", background_ratio},
        {"candidates_file", candidates_file},
        {"search", sj},
    };
    if (lambda) j["lambda"] = *lambda;
    return j;
}

void validate_config(const RunConfig& c, bool needs_bundle) {
    if (needs_bundle) {
        if (c.bundle.empty()) config_error("config.bundle", "is required");
        if (!fs::exists(c.bundle)) config_error("config.bundle", "path does not exist");
    }
    if (!(c.sparsity >= 0.0 && c.sparsity < 1.0))
        config_error("config.sparsity", "must lie in [0,1)");
    if (c.contrast_cap && *c.contrast_cap <= 1.0)
        config_error("config.contrast_cap", "must exceed 1");
    if (!c.calib_corpus.empty() && !fs::exists(c.calib_corpus))
        config_error("config.calib_corpus", "path does not exist");
    if (!c.eval_corpus.empty() && !fs::exists(c.eval_corpus))
        config_error("config.eval_corpus", "path does not exist");
    for (double s : c.bench_sparsities)
        if (!(s >= 0.0 && s < 1.0)) config_error("config.bench_sparsities", "entries must lie in [0,1)");
}

pruner::Pattern parse_pattern(const std::string& text, pruner::MaskGroup group) {
    if (text == "unstructured") return pruner::UnstructuredPattern{group};
    const std::size_t colon = text.find(':');
    if (colon != std::string::npos) {
        try {
            const std::size_t n = std::stoul(text.substr(0, colon));
            const std::size_t m = std::stoul(text.substr(colon + 1));
            return pruner::NmPattern{n, m};
        } catch (const std::exception&) {
        }
    }
    config_error("config.pattern", "must be 'unstructured' or 'N:M'");
}

dsl::ExprPtr resolve_metric(const RunConfig& c) {
    if (!c.metric_expr.empty()) return dsl::parse_metric(c.metric_expr);
    if (dsl::is_builtin_name(c.metric)) return dsl::builtin(dsl::builtin_from_name(c.metric));
    // Allow DSL text in the name slot for convenience.
    return dsl::parse_metric(c.metric);
}

struct LoadedInputs {
    ModelBundle bundle;
    std::optional<TokenCorpus> calib;
    std::optional<TokenCorpus> eval_corpus;
    stats::ActivationStats activation_stats;
};

LoadedInputs load_inputs(const RunConfig& c, const dsl::ExprPtr& metric, bool want_raw,
                         bool want_hess) {
    LoadedInputs in;
    in.bundle = load_bundle(c.bundle);
    const bool needs_stats = want_raw || (metric && dsl::uses_activations(metric)) || want_hess;
    if (needs_stats) {
        if (c.calib_corpus.empty())
            config_error("config.calib_corpus", "is required for this command/metric");
        in.calib = load_corpus(c.calib_corpus);
        eval::CalibrationOptions opts;
        opts.n_samples = c.nsamples;
        opts.seq_len = c.seq_len;
        opts.stats.keep_raw = want_raw;
        opts.stats.with_hess_diag =
            want_hess || (metric && dsl::uses_terminal(metric, dsl::Terminal::hess_diag_x));
        opts.stats.lambda = c.lambda;
        in.activation_stats = eval::capture_calibration(in.bundle, *in.calib, opts);
    }
    if (!c.eval_corpus.empty()) in.eval_corpus = load_corpus(c.eval_corpus);
    return in;
}

std::vector<std::string> plan_unit_names(const ModelBundle& bundle, stats::Granularity g) {
    std::vector<std::string> names;
    if (g == stats::Granularity::per_layer) {
        for (const LayerRecord& rec : bundle.layers) names.push_back(rec.name);
    } else {
        for (std::size_t b = 0; b < bundle.topology.n_blocks; ++b)
            names.push_back(ModelBundle::block_name(b));
    }
    return names;
}

std::vector<std::size_t> plan_unit_sizes(const ModelBundle& bundle, stats::Granularity g) {
    std::vector<std::size_t> sizes;
    if (g == stats::Granularity::per_layer) {
        for (const LayerRecord& rec : bundle.layers) sizes.push_back(rec.weight.size());
    } else {
        for (std::size_t b = 0; b < bundle.topology.n_blocks; ++b) {
            std::size_t total = 0;
            for (int k = 0; k < kLayerKindsPerBlock; ++k)
                total += bundle.layer(b, LayerKind(k)).weight.size();
            sizes.push_back(total);
        }
    }
    return sizes;
}

sdsa::SparsityPlan make_plan(const ModelBundle& bundle, sdsa::Allocator allocator, double sparsity,
                             stats::Granularity g, double contrast_cap) {
    const auto names = plan_unit_names(bundle, g);
    const auto sizes = plan_unit_sizes(bundle, g);
    switch (allocator) {
        case sdsa::Allocator::uniform: {
            auto plan = sdsa::uniform_plan(names, sizes, sparsity);
            plan.granularity = g;
            return plan;
        }
        case sdsa::Allocator::global_threshold: {
            auto plan = sdsa::global_threshold_plan(names, sizes, sparsity);
            plan.granularity = g;
            return plan;
        }
        case sdsa::Allocator::sdsa: {
            const auto report = stats::skewness_report(bundle, g);
            return sdsa::allocate(report, sizes, sparsity, contrast_cap);
        }
    }
    fail(Errc::invalid_argument, "unknown allocator");
}

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream out(path);
    if (!out) fail(Errc::io_failure, "cannot write " + path.string());
    out << text;
    if (!out.flush()) fail(Errc::io_failure, "failed writing " + path.string());
}

void write_report(const fs::path& path, const RunConfig& c, const json& result) {
    json wrapped = {{"config", c.to_json()}, {"result", result}};
    write_text(path, wrapped.dump(2) + "\n");
}

// ----------------------------------------------------------- subcommands

int cmd_analyze(const RunConfig& c) {
    validate_config(c, true);
    const ModelBundle bundle = load_bundle(c.bundle);
    const auto report = stats::skewness_report(bundle, c.granularity);
    write_text(fs::path(c.out) / "skewness.csv", report.to_csv());
    write_report(fs::path(c.out) / "skewness.json", c, json::parse(report.to_json()));
    std::cout << "wrote " << (fs::path(c.out) / "skewness.csv").string() << " ("
              << report.per_layer.size() << " rows)\n";
    return 0;
}

int cmd_allocate(const RunConfig& c) {
    validate_config(c, true);
    const ModelBundle bundle = load_bundle(c.bundle);
    const auto plan =
        make_plan(bundle, c.allocator, c.sparsity, c.granularity, c.effective_contrast_cap());
    write_text(fs::path(c.out) / "plan.csv", plan.to_csv());
    write_report(fs::path(c.out) / "plan.json", c, json::parse(plan.to_json()));
    std::cout << "wrote " << (fs::path(c.out) / "plan.json").string() << " (allocator "
              << sdsa::allocator_name(plan.allocator) << ", S_g " << plan.global_sparsity << ")\n";
    return 0;
}

int cmd_prune(const RunConfig& c) {
    validate_config(c, true);
    const dsl::ExprPtr metric = resolve_metric(c);
    LoadedInputs in = load_inputs(c, metric, false, false);
    const auto plan = make_plan(in.bundle, c.allocator, c.sparsity, c.granularity,
                                c.effective_contrast_cap());
    const auto pattern = parse_pattern(c.pattern, c.group);
    auto [pruned, report] = pruner::prune_model(in.bundle, plan, metric, in.activation_stats, pattern);
    save_bundle(pruned, fs::path(c.out) / "pruned_bundle");
    write_report(fs::path(c.out) / "prune_report.json", c, json::parse(report.to_json()));
    std::cout << "wrote " << (fs::path(c.out) / "pruned_bundle").string()
              << " (achieved sparsity " << report.achieved_sparsity << ")\n";
    return 0;
}

eval::FitnessOptions fitness_options(const RunConfig& c, const LoadedInputs& in) {
    eval::FitnessOptions opts;
    opts.mode = c.fitness;
    opts.pattern = parse_pattern(c.pattern, c.group);
    opts.seq_len = c.seq_len;
    opts.max_windows = c.max_windows;
    if (c.fitness == eval::FitnessMode::perplexity) {
        if (!in.eval_corpus) config_error("config.eval_corpus", "is required for ppl fitness");
        opts.eval_corpus = &*in.eval_corpus;
    }
    return opts;
}

int cmd_eval(const RunConfig& c) {
    validate_config(c, true);
    const dsl::ExprPtr metric = resolve_metric(c);
    const bool recon = c.fitness == eval::FitnessMode::reconstruction;
    LoadedInputs in = load_inputs(c, metric, recon, false);
    const auto plan = make_plan(in.bundle, c.allocator, c.sparsity, c.granularity,
                                c.effective_contrast_cap());
    const auto result = eval::fitness(in.bundle, plan, metric, in.activation_stats,
                                      fitness_options(c, in));
    write_report(fs::path(c.out) / "fitness.json", c, json::parse(result.to_json()));
    std::cout << "fitness (" << eval::fitness_mode_name(result.mode) << ") = " << result.value
              << "\n";
    return 0;
}

int cmd_sensitivity(const RunConfig& c) {
    validate_config(c, true);
    const dsl::ExprPtr metric = resolve_metric(c);
    const bool recon = c.fitness == eval::FitnessMode::reconstruction;
    LoadedInputs in = load_inputs(c, metric, recon, false);
    std::vector<std::string> targets = c.target_layers;
    if (targets.empty())
        for (const LayerRecord& rec : in.bundle.layers) targets.push_back(rec.name);
    const auto table =
        eval::sensitivity_sweep(in.bundle, in.activation_stats, metric, targets, c.probe_ratios,
                                c.background_ratio, fitness_options(c, in));
    write_text(fs::path(c.out) / "sensitivity.csv", table.to_csv());
    write_report(fs::path(c.out) / "sensitivity.json", c, json::parse(table.to_json()));
    std::cout << "wrote " << (fs::path(c.out) / "sensitivity.csv").string() << " ("
              << table.rows.size() << " rows)\n";
    return 0;
}

int cmd_search(const RunConfig& c) {
    validate_config(c, true);
    gcot::SearchConfig sc = c.search;
    sc.alpha = c.sparsity > 0.0 && c.sparsity < 1.0 ? c.sparsity : sc.alpha;
    sc.contrast_cap = c.effective_contrast_cap();
    sc.fitness_mode = c.fitness;
    sc.seed = c.seed;
    sc.validate();

    LoadedInputs in = load_inputs(c, nullptr, true, true);
    gcot::SearchInputs inputs;
    inputs.bundle = &in.bundle;
    inputs.calibration = &in.activation_stats;
    if (in.eval_corpus) inputs.eval_corpus = &*in.eval_corpus;

    auto generator = gcot::make_generator(sc, c.candidates_file);
    const fs::path graph_path = fs::path(c.out) / "graph.json";
    fs::create_directories(c.out);
    const auto graph = gcot::run_search(inputs, sc, *generator, graph_path);

    const std::size_t best = *graph.best;
    std::string best_expr;
    for (const auto& cand : graph.candidates)
        if (cand.leaf == best) best_expr = cand.expression;
    write_text(fs::path(c.out) / "best_metric.txt", best_expr + "\n");
    std::cout << "best candidate: leaf " << best << " -> " << best_expr << "\n";
    return 0;
}

int cmd_bench(const RunConfig& c) {
    validate_config(c, true);
    std::vector<std::pair<std::string, dsl::ExprPtr>> metrics = {
        {"magnitude", dsl::builtin(dsl::Builtin::magnitude)},
        {"wanda", dsl::builtin(dsl::Builtin::wanda)},
        {"autoprune", dsl::builtin(dsl::Builtin::autoprune)},
    };
    if (!c.metric_expr.empty()) {
        auto expr = dsl::parse_metric(c.metric_expr);
        metrics.emplace_back(dsl::pretty_print(expr), expr);
    }

    const bool recon = c.fitness == eval::FitnessMode::reconstruction;
    LoadedInputs in = load_inputs(c, metrics[1].second, recon, false);
    const auto opts = fitness_options(c, in);

    const sdsa::Allocator allocators[] = {sdsa::Allocator::uniform, sdsa::Allocator::sdsa,
                                          sdsa::Allocator::global_threshold};
    std::ostringstream csv;
    csv << "sparsity,allocator,metric,fitness\n";
    auto rows = json::array();
    for (double s : c.bench_sparsities) {
        for (sdsa::Allocator alloc : allocators) {
            const auto plan =
                make_plan(in.bundle, alloc, s, c.granularity, c.effective_contrast_cap());
            for (const auto& [name, metric] : metrics) {
                const auto result =
                    eval::fitness(in.bundle, plan, metric, in.activation_stats, opts);
                char num[64];
                std::snprintf(num, sizeof(num), "%.17g", result.value);
                csv << s << "," << sdsa::allocator_name(alloc) << "," << name << "," << num
                    << "\n";
                rows.push_back({{"sparsity", s},
                                {"allocator", sdsa::allocator_name(alloc)},
                                {"metric", name},
                                {"fitness", result.value}});
            }
        }
    }
    write_text(fs::path(c.out) / "bench.csv", csv.str());
    write_report(fs::path(c.out) / "bench.json", c, rows);
    std::cout << "wrote " << (fs::path(c.out) / "bench.csv").string() << " (" << rows.size()
              << " rows)\n";
    return 0;
}

} // namespace

int run_command(const std::vector<std::string>& args) {
    CLI::App app{"Skew-aware pruning toolkit for tiny transformer weight bundles"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::string> bundle, calib, eval_corpus, metric, metric_expr, allocator, pattern,
        group, fitness_name, out, granularity;
    std::optional<double> sparsity, contrast_cap;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> nsamples;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file");
        sub->add_option("--bundle", bundle, "bundle directory");
        sub->add_option("--calib", calib, "calibration token corpus");
        sub->add_option("--eval-corpus", eval_corpus, "evaluation token corpus");
        sub->add_option("--sparsity", sparsity, "global sparsity S_g");
        sub->add_option("--metric", metric, "builtin metric name");
        sub->add_option("--metric-expr", metric_expr, "metric DSL expression");
        sub->add_option("--allocator", allocator, "uniform | sdsa | global");
        sub->add_option("--pattern", pattern, "unstructured | 2:4 | 4:8");
        sub->add_option("--group", group, "row | layer");
        sub->add_option("--fitness", fitness_name, "recon | ppl");
        sub->add_option("--out", out, "output directory");
        sub->add_option("--seed", seed, "deterministic seed");
        sub->add_option("--granularity", granularity, "layer | block");
        sub->add_option("--contrast-cap", contrast_cap, "contrast cap M");
        sub->add_option("--nsamples", nsamples, "calibration samples");
    };

    const char* names[] = {"analyze", "allocate", "prune", "eval", "sensitivity", "search", "bench"};
    const char* descriptions[] = {
        "skewness report for a bundle",
        "per-layer sparsity plan",
        "mask a bundle and write the pruned copy",
        "fitness of a pruned bundle",
        "layer sensitivity grid",
        "reasoning-graph metric search",
        "allocator x metric x sparsity comparison table",
    };
    for (std::size_t i = 0; i < 7; ++i) add_common(app.add_subcommand(names[i], descriptions[i]));

    try {
        app.parse(std::vector<std::string>(args.rbegin(), args.rend()));
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        RunConfig cfg;
        if (!config_path.empty()) {
            std::ifstream f(config_path);
            if (!f) config_error("config", "cannot open " + config_path);
            json j;
            try {
                j = json::parse(f);
            } catch (const json::exception& e) {
                config_error("config", std::string("invalid JSON: ") + e.what());
            }
            cfg = config_from_json(j);
        }
        // Flags win over the config file.
        if (bundle) cfg.bundle = *bundle;
        if (calib) cfg.calib_corpus = *calib;
        if (eval_corpus) cfg.eval_corpus = *eval_corpus;
        if (sparsity) cfg.sparsity = *sparsity;
        if (metric) cfg.metric = *metric;
        if (metric_expr) cfg.metric_expr = *metric_expr;
        if (allocator) cfg.allocator = sdsa::allocator_from_name(*allocator);
        if (pattern) cfg.pattern = *pattern;
        if (group) {
            if (*group == "row")
                cfg.group = pruner::MaskGroup::per_row;
            else if (*group == "layer")
                cfg.group = pruner::MaskGroup::per_layer;
            else
                config_error("--group", "must be 'row' or 'layer'");
        }
        if (fitness_name) cfg.fitness = eval::fitness_mode_from_name(*fitness_name);
        if (out) cfg.out = *out;
        if (seed) cfg.seed = *seed;
        if (granularity) {
            if (*granularity == "layer")
                cfg.granularity = stats::Granularity::per_layer;
            else if (*granularity == "block")
                cfg.granularity = stats::Granularity::per_block;
            else
                config_error("--granularity", "must be 'layer' or 'block'");
        }
        if (contrast_cap) cfg.contrast_cap = *contrast_cap;
        if (nsamples) cfg.nsamples = *nsamples;

        const std::string sub = app.get_subcommands().front()->get_name();
        if (sub == "analyze") return cmd_analyze(cfg);
        if (sub == "allocate") return cmd_allocate(cfg);
        if (sub == "prune") return cmd_prune(cfg);
        if (sub == "eval") return cmd_eval(cfg);
        if (sub == "sensitivity") return cmd_sensitivity(cfg);
        if (sub == "search") return cmd_search(cfg);
        if (sub == "bench") return cmd_bench(cfg);
        std::cerr << "error: unknown subcommand " << sub << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.code() == Errc::config_invalid ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace autoprune::cli
