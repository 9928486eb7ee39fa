// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Runs without network access.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "autoprune/gcot.hpp"
#include "autoprune/model_eval.hpp"
#include "autoprune/pruner.hpp"
#include "testutil.hpp"

using namespace autoprune;
using Clock = std::chrono::steady_clock;

namespace {

struct CheckFailure {
    std::string what;
};

void require(bool ok, const std::string& what) {
    if (!ok) throw CheckFailure{what};
}

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

int g_failures = 0;

void criterion(int number, const std::string& name, const std::function<void()>& body) {
    const auto t0 = Clock::now();
    try {
        body();
        std::printf("[PASS] criterion %2d: %s (%.2fs)\n", number, name.c_str(),
                    seconds_since(t0));
    } catch (const CheckFailure& f) {
        ++g_failures;
        std::printf("[FAIL] criterion %2d: %s -- %s\n", number, name.c_str(), f.what.c_str());
    } catch (const std::exception& e) {
        ++g_failures;
        std::printf("[FAIL] criterion %2d: %s -- unexpected error: %s\n", number, name.c_str(),
                    e.what());
    }
    std::fflush(stdout);
}

// --------------------------------------------------------------- helpers

double skewness_oracle_three_pass(const std::vector<double>& values) {
    const double n = double(values.size());
    double mean = 0.0;
    for (double v : values) mean += std::abs(v);
    mean /= n;
    double m2 = 0.0;
    for (double v : values) m2 += (std::abs(v) - mean) * (std::abs(v) - mean);
    m2 /= n;
    if (m2 < 1e-24) return 0.0;
    const double sd = std::sqrt(m2);
    double acc = 0.0;
    for (double v : values) {
        const double z = (std::abs(v) - mean) / sd;
        acc += z * z * z;
    }
    return acc / n;
}

std::vector<std::string> names_of(const ModelBundle& b) {
    std::vector<std::string> out;
    for (const auto& rec : b.layers) out.push_back(rec.name);
    return out;
}

std::vector<std::size_t> sizes_of(const ModelBundle& b) {
    std::vector<std::size_t> out;
    for (const auto& rec : b.layers) out.push_back(rec.weight.size());
    return out;
}

stats::SkewnessReport report_from_tilde(const std::vector<double>& gt) {
    stats::SkewnessReport r;
    for (std::size_t i = 0; i < gt.size(); ++i)
        r.per_layer.push_back({"layer" + std::to_string(i), gt[i], gt[i]});
    r.delta_gamma_tilde =
        *std::max_element(gt.begin(), gt.end()) - *std::min_element(gt.begin(), gt.end());
    return r;
}

// ------------------------------------------------------------- criteria

void criterion1_skewness_oracle() {
    const auto t0 = Clock::now();
    testutil::Rng rng(101);
    for (int iter = 0; iter < 1000; ++iter) {
        const double log_len = rng.uniform(std::log(10.0), std::log(1e5));
        const std::size_t len = std::size_t(std::exp(log_len));
        std::vector<double> values(len);
        const bool lognorm = iter % 2 == 0;
        const double sigma = 0.5 + rng.uniform() * 1.5;
        for (double& v : values) v = lognorm ? rng.lognormal(0.0, sigma) : rng.normal();
        const double got = stats::magnitude_skewness(values);
        const double want = skewness_oracle_three_pass(values);
        require(std::abs(got - want) <= 1e-9,
                "skewness deviates from the three-pass oracle by " +
                    std::to_string(std::abs(got - want)));
    }
    require(seconds_since(t0) < 10.0, "runtime exceeded 10 s");
}

void criterion2_softmax_algebra() {
    testutil::Rng rng(202);
    for (int iter = 0; iter < 500; ++iter) {
        const std::size_t layers = 2 + rng.below(11);
        std::vector<double> gt(layers);
        for (double& v : gt) v = rng.uniform(-1.0, 1.0);
        const double sg = rng.uniform();
        const double cap = 1.0 + rng.uniform() * 2.0; // M in (1, 3]
        const double range =
            *std::max_element(gt.begin(), gt.end()) - *std::min_element(gt.begin(), gt.end());

        const double beta = sdsa::beta_schedule(sg, cap, range);
        const auto omega = sdsa::protection_weights(gt, beta);

        double sum = 0.0, lo = 1.0, hi = 0.0;
        for (double w : omega) {
            sum += w;
            lo = std::min(lo, w);
            hi = std::max(hi, w);
        }
        require(std::abs(sum - 1.0) <= 1e-12, "softmax sum off by " + std::to_string(sum - 1.0));
        require(hi / lo <= cap + 1e-9, "contrast bound exceeded: " + std::to_string(hi / lo) +
                                           " > M = " + std::to_string(cap));

        // beta(0) gives exactly uniform protection.
        const auto uniform = sdsa::protection_weights(gt, sdsa::beta_schedule(0.0, cap, range));
        for (double w : uniform)
            require(w == 1.0 / double(layers), "beta(0) protection is not exactly uniform");

        if (beta > 0.0) {
            for (std::size_t a = 0; a < layers; ++a)
                for (std::size_t b = 0; b < layers; ++b)
                    if (gt[a] > gt[b])
                        require(omega[a] > omega[b], "monotonicity violated for beta > 0");
        }
    }
}

void criterion3_budget_exactness() {
    testutil::Rng rng(303);
    std::size_t clipped_cases = 0;
    for (int iter = 0; iter < 200; ++iter) {
        const std::size_t layers = 2 + rng.below(14);
        std::vector<double> gt(layers);
        std::vector<std::size_t> sizes(layers);
        for (std::size_t i = 0; i < layers; ++i) {
            gt[i] = rng.uniform(-1.0, 1.0);
            sizes[i] = 16 + rng.below(8192);
        }
        double sg, cap;
        if (iter % 2 == 0) {
            sg = rng.uniform(0.0, 0.95);
            cap = 1.0 + rng.uniform(0.05, 4.0);
        } else {
            // Clip-forcing half: strong contrast, low sparsity, one small
            // highly protected layer among large unprotected ones.
            sg = rng.uniform(0.02, 0.2);
            cap = rng.uniform(8.0, 40.0);
            gt[0] = 1.0;
            sizes[0] = 16;
            for (std::size_t i = 1; i < layers; ++i) gt[i] = rng.uniform(-1.0, -0.7);
        }
        const auto plan = sdsa::allocate(report_from_tilde(gt), sizes, sg, cap);
        double total = 0.0, pruned = 0.0;
        for (const auto& e : plan.entries) {
            require(e.keep_ratio >= 0.0 && e.keep_ratio <= 1.0, "keep ratio out of [0,1]");
            total += double(e.weight_count);
            pruned += double(e.weight_count) * e.sparsity;
            if (sg > 0.0 && e.keep_ratio == 1.0) ++clipped_cases;
        }
        require(std::abs(pruned / total - sg) <= 1e-9,
                "budget drift " + std::to_string(pruned / total - sg));
    }
    require(clipped_cases > 0, "no configuration exercised clipping");

    // Hand case: 3 equal layers, gamma_tilde {-1,0,1}, S_g 0.6, M 1.8,
    // checked against the independent closed-form evaluation
    //   beta = S_g ln(M) / (range + eps); omega = softmax(beta * gt);
    //   k = (1 - S_g) * omega / mean(omega).
    const double beta = 0.6 * std::log(1.8) / (2.0 + 1e-8);
    const double e[3] = {std::exp(-beta), 1.0, std::exp(beta)};
    const double sum = e[0] + e[1] + e[2];
    const auto plan = sdsa::allocate(report_from_tilde({-1.0, 0.0, 1.0}), {4096, 4096, 4096},
                                     0.6, 1.8);
    for (int i = 0; i < 3; ++i) {
        const double expect = 0.4 * 3.0 * e[i] / sum;
        require(std::abs(plan.entries[i].keep_ratio - expect) <= 1e-5,
                "hand-case keep ratio " + std::to_string(plan.entries[i].keep_ratio) +
                    " differs from the closed-form oracle " + std::to_string(expect));
    }
    double mean_s = 0.0;
    for (const auto& entry : plan.entries) mean_s += entry.sparsity / 3.0;
    require(std::abs(mean_s - 0.6) <= 1e-12, "hand-case mean sparsity is not exactly 0.6");
}

void criterion4_metric_correctness() {
    testutil::Rng rng(404);
    for (int iter = 0; iter < 100; ++iter) {
        const std::size_t rows = 1 + rng.below(64);
        const std::size_t cols = 1 + rng.below(64);
        const Matrix w = testutil::random_matrix(rng, rows, cols, 1.5);
        const Matrix x = testutil::random_matrix(rng, 4 + rng.below(48), cols, 1.2);
        stats::ActivationStatsOptions opts;
        opts.with_hess_diag = true;
        const auto st = stats::compute_layer_stats(x, opts);

        std::vector<double> rowl1(rows, 0.0);
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j) rowl1[i] += std::abs(w(i, j));

        for (dsl::Builtin b : {dsl::Builtin::magnitude, dsl::Builtin::wanda,
                               dsl::Builtin::autoprune, dsl::Builtin::sparsegpt_score}) {
            const Matrix got = dsl::eval_metric(dsl::builtin(b), w, st);
            for (std::size_t i = 0; i < rows; ++i) {
                for (std::size_t j = 0; j < cols; ++j) {
                    // Explicit double-loop oracle (shares the division guard
                    // semantics: max(|d|,1e-12) with the sign kept).
                    double want = 0.0;
                    const double aw = std::abs(w(i, j));
                    switch (b) {
                        case dsl::Builtin::magnitude: want = aw; break;
                        case dsl::Builtin::wanda: want = aw * st.col_l2[j]; break;
                        case dsl::Builtin::autoprune:
                            want = aw / std::max(rowl1[i], 1e-12) *
                                   std::sqrt(st.col_l1[j] + st.col_l2sq[j]);
                            break;
                        case dsl::Builtin::sparsegpt_score: {
                            const double d = (*st.hess_diag)[j];
                            want = aw / (std::max(std::abs(d), 1e-12) * (d < 0.0 ? -1.0 : 1.0));
                            break;
                        }
                    }
                    require(std::abs(got(i, j) - want) <= 1e-12,
                            "builtin score deviates from the double-loop oracle");
                }
            }
        }
    }

    // Hand example from the published score table.
    const Matrix w(2, 2, {1.0, 1.0, 0.0, 2.0});
    stats::LayerActivationStats st;
    st.col_l1 = {3.0, 4.0};
    st.col_l2sq = {5.0, 8.0};
    st.col_l2 = {std::sqrt(5.0), std::sqrt(8.0)};
    const Matrix s = dsl::eval_metric(dsl::builtin(dsl::Builtin::autoprune), w, st);
    const double want[4] = {1.41421, 1.73205, 0.0, 3.46410};
    for (std::size_t i = 0; i < 4; ++i)
        require(std::abs(s.values()[i] - want[i]) <= 1e-5,
                "autoprune hand example deviates at entry " + std::to_string(i));
}

void criterion5_mask_validity() {
    testutil::Rng rng(505);
    for (int iter = 0; iter < 1000; ++iter) {
        const int mode = iter % 3;
        if (mode == 0) {
            const std::size_t rows = 1 + rng.below(16), cols = 1 + rng.below(64);
            Matrix s(rows, cols);
            for (std::size_t i = 0; i < s.size(); ++i)
                s.data()[i] = double(rng.below(12)); // coarse grid forces ties
            const double keep = rng.uniform();
            const auto k = std::min(std::size_t(std::ceil(keep * double(cols))), cols);
            const Matrix m = pruner::unstructured_mask(s, keep);
            for (std::size_t r = 0; r < rows; ++r) {
                std::size_t count = 0;
                for (std::size_t c = 0; c < cols; ++c) count += m(r, c) != 0.0 ? 1 : 0;
                require(count == k, "per-row kept count is not exact");
            }
        } else {
            const std::size_t group = mode == 1 ? 4 : 8;
            const std::size_t keep_n = mode == 1 ? 2 : 4;
            const std::size_t rows = 1 + rng.below(12);
            const std::size_t cols = group * (1 + rng.below(10));
            Matrix s(rows, cols);
            for (std::size_t i = 0; i < s.size(); ++i) s.data()[i] = double(rng.below(9));
            const Matrix m = pruner::nm_mask(s, keep_n, group);
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t g = 0; g < cols; g += group) {
                    std::size_t count = 0;
                    for (std::size_t c = 0; c < group; ++c) count += m(r, g + c) != 0.0 ? 1 : 0;
                    require(count == keep_n, "N:M group count is not exact");
                }
        }
    }

    // Tie-break determinism on duplicate-score fixtures.
    const Matrix dup(1, 4, {3.0, 3.0, 1.0, 2.0});
    require(pruner::unstructured_mask(dup, 0.5) == Matrix(1, 4, {1, 1, 0, 0}),
            "duplicate scores must keep the lower index");
    const Matrix flat(1, 8, std::vector<double>(8, 2.0));
    require(pruner::nm_mask(flat, 4, 8) == Matrix(1, 8, {1, 1, 1, 1, 0, 0, 0, 0}),
            "all-equal N:M group must keep the first n columns");

    // Strictly increasing transforms leave every mask unchanged.
    for (int iter = 0; iter < 100; ++iter) {
        Matrix s(6, 16);
        for (std::size_t i = 0; i < s.size(); ++i) s.data()[i] = rng.uniform(-5.0, 5.0);
        Matrix t = s;
        for (std::size_t i = 0; i < t.size(); ++i)
            t.data()[i] = std::atan(t.values()[i]) * 3.0 + 7.0;
        const double keep = rng.uniform();
        require(pruner::unstructured_mask(s, keep) == pruner::unstructured_mask(t, keep),
                "monotone transform changed an unstructured mask");
        require(pruner::nm_mask(s, 2, 4) == pruner::nm_mask(t, 2, 4),
                "monotone transform changed a 2:4 mask");
    }
}

void criterion6_evaluator_identities() {
    const ModelBundle trained = load_bundle(testutil::fixture_dir() / "tinylm");
    const TokenCorpus corpus = load_corpus(testutil::fixture_dir() / "corpus_eval.bin");

    // Uniform-logit identity on a zero-head copy.
    ModelBundle flat = trained;
    flat.head = Matrix(flat.topology.vocab_size, flat.topology.d_model, 0.0);
    const double uniform_ppl = eval::perplexity(flat, corpus, 64, 8);
    require(std::abs(uniform_ppl - double(flat.topology.vocab_size)) <= 1e-9,
            "uniform-logit perplexity is not vocab_size");

    // Sparsity-0 pruning leaves perplexity bit-identical.
    const auto plan = sdsa::uniform_plan(names_of(trained), sizes_of(trained), 0.0);
    auto [pruned, report] = pruner::prune_model(trained, plan,
                                                dsl::builtin(dsl::Builtin::magnitude), {},
                                                pruner::Pattern{});
    require(eval::perplexity(pruned, corpus, 64, 16) == eval::perplexity(trained, corpus, 64, 16),
            "sparsity-0 pruning moved the perplexity");

    // Causality on 50 random windows.
    testutil::Rng rng(606);
    for (int iter = 0; iter < 50; ++iter) {
        std::vector<std::uint32_t> window(32);
        for (auto& t : window) t = std::uint32_t(rng.below(trained.topology.vocab_size));
        const Matrix base = eval::forward(trained, window);
        const std::size_t flip = 1 + rng.below(window.size() - 1);
        window[flip] = std::uint32_t((window[flip] + 1) % trained.topology.vocab_size);
        const Matrix moved = eval::forward(trained, window);
        for (std::size_t i = 0; i < flip; ++i)
            for (std::size_t j = 0; j < moved.cols(); ++j)
                require(base(i, j) == moved(i, j), "causality violated before the flipped token");
    }

    // Frozen golden logits.
    const auto bytes = testutil::read_bytes(testutil::fixture_dir() / "golden_logits.bin");
    require(bytes.size() == 64 * 64 * sizeof(double), "golden file has the wrong size");
    const Matrix logits =
        eval::forward(trained, std::span<const std::uint32_t>(corpus.tokens.data(), 64));
    const double* want = reinterpret_cast<const double*>(bytes.data());
    for (std::size_t i = 0; i < logits.size(); ++i)
        require(std::abs(logits.values()[i] - want[i]) <= 1e-9,
                "golden logits deviate at entry " + std::to_string(i));
}

void criterion7_sdsa_experiment() {
    const auto t0 = Clock::now();
    const ModelBundle bundle = load_bundle(testutil::fixture_dir() / "skewed");
    const TokenCorpus calib = load_corpus(testutil::fixture_dir() / "corpus_calib.bin");

    eval::CalibrationOptions copts;
    copts.n_samples = 64;
    copts.seq_len = 64;
    copts.stats.keep_raw = true;
    const auto activation_stats = eval::capture_calibration(bundle, calib, copts);

    const auto metric = dsl::builtin(dsl::Builtin::wanda);
    eval::FitnessOptions opts; // reconstruction mode
    const double sg = 0.7;

    const auto report = stats::skewness_report(bundle, stats::Granularity::per_layer);
    const auto sdsa_plan = sdsa::allocate(report, sizes_of(bundle), sg, 1.8);
    const auto uniform_plan = sdsa::uniform_plan(names_of(bundle), sizes_of(bundle), sg);
    const auto global_plan = sdsa::global_threshold_plan(names_of(bundle), sizes_of(bundle), sg);

    const double f_sdsa = eval::fitness(bundle, sdsa_plan, metric, activation_stats, opts).value;
    const double f_uniform =
        eval::fitness(bundle, uniform_plan, metric, activation_stats, opts).value;
    const double f_global =
        eval::fitness(bundle, global_plan, metric, activation_stats, opts).value;

    require(f_sdsa < f_uniform, "SDSA fitness " + std::to_string(f_sdsa) +
                                    " does not beat uniform " + std::to_string(f_uniform));
    require(f_sdsa < f_global, "SDSA fitness " + std::to_string(f_sdsa) +
                                   " does not beat global threshold " + std::to_string(f_global));

    // Deterministic: a second evaluation reproduces the values bitwise.
    require(eval::fitness(bundle, sdsa_plan, metric, activation_stats, opts).value == f_sdsa,
            "SDSA fitness is not deterministic");
    require(seconds_since(t0) < 60.0, "runtime exceeded 60 s");
}

void criterion8_metric_experiment() {
    // Fixture layer with heterogeneous, correlated input columns; the seed is
    // part of the fixture definition.
    testutil::Rng rng(808080);
    const std::size_t d_out = 48, d_in = 48, tokens = 192;

    Matrix w = testutil::random_matrix(rng, d_out, d_in, 1.0);
    // Column scales spread over two orders of magnitude.
    std::vector<double> scale(d_in);
    for (std::size_t j = 0; j < d_in; ++j)
        scale[j] = std::pow(10.0, rng.uniform(-1.0, 1.0));
    // Correlated activations: each row mixes a shared latent with noise.
    Matrix x(tokens, d_in);
    for (std::size_t t = 0; t < tokens; ++t) {
        const double latent = rng.normal();
        for (std::size_t j = 0; j < d_in; ++j)
            x(t, j) = scale[j] * (0.75 * latent + 0.66 * rng.normal());
    }
    stats::ActivationStatsOptions sopts;
    const auto st = stats::compute_layer_stats(x, sopts);

    auto masked_error = [&](dsl::Builtin b) {
        const Matrix scores = dsl::eval_metric(dsl::builtin(b), w, st);
        const Matrix mask = pruner::unstructured_mask(scores, 0.5);
        return eval::reconstruction_error(w, pruner::apply_mask(w, mask), x);
    };
    const double e_mag = masked_error(dsl::Builtin::magnitude);
    const double e_wanda = masked_error(dsl::Builtin::wanda);
    const double e_auto = masked_error(dsl::Builtin::autoprune);

    require(e_auto <= e_wanda, "autoprune " + std::to_string(e_auto) +
                                   " must not exceed wanda " + std::to_string(e_wanda));
    require(e_wanda < e_mag, "wanda " + std::to_string(e_wanda) +
                                 " must beat magnitude " + std::to_string(e_mag));
    require(masked_error(dsl::Builtin::autoprune) == e_auto, "experiment is not deterministic");
}

void criterion9_gcot_search() {
    const auto t0 = Clock::now();
    const ModelBundle bundle = load_bundle(testutil::fixture_dir() / "tinylm");
    const TokenCorpus calib = load_corpus(testutil::fixture_dir() / "corpus_calib.bin");

    eval::CalibrationOptions copts;
    copts.n_samples = 16;
    copts.seq_len = 64;
    copts.stats.keep_raw = true;
    copts.stats.with_hess_diag = true;
    const auto activation_stats = eval::capture_calibration(bundle, calib, copts);

    gcot::SearchInputs inputs;
    inputs.bundle = &bundle;
    inputs.calibration = &activation_stats;

    gcot::SearchConfig cfg; // default branching {1,3,3,1} -> 9 leaves
    gcot::FixtureGenerator gen(gcot::default_fixture_candidates(), 0);
    const auto graph = gcot::run_search(inputs, cfg, gen);
    require(graph.best.has_value(), "search returned no best candidate");
    std::size_t successful = 0;
    double best_value = 1e300;
    std::size_t best_leaf = 0;
    for (const auto& c : graph.candidates) {
        if (!c.ok()) continue;
        ++successful;
        if (c.fitness->value < best_value) {
            best_value = c.fitness->value;
            best_leaf = c.leaf;
        }
    }
    require(successful >= 3, "search must evaluate at least 3 candidates");
    require(*graph.best == best_leaf, "selected leaf is not the exhaustive argmin");
    for (const auto& c : graph.candidates)
        if (c.ok())
            require(best_value <= c.fitness->value, "a candidate beats the selected argmin");

    // Bitwise reproducibility.
    gcot::FixtureGenerator gen2(gcot::default_fixture_candidates(), 0);
    const auto again = gcot::run_search(inputs, cfg, gen2);
    require(again.to_json() == graph.to_json(), "rerun produced a different graph");
    for (std::size_t i = 0; i < graph.candidates.size(); ++i)
        if (graph.candidates[i].ok())
            require(again.candidates[i].fitness->value == graph.candidates[i].fitness->value,
                    "rerun fitness differs bitwise");

    // Degenerate k = 1 everywhere: a 4-node linear chain.
    gcot::SearchConfig chain;
    for (auto& sc : chain.stages) sc = gcot::StageConfig{1, {0.7}};
    gcot::FixtureGenerator gen3(gcot::default_fixture_candidates(), 0);
    const auto linear = gcot::run_search(inputs, chain, gen3);
    require(linear.nodes.size() == 4, "k=1 search must produce a 4-node chain");
    for (std::size_t i = 1; i < 4; ++i)
        require(linear.nodes[i].parent && *linear.nodes[i].parent == i - 1,
                "k=1 chain is not linear");
    require(seconds_since(t0) < 30.0, "runtime exceeded 30 s");
}

void criterion10_prompt_fidelity() {
    const auto asset = [](const char* name) {
        return testutil::read_text(testutil::asset_dir() / "prompts" / name);
    };
    auto substitute = [](std::string text, const std::string& placeholder,
                         const std::string& value) {
        const auto at = text.find(placeholder);
        require(at != std::string::npos, "asset lacks placeholder " + placeholder);
        text.replace(at, placeholder.size(), value);
        return text;
    };

    const std::string desc = "TinyGPT-2block: 64-token vocab, 2 blocks";
    require(gcot::render_prompt(gcot::Stage::analysis, {{"llm_description", desc}}) ==
                substitute(asset("stage1_analysis.txt"), "{llm_description}", desc),
            "analysis prompt deviates from the committed asset");

    const std::string analysis = "Weights with outlier magnitudes dominate.";
    require(gcot::render_prompt(gcot::Stage::hypothesis, {{"analysis_text", analysis}}) ==
                substitute(asset("stage2_hypothesis.txt"), "{analysis_text}", analysis),
            "hypothesis prompt deviates from the committed asset");

    const std::string hypothesis = "Importance couples magnitude with input scale.";
    require(gcot::render_prompt(gcot::Stage::conceptual_formula,
                                {{"hypothesis_text", hypothesis}}) ==
                substitute(asset("stage3_conceptual_formula.txt"), "{hypothesis_text}",
                           hypothesis),
            "conceptual-formula prompt deviates from the committed asset");

    const std::string formula = "I(W, X) = |W| * g(X)";
    require(gcot::render_prompt(gcot::Stage::computable_concept,
                                {{"conceptual_formula", formula}}) ==
                substitute(asset("stage4_computable_concept.txt"), "{conceptual_formula}",
                           formula) +
                    "\n" + asset("dsl_instructions.txt"),
            "computable-concept prompt deviates from the committed assets");
}

} // namespace

int main() {
    std::printf("acceptance suite\n");
    criterion(1, "skewness agrees with the three-pass oracle (1000 vectors)",
              criterion1_skewness_oracle);
    criterion(2, "protection-weight algebra over 500 random triples", criterion2_softmax_algebra);
    criterion(3, "allocation budget exactness and the closed-form hand case",
              criterion3_budget_exactness);
    criterion(4, "builtin metrics match the double-loop oracle", criterion4_metric_correctness);
    criterion(5, "mask validity over 1000 random score matrices", criterion5_mask_validity);
    criterion(6, "evaluator identities (uniform PPL, zero-sparsity, causality, golden)",
              criterion6_evaluator_identities);
    criterion(7, "desk-scale allocation experiment: SDSA beats uniform and global at 70%",
              criterion7_sdsa_experiment);
    criterion(8, "desk-scale metric experiment: autoprune <= wanda < magnitude",
              criterion8_metric_experiment);
    criterion(9, "reasoning-graph search: argmin, reproducibility, k=1 chain",
              criterion9_gcot_search);
    criterion(10, "prompt templates match the committed assets byte for byte",
              criterion10_prompt_fidelity);

    if (g_failures == 0) {
        std::printf("all criteria passed\n");
        return 0;
    }
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
}
