// SPDX-License-Identifier: Apache-2.0

#include "autoprune/model_eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include <json.hpp>

namespace autoprune::eval {
namespace {

constexpr double kLayerNormEps = 1e-5;
// Pinned tanh-approximation constants so golden files have one bit-exact
// definition.
constexpr double kGeluC0 = 0.7978845608;
constexpr double kGeluC1 = 0.044715;

double gelu(double x) { return 0.5 * x * (1.0 + std::tanh(kGeluC0 * (x + kGeluC1 * x * x * x))); }

void layer_norm_row(const double* in, double* out, const std::vector<double>& scale,
                    const std::vector<double>& bias) {
    const std::size_t d = scale.size();
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += in[j];
    mean /= double(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        const double c = in[j] - mean;
        var += c * c;
    }
    var /= double(d);
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    for (std::size_t j = 0; j < d; ++j) out[j] = (in[j] - mean) * inv * scale[j] + bias[j];
}

Matrix layer_norm(const Matrix& x, const std::vector<double>& scale,
                  const std::vector<double>& bias) {
    Matrix out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) layer_norm_row(x.row(i), out.row(i), scale, bias);
    return out;
}

/// Capture sink: layer index -> list of input rows, appended in window order.
using CaptureSink = std::map<std::size_t, std::vector<std::vector<double>>>;

void record(CaptureSink* sink, std::size_t layer_index, const Matrix& x) {
    if (!sink) return;
    auto& rows = (*sink)[layer_index];
    for (std::size_t i = 0; i < x.rows(); ++i)
        rows.emplace_back(x.row(i), x.row(i) + x.cols());
}

Matrix run_decoder(const ModelBundle& bundle, std::span<const std::uint32_t> window,
                   CaptureSink* sink) {
    const Topology& t = bundle.topology;
    const std::size_t seq = window.size();
    if (seq == 0) fail(Errc::invalid_argument, "empty token window");
    if (seq > t.max_seq_len)
        fail(Errc::invalid_argument, "window longer than max_seq_len");
    for (std::uint32_t tok : window)
        if (tok >= t.vocab_size)
            fail(Errc::token_out_of_range,
                 "token id " + std::to_string(tok) + " >= vocab_size " +
                     std::to_string(t.vocab_size));

    const std::size_t d = t.d_model;
    const std::size_t heads = t.n_heads;
    const std::size_t d_head = d / heads;
    const double attn_scale = 1.0 / std::sqrt(double(d_head));

    Matrix x(seq, d);
    for (std::size_t i = 0; i < seq; ++i) {
        const double* e = bundle.embedding.row(window[i]);
        std::copy(e, e + d, x.row(i));
    }

    std::vector<double> probs;
    for (std::size_t b = 0; b < t.n_blocks; ++b) {
        const BlockNorms& norms = bundle.block_norms[b];

        Matrix normed = layer_norm(x, norms.ln1_scale, norms.ln1_bias);
        const std::size_t base = b * kLayerKindsPerBlock;
        record(sink, base + 0, normed);
        record(sink, base + 1, normed);
        record(sink, base + 2, normed);
        const Matrix q = matmul_transposed(normed, bundle.layer(b, LayerKind::attention_q).weight);
        const Matrix k = matmul_transposed(normed, bundle.layer(b, LayerKind::attention_k).weight);
        const Matrix v = matmul_transposed(normed, bundle.layer(b, LayerKind::attention_v).weight);

        Matrix context(seq, d);
        probs.resize(seq);
        for (std::size_t h = 0; h < heads; ++h) {
            const std::size_t off = h * d_head;
            for (std::size_t i = 0; i < seq; ++i) {
                double peak = -1e300;
                for (std::size_t j = 0; j <= i; ++j) {
                    double s = 0.0;
                    for (std::size_t c = 0; c < d_head; ++c)
                        s += q(i, off + c) * k(j, off + c);
                    probs[j] = s * attn_scale;
                    peak = std::max(peak, probs[j]);
                }
                double denom = 0.0;
                for (std::size_t j = 0; j <= i; ++j) {
                    probs[j] = std::exp(probs[j] - peak);
                    denom += probs[j];
                }
                for (std::size_t c = 0; c < d_head; ++c) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j <= i; ++j) acc += probs[j] / denom * v(j, off + c);
                    context(i, off + c) = acc;
                }
            }
        }
        record(sink, base + 3, context);
        const Matrix attn_out =
            matmul_transposed(context, bundle.layer(b, LayerKind::attention_o).weight);
        for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] += attn_out.values()[i];

        Matrix normed2 = layer_norm(x, norms.ln2_scale, norms.ln2_bias);
        record(sink, base + 4, normed2);
        Matrix hidden = matmul_transposed(normed2, bundle.layer(b, LayerKind::mlp_in).weight);
        for (std::size_t i = 0; i < hidden.size(); ++i) hidden.data()[i] = gelu(hidden.values()[i]);
        record(sink, base + 5, hidden);
        const Matrix mlp_out = matmul_transposed(hidden, bundle.layer(b, LayerKind::mlp_out).weight);
        for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] += mlp_out.values()[i];
    }

    const Matrix final_normed = layer_norm(x, bundle.final_scale, bundle.final_bias);
    return matmul_transposed(final_normed, bundle.head_matrix());
}

double window_nll(const Matrix& logits, std::span<const std::uint32_t> window) {
    // Stable log-softmax; targets are the next token inside the same window.
    double total = 0.0;
    const std::size_t vocab = logits.cols();
    for (std::size_t i = 0; i + 1 < window.size(); ++i) {
        const double* row = logits.row(i);
        double peak = row[0];
        for (std::size_t jv = 1; jv < vocab; ++jv) peak = std::max(peak, row[jv]);
        double denom = 0.0;
        for (std::size_t jv = 0; jv < vocab; ++jv) denom += std::exp(row[jv] - peak);
        total += -(row[window[i + 1]] - peak - std::log(denom));
    }
    return total;
}

std::size_t effective_seq_len(const ModelBundle& bundle, std::size_t seq_len) {
    const std::size_t s = seq_len == 0 ? bundle.topology.max_seq_len : seq_len;
    if (s == 0 || s > bundle.topology.max_seq_len)
        fail(Errc::invalid_argument, "seq_len must lie in [1, max_seq_len]");
    return s;
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

const char* fitness_mode_name(FitnessMode m) {
    return m == FitnessMode::perplexity ? "perplexity" : "reconstruction";
}

FitnessMode fitness_mode_from_name(const std::string& name) {
    if (name == "perplexity" || name == "ppl") return FitnessMode::perplexity;
    if (name == "reconstruction" || name == "recon") return FitnessMode::reconstruction;
    fail(Errc::invalid_argument, "unknown fitness mode '" + name + "'");
}

Matrix forward(const ModelBundle& bundle, std::span<const std::uint32_t> window) {
    return run_decoder(bundle, window, nullptr);
}

double perplexity(const ModelBundle& bundle, const TokenCorpus& corpus, std::size_t seq_len,
                  std::size_t max_windows) {
    if (corpus.tokens.size() < 2)
        fail(Errc::empty_corpus, "perplexity needs at least 2 tokens");
    const std::size_t seq = effective_seq_len(bundle, seq_len);
    const std::size_t available = corpus.tokens.size() / seq;
    const std::size_t windows = std::min(available, max_windows);
    if (windows == 0)
        fail(Errc::invalid_argument, "corpus is shorter than one evaluation window");

    double total_nll = 0.0;
    std::size_t targets = 0;
    for (std::size_t w = 0; w < windows; ++w) {
        std::span<const std::uint32_t> window(corpus.tokens.data() + w * seq, seq);
        total_nll += window_nll(run_decoder(bundle, window, nullptr), window);
        targets += seq - 1;
    }
    if (targets == 0) fail(Errc::invalid_argument, "no next-token targets in evaluation windows");
    return std::exp(total_nll / double(targets));
}

stats::ActivationStats capture_calibration(const ModelBundle& bundle, const TokenCorpus& corpus,
                                           const CalibrationOptions& opts) {
    const std::size_t seq = effective_seq_len(bundle, opts.seq_len);
    if (opts.n_samples == 0) fail(Errc::invalid_argument, "n_samples must be positive");
    if (corpus.tokens.size() / seq < opts.n_samples)
        fail(Errc::empty_corpus, "corpus supplies fewer than n_samples windows");

    CaptureSink sink;
    for (std::size_t w = 0; w < opts.n_samples; ++w) {
        std::span<const std::uint32_t> window(corpus.tokens.data() + w * seq, seq);
        run_decoder(bundle, window, &sink);
    }

    std::map<std::string, Matrix> raw;
    for (auto& [layer_index, rows] : sink) {
        const std::size_t d = rows.front().size();
        Matrix x(rows.size(), d);
        for (std::size_t i = 0; i < rows.size(); ++i)
            std::copy(rows[i].begin(), rows[i].end(), x.row(i));
        raw.emplace(bundle.layers[layer_index].name, std::move(x));
    }
    return stats::compute_activation_stats(raw, opts.stats);
}

double reconstruction_error(const Matrix& weight, const Matrix& pruned_weight, const Matrix& x) {
    if (!weight.same_shape(pruned_weight))
        fail(Errc::shape_mismatch, "weight shapes differ");
    if (x.cols() != weight.cols())
        fail(Errc::shape_mismatch, "activation columns must match weight d_in");
    Matrix delta = weight;
    for (std::size_t i = 0; i < delta.size(); ++i) delta.data()[i] -= pruned_weight.values()[i];
    const Matrix y = matmul_transposed(x, delta);
    double acc = 0.0;
    for (double v : y.values()) acc += v * v;
    return std::sqrt(acc);
}

namespace {

FitnessResult score_bundle(const ModelBundle& original, const ModelBundle& pruned,
                           const stats::ActivationStats& activation_stats,
                           const FitnessOptions& opts) {
    FitnessResult result;
    result.mode = opts.mode;
    if (opts.mode == FitnessMode::perplexity) {
        if (!opts.eval_corpus)
            fail(Errc::invalid_argument, "perplexity fitness needs an eval corpus");
        result.value = perplexity(pruned, *opts.eval_corpus, opts.seq_len, opts.max_windows);
        return result;
    }
    std::vector<double> breakdown;
    double total = 0.0;
    for (std::size_t li = 0; li < original.layers.size(); ++li) {
        const LayerRecord& rec = original.layers[li];
        auto it = activation_stats.per_layer.find(rec.name);
        if (it == activation_stats.per_layer.end() || !it->second.raw)
            fail(Errc::missing_calibration,
                 "reconstruction fitness needs raw calibration activations for '" + rec.name + "'");
        const double err = reconstruction_error(rec.weight, pruned.layers[li].weight, *it->second.raw);
        breakdown.push_back(err);
        total += err;
    }
    result.value = total;
    result.per_layer_breakdown = std::move(breakdown);
    return result;
}

} // namespace

FitnessResult fitness(const ModelBundle& bundle, const sdsa::SparsityPlan& plan,
                      const dsl::ExprPtr& metric, const stats::ActivationStats& activation_stats,
                      const FitnessOptions& opts) {
    auto [pruned, report] = pruner::prune_model(bundle, plan, metric, activation_stats, opts.pattern);
    (void)report;
    return score_bundle(bundle, pruned, activation_stats, opts);
}

FitnessResult dense_fitness(const ModelBundle& bundle,
                            const stats::ActivationStats& activation_stats,
                            const FitnessOptions& opts) {
    return score_bundle(bundle, bundle, activation_stats, opts);
}

SensitivityTable sensitivity_sweep(const ModelBundle& bundle,
                                   const stats::ActivationStats& activation_stats,
                                   const dsl::ExprPtr& metric,
                                   const std::vector<std::string>& target_layers,
                                   const std::vector<double>& probe_ratios,
                                   double background_ratio, const FitnessOptions& opts) {
    if (background_ratio < 0.0 || background_ratio > 1.0)
        fail(Errc::invalid_argument, "background_ratio must lie in [0,1]");
    for (double r : probe_ratios)
        if (r < 0.0 || r > 1.0) fail(Errc::invalid_argument, "probe ratios must lie in [0,1]");

    std::vector<std::string> names;
    std::vector<std::size_t> sizes;
    for (const LayerRecord& rec : bundle.layers) {
        names.push_back(rec.name);
        sizes.push_back(rec.weight.size());
    }

    SensitivityTable table;
    table.metric = dsl::pretty_print(metric);
    table.fitness_mode = fitness_mode_name(opts.mode);
    for (const std::string& target : target_layers) {
        std::size_t target_index = names.size();
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == target) target_index = i;
        if (target_index == names.size())
            fail(Errc::invalid_argument, "unknown target layer '" + target + "'");
        for (double probe : probe_ratios) {
            std::vector<double> ratios(names.size(), background_ratio);
            ratios[target_index] = probe;
            const auto plan = sdsa::plan_from_ratios(names, sizes, ratios);
            const FitnessResult fr = fitness(bundle, plan, metric, activation_stats, opts);
            table.rows.push_back({target, probe, background_ratio, fr.value});
        }
    }
    return table;
}

std::string FitnessResult::to_json() const {
    nlohmann::json j;
    j["mode"] = fitness_mode_name(mode);
    j["value"] = value;
    if (per_layer_breakdown) j["per_layer_breakdown"] = *per_layer_breakdown;
    return j.dump(2) + "\n";
}

std::string SensitivityTable::to_csv() const {
    std::ostringstream out;
    out << "layer,probe_ratio,background_ratio,fitness\n";
    for (const SensitivityRow& r : rows)
        out << r.layer << "," << fmt_double(r.probe_ratio) << "," << fmt_double(r.background_ratio)
            << "," << fmt_double(r.fitness) << "\n";
    return out.str();
}

std::string SensitivityTable::to_json() const {
    nlohmann::json j;
    j["metric"] = metric;
    j["fitness_mode"] = fitness_mode;
    auto arr = nlohmann::json::array();
    for (const SensitivityRow& r : rows)
        arr.push_back({{"layer", r.layer},
                       {"probe_ratio", r.probe_ratio},
                       {"background_ratio", r.background_ratio},
                       {"fitness", r.fitness}});
    j["rows"] = arr;
    return j.dump(2) + "\n";
}

} // namespace autoprune::eval
