// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "autoprune/bundle.hpp"
#include "autoprune/metric_dsl.hpp"
#include "autoprune/pruner.hpp"
#include "autoprune/sdsa.hpp"
#include "autoprune/stats.hpp"

namespace autoprune::eval {

enum class FitnessMode { perplexity, reconstruction };

const char* fitness_mode_name(FitnessMode m);
FitnessMode fitness_mode_from_name(const std::string& name);

struct FitnessResult {
    FitnessMode mode = FitnessMode::reconstruction;
    double value = 0.0;
    std::optional<std::vector<double>> per_layer_breakdown; // reconstruction mode

    std::string to_json() const;
};

struct SensitivityRow {
    std::string layer;
    double probe_ratio = 0.0;
    double background_ratio = 0.0;
    double fitness = 0.0;
};

struct SensitivityTable {
    std::vector<SensitivityRow> rows;
    std::string metric;
    std::string fitness_mode;

    std::string to_csv() const;
    std::string to_json() const;
};

/// Pre-norm decoder pass over one token window: embedding -> n_blocks x
/// (layernorm, causal multi-head attention, residual, layernorm, GELU MLP,
/// residual) -> final layernorm -> head. All math runs in 64-bit. Returns
/// seq_len x vocab logits.
Matrix forward(const ModelBundle& bundle, std::span<const std::uint32_t> window);

/// exp of the mean next-token negative log-likelihood over non-overlapping
/// windows (stride = seq_len, targets stay within their window), up to
/// max_windows of them.
double perplexity(const ModelBundle& bundle, const TokenCorpus& corpus, std::size_t seq_len,
                  std::size_t max_windows);

struct CalibrationOptions {
    std::size_t n_samples = 128;
    std::size_t seq_len = 0; // 0 means the bundle's max_seq_len
    stats::ActivationStatsOptions stats;
};

/// Runs forward passes over the first n_samples non-overlapping windows and
/// collects each prunable layer's input activations (rows ordered by window).
stats::ActivationStats capture_calibration(const ModelBundle& bundle, const TokenCorpus& corpus,
                                           const CalibrationOptions& opts);

/// Frobenius norm of X (W - W_pruned)^T.
double reconstruction_error(const Matrix& weight, const Matrix& pruned_weight, const Matrix& x);

struct FitnessOptions {
    FitnessMode mode = FitnessMode::reconstruction;
    pruner::Pattern pattern = pruner::UnstructuredPattern{};
    // Perplexity mode inputs.
    const TokenCorpus* eval_corpus = nullptr;
    std::size_t seq_len = 0; // 0 means the bundle's max_seq_len
    std::size_t max_windows = 64;
};

/// Prunes a working copy and scores it: perplexity on the eval corpus, or the
/// sum of per-layer reconstruction errors over the calibration activations.
FitnessResult fitness(const ModelBundle& bundle, const sdsa::SparsityPlan& plan,
                      const dsl::ExprPtr& metric, const stats::ActivationStats& activation_stats,
                      const FitnessOptions& opts);

/// Fitness of the unmasked bundle (the S_g = 0 baseline).
FitnessResult dense_fitness(const ModelBundle& bundle,
                            const stats::ActivationStats& activation_stats,
                            const FitnessOptions& opts);

/// For each (layer, probe ratio) pair: fitness of the plan holding that layer
/// at the probe ratio and every other layer at background_ratio.
SensitivityTable sensitivity_sweep(const ModelBundle& bundle,
                                   const stats::ActivationStats& activation_stats,
                                   const dsl::ExprPtr& metric,
                                   const std::vector<std::string>& target_layers,
                                   const std::vector<double>& probe_ratios,
                                   double background_ratio, const FitnessOptions& opts);

} // namespace autoprune::eval
