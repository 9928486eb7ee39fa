// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "autoprune/stats.hpp"

namespace autoprune::sdsa {

enum class Allocator { sdsa, uniform, global_threshold };

const char* allocator_name(Allocator a);
Allocator allocator_from_name(const std::string& name);

// Contrast caps from the allocation schedule: 1.8 layerwise, 1.5 blockwise.
constexpr double kDefaultContrastCapLayer = 1.8;
constexpr double kDefaultContrastCapBlock = 1.5;
constexpr double kDefaultEps = 1e-8;

struct PlanEntry {
    std::string layer;
    double keep_ratio = 1.0; // k in [0, 1]
    double sparsity = 0.0;   // 1 - k
    std::size_t weight_count = 0;
};

struct SparsityPlan {
    std::vector<PlanEntry> entries;
    double global_sparsity = 0.0;
    Allocator allocator = Allocator::uniform;
    double contrast_cap = kDefaultContrastCapLayer;
    stats::Granularity granularity = stats::Granularity::per_layer;

    const PlanEntry& entry(const std::string& layer) const;
    double weighted_mean_sparsity() const;
    /// Checks sum(n_l * s_l) == S_g * sum(n_l) within 1e-9; applies to sdsa
    /// and uniform allocators only.
    void validate_budget() const;

    std::string to_csv() const;
    std::string to_json() const;
};

/// Softmax protection weights: omega_l = exp(beta * gt_l) / sum_j exp(beta * gt_j),
/// computed with max-subtraction.
std::vector<double> protection_weights(const std::vector<double>& gamma_tilde, double beta);

/// beta(S_g) = S_g * ln(M) / (delta_gamma_tilde + eps); keeps
/// omega_max/omega_min = exp(beta * delta_gamma_tilde) <= M.
double beta_schedule(double global_sparsity, double contrast_cap, double delta_gamma_tilde,
                     double eps = kDefaultEps);

/// Skew-aware allocation: keep ratio k_l = (1 - S_g) * omega_l / omega_bar
/// with size-weighted omega_bar, clipped at 1 with the surplus kept-weight
/// budget redistributed proportionally to the remaining omegas until fixed
/// point. Preserves the global budget exactly.
SparsityPlan allocate(const stats::SkewnessReport& report,
                      const std::vector<std::size_t>& layer_sizes, double global_sparsity,
                      double contrast_cap, double eps = kDefaultEps);

SparsityPlan uniform_plan(const std::vector<std::string>& layer_names,
                          const std::vector<std::size_t>& layer_sizes, double global_sparsity);

/// Plan with explicit per-layer sparsities (sensitivity probes and the like);
/// global_sparsity is set to the size-weighted mean so the budget invariant
/// holds by construction.
SparsityPlan plan_from_ratios(const std::vector<std::string>& layer_names,
                              const std::vector<std::size_t>& layer_sizes,
                              const std::vector<double>& sparsities);

/// Marker plan for the one-threshold-across-all-layers baseline; carries no
/// per-layer budget invariant (the pruner applies a single global score cut).
SparsityPlan global_threshold_plan(const std::vector<std::string>& layer_names,
                                   const std::vector<std::size_t>& layer_sizes,
                                   double global_sparsity);

} // namespace autoprune::sdsa
