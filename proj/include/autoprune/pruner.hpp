// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <variant>
#include <vector>

#include "autoprune/bundle.hpp"
#include "autoprune/metric_dsl.hpp"
#include "autoprune/sdsa.hpp"
#include "autoprune/stats.hpp"

namespace autoprune::pruner {

enum class MaskGroup { per_row, per_layer };

struct UnstructuredPattern {
    MaskGroup group = MaskGroup::per_row;
};

struct NmPattern {
    std::size_t n_keep = 2;
    std::size_t m_group = 4;
};

using Pattern = std::variant<UnstructuredPattern, NmPattern>;

std::string pattern_name(const Pattern& p);

/// Binary {0,1} mask keeping ceil(keep_ratio * group size) top-scoring
/// entries per comparison group; ties go to the lower flat index.
Matrix unstructured_mask(const Matrix& scores, double keep_ratio,
                         MaskGroup group = MaskGroup::per_row);

/// Keeps exactly n_keep top-scoring entries in every aligned group of
/// m_group consecutive columns of each row; ties go to the lower column.
Matrix nm_mask(const Matrix& scores, std::size_t n_keep, std::size_t m_group);

Matrix apply_mask(const Matrix& weight, const Matrix& mask);

struct LayerPruneStats {
    std::string layer;
    double requested_sparsity = 0.0;
    double achieved_sparsity = 0.0;
    std::size_t zeroed = 0;
    std::size_t total = 0;
};

struct PruneReport {
    std::vector<LayerPruneStats> per_layer;
    double requested_sparsity = 0.0;
    double achieved_sparsity = 0.0;
    std::size_t zeroed = 0;
    std::size_t total = 0;
    std::string metric;
    std::string allocator;
    std::string pattern;

    std::string to_json() const;
};

/// Masks every prunable layer of the bundle. Unstructured patterns follow
/// the plan's per-layer keep ratios (a global_threshold plan applies one
/// score cut across all layers instead); N:M patterns use the fixed n/m
/// ratio everywhere and ignore the plan's ratios.
std::pair<ModelBundle, PruneReport> prune_model(const ModelBundle& bundle,
                                                const sdsa::SparsityPlan& plan,
                                                const dsl::ExprPtr& metric,
                                                const stats::ActivationStats& activation_stats,
                                                const Pattern& pattern);

} // namespace autoprune::pruner
