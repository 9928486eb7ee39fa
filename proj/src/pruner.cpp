// SPDX-License-Identifier: Apache-2.0

#include "autoprune/pruner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

namespace autoprune::pruner {
namespace {

/// Indices of the k highest scores, ties resolved toward lower index.
/// nth_element with this comparator keeps selection stable for duplicates.
void top_k_select(const double* scores, std::size_t count, std::size_t k,
                  std::vector<std::size_t>& scratch, std::vector<std::size_t>& out) {
    scratch.resize(count);
    std::iota(scratch.begin(), scratch.end(), 0);
    auto better = [scores](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    };
    if (k < count)
        std::nth_element(scratch.begin(), scratch.begin() + long(k), scratch.end(), better);
    out.assign(scratch.begin(), scratch.begin() + long(k));
}

std::size_t kept_count(double keep_ratio, std::size_t group_size) {
    const auto k = std::size_t(std::ceil(keep_ratio * double(group_size)));
    return std::min(k, group_size);
}

dsl::ExprPtr ensure_metric(const dsl::ExprPtr& metric) {
    if (!metric) fail(Errc::invalid_argument, "prune_model needs a metric expression");
    return metric;
}

Matrix score_layer(const dsl::ExprPtr& metric, const LayerRecord& rec,
                   const stats::ActivationStats& activation_stats) {
    if (!dsl::uses_activations(metric)) return dsl::eval_metric(metric, rec.weight);
    auto it = activation_stats.per_layer.find(rec.name);
    if (it == activation_stats.per_layer.end())
        fail(Errc::missing_calibration,
             "metric references activation statistics but layer '" + rec.name +
                 "' has no calibration entry");
    return dsl::eval_metric(metric, rec.weight, it->second);
}

double plan_sparsity_for(const sdsa::SparsityPlan& plan, const LayerRecord& rec) {
    if (plan.granularity == stats::Granularity::per_block) {
        // Block-granular plans carry one entry per block; prefix-match the
        // layer's "blockN." name.
        for (const sdsa::PlanEntry& e : plan.entries)
            if (rec.name.rfind(e.layer + ".", 0) == 0) return e.sparsity;
        fail(Errc::invalid_argument, "plan has no block entry covering '" + rec.name + "'");
    }
    return plan.entry(rec.name).sparsity;
}

} // namespace

std::string pattern_name(const Pattern& p) {
    if (const auto* u = std::get_if<UnstructuredPattern>(&p))
        return u->group == MaskGroup::per_row ? "unstructured/per_row" : "unstructured/per_layer";
    const auto& nm = std::get<NmPattern>(p);
    return std::to_string(nm.n_keep) + ":" + std::to_string(nm.m_group);
}

Matrix unstructured_mask(const Matrix& scores, double keep_ratio, MaskGroup group) {
    if (keep_ratio < 0.0 || keep_ratio > 1.0)
        fail(Errc::invalid_argument, "keep_ratio must lie in [0,1]");
    Matrix mask(scores.rows(), scores.cols(), 0.0);
    std::vector<std::size_t> scratch, kept;
    if (group == MaskGroup::per_row) {
        const std::size_t k = kept_count(keep_ratio, scores.cols());
        for (std::size_t i = 0; i < scores.rows(); ++i) {
            top_k_select(scores.row(i), scores.cols(), k, scratch, kept);
            for (std::size_t j : kept) mask(i, j) = 1.0;
        }
    } else {
        const std::size_t k = kept_count(keep_ratio, scores.size());
        top_k_select(scores.data(), scores.size(), k, scratch, kept);
        for (std::size_t flat : kept) mask.data()[flat] = 1.0;
    }
    return mask;
}

Matrix nm_mask(const Matrix& scores, std::size_t n_keep, std::size_t m_group) {
    if (n_keep == 0 || n_keep > m_group)
        fail(Errc::invalid_argument, "need 0 < n_keep <= m_group");
    if (scores.cols() % m_group != 0)
        fail(Errc::group_misaligned, "d_in=" + std::to_string(scores.cols()) +
                                         " is not divisible by m=" + std::to_string(m_group));
    Matrix mask(scores.rows(), scores.cols(), 0.0);
    std::vector<std::size_t> scratch, kept;
    for (std::size_t i = 0; i < scores.rows(); ++i) {
        for (std::size_t g = 0; g < scores.cols(); g += m_group) {
            top_k_select(scores.row(i) + g, m_group, n_keep, scratch, kept);
            for (std::size_t j : kept) mask(i, g + j) = 1.0;
        }
    }
    return mask;
}

Matrix apply_mask(const Matrix& weight, const Matrix& mask) {
    if (!weight.same_shape(mask)) fail(Errc::shape_mismatch, "mask shape must equal weight shape");
    Matrix out = weight;
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data()[i] = mask.data()[i] == 0.0 ? 0.0 : out.data()[i];
    return out;
}

std::string PruneReport::to_json() const {
    nlohmann::json j;
    j["metric"] = metric;
    j["allocator"] = allocator;
    j["pattern"] = pattern;
    j["overall"] = {{"requested_sparsity", requested_sparsity},
                    {"achieved_sparsity", achieved_sparsity},
                    {"zeroed", zeroed},
                    {"total", total}};
    auto arr = nlohmann::json::array();
    for (const LayerPruneStats& e : per_layer)
        arr.push_back({{"layer", e.layer},
                       {"requested_sparsity", e.requested_sparsity},
                       {"achieved_sparsity", e.achieved_sparsity},
                       {"zeroed", e.zeroed},
                       {"total", e.total}});
    j["per_layer"] = arr;
    return j.dump(2) + "\n";
}

std::pair<ModelBundle, PruneReport> prune_model(const ModelBundle& bundle,
                                                const sdsa::SparsityPlan& plan,
                                                const dsl::ExprPtr& metric,
                                                const stats::ActivationStats& activation_stats,
                                                const Pattern& pattern) {
    ensure_metric(metric);
    ModelBundle pruned = bundle;
    PruneReport report;
    report.metric = dsl::pretty_print(metric);
    report.allocator = sdsa::allocator_name(plan.allocator);
    report.pattern = pattern_name(pattern);
    report.requested_sparsity = plan.global_sparsity;

    std::vector<Matrix> masks(bundle.layers.size());

    const bool is_nm = std::holds_alternative<NmPattern>(pattern);
    if (!is_nm && plan.allocator == sdsa::Allocator::global_threshold) {
        // One score cut across every layer: pool all scores, keep the global
        // top ceil((1-S_g) * total), ties resolved by (layer, flat index).
        std::vector<Matrix> scores;
        std::size_t total = 0;
        for (const LayerRecord& rec : bundle.layers) {
            scores.push_back(score_layer(metric, rec, activation_stats));
            total += rec.weight.size();
        }
        std::vector<double> pooled;
        pooled.reserve(total);
        for (const Matrix& s : scores) pooled.insert(pooled.end(), s.values().begin(), s.values().end());
        std::vector<std::size_t> scratch, kept;
        top_k_select(pooled.data(), pooled.size(),
                     kept_count(1.0 - plan.global_sparsity, total), scratch, kept);
        std::vector<char> keep_flags(total, 0);
        for (std::size_t flat : kept) keep_flags[flat] = 1;
        std::size_t base = 0;
        for (std::size_t li = 0; li < bundle.layers.size(); ++li) {
            const Matrix& s = scores[li];
            Matrix mask(s.rows(), s.cols(), 0.0);
            for (std::size_t f = 0; f < s.size(); ++f)
                if (keep_flags[base + f]) mask.data()[f] = 1.0;
            base += s.size();
            masks[li] = std::move(mask);
        }
    } else {
        for (std::size_t li = 0; li < bundle.layers.size(); ++li) {
            const LayerRecord& rec = bundle.layers[li];
            const Matrix score = score_layer(metric, rec, activation_stats);
            if (is_nm) {
                const auto& nm = std::get<NmPattern>(pattern);
                masks[li] = nm_mask(score, nm.n_keep, nm.m_group);
            } else {
                const auto& u = std::get<UnstructuredPattern>(pattern);
                masks[li] = unstructured_mask(score, 1.0 - plan_sparsity_for(plan, rec), u.group);
            }
        }
    }

    for (std::size_t li = 0; li < bundle.layers.size(); ++li) {
        const LayerRecord& rec = bundle.layers[li];
        pruned.layers[li].weight = apply_mask(rec.weight, masks[li]);

        LayerPruneStats ls;
        ls.layer = rec.name;
        ls.total = rec.weight.size();
        std::size_t ones = 0;
        for (double v : masks[li].values()) ones += v != 0.0 ? 1 : 0;
        ls.zeroed = ls.total - ones;
        ls.achieved_sparsity = double(ls.zeroed) / double(ls.total);
        if (is_nm) {
            const auto& nm = std::get<NmPattern>(pattern);
            ls.requested_sparsity = 1.0 - double(nm.n_keep) / double(nm.m_group);
        } else {
            ls.requested_sparsity = plan.allocator == sdsa::Allocator::global_threshold
                                        ? plan.global_sparsity
                                        : plan_sparsity_for(plan, rec);
        }
        report.zeroed += ls.zeroed;
        report.total += ls.total;
        report.per_layer.push_back(std::move(ls));
    }
    report.achieved_sparsity = report.total ? double(report.zeroed) / double(report.total) : 0.0;
    if (is_nm) {
        const auto& nm = std::get<NmPattern>(pattern);
        report.requested_sparsity = 1.0 - double(nm.n_keep) / double(nm.m_group);
    }
    return {std::move(pruned), std::move(report)};
}

} // namespace autoprune::pruner
