// SPDX-License-Identifier: Apache-2.0

#include "autoprune/sdsa.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

namespace autoprune::sdsa {
namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

const char* allocator_name(Allocator a) {
    switch (a) {
        case Allocator::sdsa: return "sdsa";
        case Allocator::uniform: return "uniform";
        case Allocator::global_threshold: return "global_threshold";
    }
    return "?";
}

Allocator allocator_from_name(const std::string& name) {
    if (name == "sdsa") return Allocator::sdsa;
    if (name == "uniform") return Allocator::uniform;
    if (name == "global_threshold" || name == "global") return Allocator::global_threshold;
    fail(Errc::invalid_argument, "unknown allocator '" + name + "'");
}

const PlanEntry& SparsityPlan::entry(const std::string& layer) const {
    for (const PlanEntry& e : entries)
        if (e.layer == layer) return e;
    fail(Errc::invalid_argument, "plan has no entry for layer '" + layer + "'");
}

double SparsityPlan::weighted_mean_sparsity() const {
    double num = 0.0, den = 0.0;
    for (const PlanEntry& e : entries) {
        num += double(e.weight_count) * e.sparsity;
        den += double(e.weight_count);
    }
    return den > 0.0 ? num / den : 0.0;
}

void SparsityPlan::validate_budget() const {
    if (allocator == Allocator::global_threshold) return;
    if (std::abs(weighted_mean_sparsity() - global_sparsity) > 1e-9)
        fail(Errc::infeasible_budget, "plan violates the exact-budget invariant");
    for (const PlanEntry& e : entries)
        if (e.keep_ratio < 0.0 || e.keep_ratio > 1.0)
            fail(Errc::infeasible_budget, "keep ratio out of [0,1] for '" + e.layer + "'");
}

std::string SparsityPlan::to_csv() const {
    std::ostringstream out;
    out << "layer,n,keep_ratio,sparsity\n";
    for (const PlanEntry& e : entries)
        out << e.layer << "," << e.weight_count << "," << fmt_double(e.keep_ratio) << ","
            << fmt_double(e.sparsity) << "\n";
    return out.str();
}

std::string SparsityPlan::to_json() const {
    nlohmann::json j;
    j["global_sparsity"] = global_sparsity;
    j["allocator"] = allocator_name(allocator);
    j["contrast_cap"] = contrast_cap;
    j["granularity"] = granularity == stats::Granularity::per_layer ? "per_layer" : "per_block";
    auto arr = nlohmann::json::array();
    for (const PlanEntry& e : entries)
        arr.push_back({{"layer", e.layer},
                       {"n", e.weight_count},
                       {"keep_ratio", e.keep_ratio},
                       {"sparsity", e.sparsity}});
    j["entries"] = arr;
    return j.dump(2) + "\n";
}

std::vector<double> protection_weights(const std::vector<double>& gamma_tilde, double beta) {
    if (gamma_tilde.empty()) fail(Errc::invalid_argument, "protection_weights needs >= 1 layer");
    if (beta < 0.0) fail(Errc::invalid_argument, "beta must be non-negative");
    const double peak = *std::max_element(gamma_tilde.begin(), gamma_tilde.end());
    std::vector<double> omega(gamma_tilde.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < omega.size(); ++i) {
        omega[i] = std::exp(beta * (gamma_tilde[i] - peak));
        sum += omega[i];
    }
    for (double& w : omega) w /= sum;
    return omega;
}

double beta_schedule(double global_sparsity, double contrast_cap, double delta_gamma_tilde,
                     double eps) {
    if (contrast_cap <= 1.0)
        fail(Errc::invalid_contrast_cap, "contrast cap M must exceed 1");
    if (global_sparsity < 0.0 || global_sparsity > 1.0)
        fail(Errc::invalid_argument, "global sparsity must lie in [0,1]");
    if (delta_gamma_tilde < 0.0)
        fail(Errc::invalid_argument, "delta_gamma_tilde must be non-negative");
    return global_sparsity * std::log(contrast_cap) / (delta_gamma_tilde + eps);
}

SparsityPlan allocate(const stats::SkewnessReport& report,
                      const std::vector<std::size_t>& layer_sizes, double global_sparsity,
                      double contrast_cap, double eps) {
    const std::size_t count = report.per_layer.size();
    if (count == 0) fail(Errc::invalid_argument, "allocate needs a non-empty report");
    if (layer_sizes.size() != count)
        fail(Errc::invalid_argument, "layer_sizes must align with the report entries");
    for (std::size_t n : layer_sizes)
        if (n == 0) fail(Errc::invalid_argument, "layer sizes must be positive");
    if (global_sparsity < 0.0 || global_sparsity >= 1.0)
        fail(Errc::invalid_argument, "allocate requires S_g in [0,1)");

    std::vector<double> gamma_tilde(count);
    for (std::size_t i = 0; i < count; ++i) gamma_tilde[i] = report.per_layer[i].gamma_tilde;

    const double beta = beta_schedule(global_sparsity, contrast_cap, report.delta_gamma_tilde, eps);
    const std::vector<double> omega = protection_weights(gamma_tilde, beta);

    double total = 0.0;
    for (std::size_t n : layer_sizes) total += double(n);
    const double keep_budget = (1.0 - global_sparsity) * total;

    // Water-filling: k_l = min(1, t * omega_l) with t chosen so the kept
    // weights sum to the budget. Each pass either clips a new layer or
    // terminates, so at most `count` iterations run.
    std::vector<double> keep(count, 0.0);
    std::vector<bool> clipped(count, false);
    for (std::size_t pass = 0; pass <= count; ++pass) {
        double clipped_weights = 0.0, active_mass = 0.0;
        for (std::size_t i = 0; i < count; ++i) {
            if (clipped[i])
                clipped_weights += double(layer_sizes[i]);
            else
                active_mass += double(layer_sizes[i]) * omega[i];
        }
        if (active_mass <= 0.0) break;
        const double t = (keep_budget - clipped_weights) / active_mass;
        bool newly_clipped = false;
        for (std::size_t i = 0; i < count; ++i) {
            if (clipped[i]) {
                keep[i] = 1.0;
                continue;
            }
            keep[i] = t * omega[i];
            if (keep[i] > 1.0) {
                clipped[i] = true;
                keep[i] = 1.0;
                newly_clipped = true;
            }
        }
        if (!newly_clipped) break;
    }

    SparsityPlan plan;
    plan.allocator = Allocator::sdsa;
    plan.global_sparsity = global_sparsity;
    plan.contrast_cap = contrast_cap;
    plan.granularity = report.granularity;
    for (std::size_t i = 0; i < count; ++i) {
        const double k = std::clamp(keep[i], 0.0, 1.0);
        plan.entries.push_back({report.per_layer[i].layer, k, 1.0 - k, layer_sizes[i]});
    }
    plan.validate_budget();
    return plan;
}

SparsityPlan uniform_plan(const std::vector<std::string>& layer_names,
                          const std::vector<std::size_t>& layer_sizes, double global_sparsity) {
    if (layer_names.size() != layer_sizes.size())
        fail(Errc::invalid_argument, "names and sizes must align");
    if (global_sparsity < 0.0 || global_sparsity > 1.0)
        fail(Errc::invalid_argument, "global sparsity must lie in [0,1]");
    SparsityPlan plan;
    plan.allocator = Allocator::uniform;
    plan.global_sparsity = global_sparsity;
    for (std::size_t i = 0; i < layer_names.size(); ++i)
        plan.entries.push_back(
            {layer_names[i], 1.0 - global_sparsity, global_sparsity, layer_sizes[i]});
    plan.validate_budget();
    return plan;
}

SparsityPlan plan_from_ratios(const std::vector<std::string>& layer_names,
                              const std::vector<std::size_t>& layer_sizes,
                              const std::vector<double>& sparsities) {
    if (layer_names.size() != layer_sizes.size() || layer_names.size() != sparsities.size())
        fail(Errc::invalid_argument, "names, sizes and sparsities must align");
    SparsityPlan plan;
    plan.allocator = Allocator::uniform;
    for (std::size_t i = 0; i < layer_names.size(); ++i) {
        if (sparsities[i] < 0.0 || sparsities[i] > 1.0)
            fail(Errc::invalid_argument, "sparsity out of [0,1]");
        plan.entries.push_back(
            {layer_names[i], 1.0 - sparsities[i], sparsities[i], layer_sizes[i]});
    }
    plan.global_sparsity = plan.weighted_mean_sparsity();
    return plan;
}

SparsityPlan global_threshold_plan(const std::vector<std::string>& layer_names,
                                   const std::vector<std::size_t>& layer_sizes,
                                   double global_sparsity) {
    if (layer_names.size() != layer_sizes.size())
        fail(Errc::invalid_argument, "names and sizes must align");
    if (global_sparsity < 0.0 || global_sparsity > 1.0)
        fail(Errc::invalid_argument, "global sparsity must lie in [0,1]");
    SparsityPlan plan;
    plan.allocator = Allocator::global_threshold;
    plan.global_sparsity = global_sparsity;
    for (std::size_t i = 0; i < layer_names.size(); ++i)
        plan.entries.push_back(
            {layer_names[i], 1.0 - global_sparsity, global_sparsity, layer_sizes[i]});
    return plan;
}

} // namespace autoprune::sdsa
