// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "autoprune/bundle.hpp"
#include "autoprune/matrix.hpp"

namespace autoprune::stats {

enum class Granularity { per_layer, per_block };

struct SkewnessEntry {
    std::string layer;
    double gamma = 0.0;       // raw magnitude skewness
    double gamma_tilde = 0.0; // center/range-normalized, in [-1, 1]
};

struct SkewnessReport {
    std::vector<SkewnessEntry> per_layer;
    double mean_gamma = 0.0;
    double delta_gamma = 0.0;       // max_j |gamma_j - mean|
    double delta_gamma_tilde = 0.0; // max gamma_tilde - min gamma_tilde
    Granularity granularity = Granularity::per_layer;

    std::string to_csv() const;
    std::string to_json() const;
};

/// Biased sample skewness of the absolute values: the standardized third
/// central moment with 1/n weighting and no small-sample correction. Returns
/// 0 when the magnitude distribution is (numerically) constant.
double magnitude_skewness(std::span<const double> values);

/// gamma_tilde = (gamma - mean) / (max_j |gamma_j - mean| + eps).
std::vector<double> normalize_skewness(const std::vector<double>& gammas, double eps = 1e-8);

SkewnessReport skewness_report(const ModelBundle& bundle,
                               Granularity granularity = Granularity::per_layer,
                               double eps = 1e-8);

struct LayerActivationStats {
    std::vector<double> col_l1;   // ||X_:j||_1
    std::vector<double> col_l2;   // ||X_:j||_2
    std::vector<double> col_l2sq; // ||X_:j||_2^2
    std::optional<std::vector<double>> hess_diag; // diag[(X^T X + lambda I)^-1]
    std::optional<Matrix> raw;    // X itself, tokens x d_in

    std::size_t d_in() const { return col_l1.size(); }
};

struct ActivationStats {
    std::map<std::string, LayerActivationStats> per_layer;
};

struct ActivationStatsOptions {
    // Damping added to the Gram diagonal before inversion. When unset, uses
    // 0.01 x mean Gram diagonal per layer.
    std::optional<double> lambda;
    bool keep_raw = false;
    bool with_hess_diag = false;
};

LayerActivationStats compute_layer_stats(const Matrix& activations,
                                         const ActivationStatsOptions& opts);

ActivationStats compute_activation_stats(const std::map<std::string, Matrix>& raw_activations,
                                         const ActivationStatsOptions& opts);

/// Inverts a symmetric positive-definite matrix (dense Cholesky). Throws
/// SingularGram when a pivot is not strictly positive.
std::vector<double> spd_inverse_diag(const Matrix& spd);

} // namespace autoprune::stats
