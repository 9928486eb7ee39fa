// SPDX-License-Identifier: Apache-2.0

#include "autoprune/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

namespace autoprune::stats {
namespace {

// m2 below this is treated as a constant magnitude distribution.
constexpr double kDegenerateM2 = 1e-24;

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

double magnitude_skewness(std::span<const double> values) {
    if (values.empty()) fail(Errc::invalid_argument, "skewness of empty value set");
    const double n = double(values.size());
    double mean = 0.0;
    for (double v : values) mean += std::abs(v);
    mean /= n;
    double m2 = 0.0, m3 = 0.0;
    for (double v : values) {
        const double d = std::abs(v) - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= n;
    m3 /= n;
    if (m2 < kDegenerateM2) return 0.0;
    return m3 / (m2 * std::sqrt(m2));
}

std::vector<double> normalize_skewness(const std::vector<double>& gammas, double eps) {
    if (gammas.empty()) fail(Errc::invalid_argument, "normalize_skewness needs at least one layer");
    double mean = 0.0;
    for (double g : gammas) mean += g;
    mean /= double(gammas.size());
    double range = 0.0;
    for (double g : gammas) range = std::max(range, std::abs(g - mean));
    std::vector<double> out(gammas.size());
    for (std::size_t i = 0; i < gammas.size(); ++i) out[i] = (gammas[i] - mean) / (range + eps);
    return out;
}

SkewnessReport skewness_report(const ModelBundle& bundle, Granularity granularity, double eps) {
    SkewnessReport report;
    report.granularity = granularity;

    std::vector<std::string> names;
    std::vector<double> gammas;
    if (granularity == Granularity::per_layer) {
        for (const LayerRecord& rec : bundle.layers) {
            names.push_back(rec.name);
            gammas.push_back(magnitude_skewness(rec.weight.values()));
        }
    } else {
        for (std::size_t b = 0; b < bundle.topology.n_blocks; ++b) {
            std::vector<double> pooled;
            for (int k = 0; k < kLayerKindsPerBlock; ++k) {
                const auto& w = bundle.layer(b, LayerKind(k)).weight.values();
                pooled.insert(pooled.end(), w.begin(), w.end());
            }
            names.push_back(ModelBundle::block_name(b));
            gammas.push_back(magnitude_skewness(pooled));
        }
    }

    const std::vector<double> tilde = normalize_skewness(gammas, eps);
    double mean = 0.0;
    for (double g : gammas) mean += g;
    mean /= double(gammas.size());
    double range = 0.0;
    for (double g : gammas) range = std::max(range, std::abs(g - mean));

    report.mean_gamma = mean;
    report.delta_gamma = range;
    report.delta_gamma_tilde =
        *std::max_element(tilde.begin(), tilde.end()) - *std::min_element(tilde.begin(), tilde.end());
    for (std::size_t i = 0; i < names.size(); ++i)
        report.per_layer.push_back({names[i], gammas[i], tilde[i]});
    return report;
}

std::string SkewnessReport::to_csv() const {
    std::ostringstream out;
    out << "layer,gamma,gamma_tilde\n";
    for (const SkewnessEntry& e : per_layer)
        out << e.layer << "," << fmt_double(e.gamma) << "," << fmt_double(e.gamma_tilde) << "\n";
    return out.str();
}

std::string SkewnessReport::to_json() const {
    nlohmann::json j;
    j["granularity"] = granularity == Granularity::per_layer ? "per_layer" : "per_block";
    j["mean_gamma"] = mean_gamma;
    j["delta_gamma"] = delta_gamma;
    j["delta_gamma_tilde"] = delta_gamma_tilde;
    auto arr = nlohmann::json::array();
    for (const SkewnessEntry& e : per_layer)
        arr.push_back({{"layer", e.layer}, {"gamma", e.gamma}, {"gamma_tilde", e.gamma_tilde}});
    j["per_layer"] = arr;
    return j.dump(2) + "\n";
}

std::vector<double> spd_inverse_diag(const Matrix& spd) {
    const std::size_t d = spd.rows();
    if (spd.cols() != d) fail(Errc::dimension_mismatch, "matrix must be square");

    // Cholesky factorization spd = L L^T.
    Matrix l(d, d);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double acc = spd(i, j);
            for (std::size_t k = 0; k < j; ++k) acc -= l(i, k) * l(j, k);
            if (i == j) {
                if (acc <= 0.0)
                    fail(Errc::singular_gram, "Gram matrix is not positive definite");
                l(i, i) = std::sqrt(acc);
            } else {
                l(i, j) = acc / l(j, j);
            }
        }
    }

    // diag(A^-1)_j = || L^-1 e_j ||^2 via forward substitution per column.
    std::vector<double> diag(d, 0.0);
    std::vector<double> y(d);
    for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t i = 0; i < d; ++i) {
            double acc = (i == j) ? 1.0 : 0.0;
            for (std::size_t k = j; k < i; ++k) acc -= l(i, k) * y[k];
            y[i] = (i >= j) ? acc / l(i, i) : 0.0;
        }
        // A^-1 = L^-T L^-1, so diag entry j needs the full back substitution.
        // Solve L^T z = y, then diag[j] = z[j].
        std::vector<double> z(d);
        for (std::size_t ii = d; ii-- > 0;) {
            double acc = y[ii];
            for (std::size_t k = ii + 1; k < d; ++k) acc -= l(k, ii) * z[k];
            z[ii] = acc / l(ii, ii);
        }
        diag[j] = z[j];
    }
    return diag;
}

LayerActivationStats compute_layer_stats(const Matrix& x, const ActivationStatsOptions& opts) {
    const std::size_t n = x.rows(), d = x.cols();
    if (n == 0 || d == 0) fail(Errc::invalid_argument, "activation matrix is empty");

    LayerActivationStats out;
    out.col_l1.assign(d, 0.0);
    out.col_l2sq.assign(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = x.row(i);
        for (std::size_t j = 0; j < d; ++j) {
            out.col_l1[j] += std::abs(row[j]);
            out.col_l2sq[j] += row[j] * row[j];
        }
    }
    out.col_l2.resize(d);
    for (std::size_t j = 0; j < d; ++j) out.col_l2[j] = std::sqrt(out.col_l2sq[j]);

    if (opts.with_hess_diag) {
        Matrix gram(d, d);
        for (std::size_t i = 0; i < n; ++i) {
            const double* row = x.row(i);
            for (std::size_t a = 0; a < d; ++a)
                for (std::size_t b = a; b < d; ++b) gram(a, b) += row[a] * row[b];
        }
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = 0; b < a; ++b) gram(a, b) = gram(b, a);

        double lambda;
        if (opts.lambda) {
            lambda = *opts.lambda;
            if (lambda < 0.0) fail(Errc::invalid_argument, "lambda must be non-negative");
        } else {
            double trace = 0.0;
            for (std::size_t a = 0; a < d; ++a) trace += gram(a, a);
            lambda = 0.01 * trace / double(d);
        }
        for (std::size_t a = 0; a < d; ++a) gram(a, a) += lambda;
        out.hess_diag = spd_inverse_diag(gram);
    }
    if (opts.keep_raw) out.raw = x;
    return out;
}

ActivationStats compute_activation_stats(const std::map<std::string, Matrix>& raw_activations,
                                         const ActivationStatsOptions& opts) {
    ActivationStats stats;
    for (const auto& [name, x] : raw_activations)
        stats.per_layer.emplace(name, compute_layer_stats(x, opts));
    return stats;
}

} // namespace autoprune::stats
