// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "autoprune/bundle.hpp"
#include "autoprune/matrix.hpp"

namespace testutil {

inline std::filesystem::path fixture_dir() { return AUTOPRUNE_FIXTURE_DIR; }
inline std::filesystem::path asset_dir() { return AUTOPRUNE_ASSET_DIR; }

/// splitmix64: tiny, seedable, identical on every platform. Tests use this
/// instead of <random> distributions so fixtures do not depend on the
/// standard library's sampling algorithms.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

    double normal() {
        // Box-Muller; discard the second deviate to keep state simple.
        double u1 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    double lognormal(double mu, double sigma) { return std::exp(mu + sigma * normal()); }

  private:
    std::uint64_t state_;
};

/// Values are quantized to float32 like anything loaded from a bundle file,
/// so save/load round trips stay element-exact.
inline autoprune::Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols,
                                       double scale = 1.0) {
    autoprune::Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = double(float(scale * rng.normal()));
    return m;
}

/// Heavy right tail of magnitudes: log-normal draw with a random sign.
inline autoprune::Matrix heavy_tailed_matrix(Rng& rng, std::size_t rows, std::size_t cols,
                                             double sigma, double scale) {
    autoprune::Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) {
        const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        m.data()[i] = double(float(sign * scale * rng.lognormal(0.0, sigma)));
    }
    return m;
}

inline autoprune::Topology tiny_topology() {
    return {.vocab_size = 64,
            .d_model = 32,
            .n_heads = 2,
            .n_blocks = 2,
            .d_mlp = 64,
            .max_seq_len = 64};
}

/// Random but well-formed bundle; weight_scale keeps activations tame.
/// `heavy_layers` lists prunable layer indices that get heavy-tailed weights
/// of `heavy_scale` magnitude instead of Gaussian ones.
inline autoprune::ModelBundle random_bundle(Rng& rng, const autoprune::Topology& topo,
                                            const std::vector<std::size_t>& heavy_layers = {},
                                            double heavy_sigma = 1.4, double heavy_scale = 1.0,
                                            double weight_scale = 0.15) {
    using namespace autoprune;
    ModelBundle b;
    b.topology = topo;
    b.embedding = random_matrix(rng, topo.vocab_size, topo.d_model, 0.5);
    auto is_heavy = [&](std::size_t idx) {
        for (std::size_t h : heavy_layers)
            if (h == idx) return true;
        return false;
    };
    for (std::size_t blk = 0; blk < topo.n_blocks; ++blk) {
        BlockNorms norms;
        norms.ln1_scale.assign(topo.d_model, 1.0);
        norms.ln1_bias.assign(topo.d_model, 0.0);
        norms.ln2_scale.assign(topo.d_model, 1.0);
        norms.ln2_bias.assign(topo.d_model, 0.0);
        b.block_norms.push_back(norms);
        for (int k = 0; k < kLayerKindsPerBlock; ++k) {
            LayerRecord rec;
            rec.kind = LayerKind(k);
            rec.name = ModelBundle::layer_name(blk, rec.kind);
            rec.index = b.layers.size();
            const std::size_t rows = rec.kind == LayerKind::mlp_in ? topo.d_mlp : topo.d_model;
            const std::size_t cols = rec.kind == LayerKind::mlp_out ? topo.d_mlp : topo.d_model;
            rec.weight = is_heavy(rec.index)
                             ? heavy_tailed_matrix(rng, rows, cols, heavy_sigma, heavy_scale)
                             : random_matrix(rng, rows, cols, weight_scale);
            b.layers.push_back(std::move(rec));
        }
    }
    b.final_scale.assign(topo.d_model, 1.0);
    b.final_bias.assign(topo.d_model, 0.0);
    b.head = random_matrix(rng, topo.vocab_size, topo.d_model, 0.5);
    b.validate();
    return b;
}

inline autoprune::TokenCorpus random_corpus(Rng& rng, std::size_t length, std::uint32_t vocab) {
    autoprune::TokenCorpus c;
    c.tokens.reserve(length);
    for (std::size_t i = 0; i < length; ++i)
        c.tokens.push_back(std::uint32_t(rng.below(vocab)));
    return c;
}

inline std::vector<unsigned char> read_bytes(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::vector<unsigned char>((std::istreambuf_iterator<char>(f)),
                                      std::istreambuf_iterator<char>());
}

inline std::string read_text(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

} // namespace testutil
