// SPDX-License-Identifier: Apache-2.0

#include "autoprune/bundle.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

namespace autoprune {
namespace {

using nlohmann::json;

constexpr int kFormatVersion = 1;

double f32_from_le(const unsigned char* p) {
    std::uint32_t bits = std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 |
                         std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
    float f;
    std::memcpy(&f, &bits, sizeof(f));
    return double(f);
}

void f32_to_le(double v, unsigned char* p) {
    float f = float(v);
    if (!std::isfinite(f)) fail(Errc::non_finite, "value not representable as finite float32");
    std::uint32_t bits;
    std::memcpy(&bits, &f, sizeof(bits));
    p[0] = bits & 0xff;
    p[1] = (bits >> 8) & 0xff;
    p[2] = (bits >> 16) & 0xff;
    p[3] = (bits >> 24) & 0xff;
}

struct TensorDecl {
    std::string name;
    std::string kind;
    std::vector<std::size_t> shape;

    std::size_t count() const {
        std::size_t n = 1;
        for (std::size_t d : shape) n *= d;
        return n;
    }
};

std::vector<std::size_t> prunable_shape(const Topology& t, LayerKind kind) {
    switch (kind) {
        case LayerKind::mlp_in: return {t.d_mlp, t.d_model};
        case LayerKind::mlp_out: return {t.d_model, t.d_mlp};
        default: return {t.d_model, t.d_model};
    }
}

/// Canonical tensor layout: embedding, then per block the two norms bracketing
/// the six projections, then the final norm and optional head.
std::vector<TensorDecl> canonical_tensors(const Topology& t, bool tied_head) {
    std::vector<TensorDecl> out;
    out.push_back({"embedding", "embedding", {t.vocab_size, t.d_model}});
    for (std::size_t b = 0; b < t.n_blocks; ++b) {
        const std::string blk = ModelBundle::block_name(b);
        out.push_back({blk + ".ln1.scale", "norm_scale", {t.d_model}});
        out.push_back({blk + ".ln1.bias", "norm_bias", {t.d_model}});
        for (int k = 0; k < 4; ++k) {
            LayerKind kind = LayerKind(k);
            out.push_back({ModelBundle::layer_name(b, kind), layer_kind_name(kind),
                           prunable_shape(t, kind)});
        }
        out.push_back({blk + ".ln2.scale", "norm_scale", {t.d_model}});
        out.push_back({blk + ".ln2.bias", "norm_bias", {t.d_model}});
        out.push_back({ModelBundle::layer_name(b, LayerKind::mlp_in), "mlp_in",
                       prunable_shape(t, LayerKind::mlp_in)});
        out.push_back({ModelBundle::layer_name(b, LayerKind::mlp_out), "mlp_out",
                       prunable_shape(t, LayerKind::mlp_out)});
    }
    out.push_back({"final_norm.scale", "norm_scale", {t.d_model}});
    out.push_back({"final_norm.bias", "norm_bias", {t.d_model}});
    if (!tied_head) out.push_back({"head", "head", {t.vocab_size, t.d_model}});
    return out;
}

std::vector<double> take_vector(const std::vector<double>& flat, std::size_t offset,
                                std::size_t count) {
    return std::vector<double>(flat.begin() + long(offset), flat.begin() + long(offset + count));
}

} // namespace

const char* layer_kind_name(LayerKind kind) {
    switch (kind) {
        case LayerKind::attention_q: return "attention_q";
        case LayerKind::attention_k: return "attention_k";
        case LayerKind::attention_v: return "attention_v";
        case LayerKind::attention_o: return "attention_o";
        case LayerKind::mlp_in: return "mlp_in";
        case LayerKind::mlp_out: return "mlp_out";
    }
    return "?";
}

LayerKind layer_kind_from_name(const std::string& name) {
    for (int k = 0; k < kLayerKindsPerBlock; ++k)
        if (name == layer_kind_name(LayerKind(k))) return LayerKind(k);
    fail(Errc::bad_manifest, "unknown layer kind '" + name + "'");
}

std::string ModelBundle::block_name(std::size_t block) {
    return "block" + std::to_string(block);
}

std::string ModelBundle::layer_name(std::size_t block, LayerKind kind) {
    static const char* suffix[] = {"attn_q", "attn_k", "attn_v", "attn_o", "mlp_in", "mlp_out"};
    return block_name(block) + "." + suffix[int(kind)];
}

const LayerRecord& ModelBundle::layer(std::size_t block, LayerKind kind) const {
    return layers.at(block * kLayerKindsPerBlock + std::size_t(kind));
}

void ModelBundle::validate() const {
    const Topology& t = topology;
    if (t.vocab_size == 0 || t.d_model == 0 || t.n_heads == 0 || t.n_blocks == 0 ||
        t.d_mlp == 0 || t.max_seq_len == 0)
        fail(Errc::bad_manifest, "topology fields must be positive");
    if (t.d_model % t.n_heads != 0)
        fail(Errc::bad_manifest, "d_model must be divisible by n_heads");
    if (layers.size() != t.n_blocks * kLayerKindsPerBlock)
        fail(Errc::shape_mismatch, "bundle must hold 6 prunable layers per block");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const LayerRecord& rec = layers[i];
        const std::size_t block = i / kLayerKindsPerBlock;
        const LayerKind kind = LayerKind(i % kLayerKindsPerBlock);
        if (rec.index != i || rec.kind != kind || rec.name != layer_name(block, kind))
            fail(Errc::shape_mismatch, "layer ordering must be block-major then kind-major");
        auto shape = prunable_shape(t, kind);
        if (rec.weight.rows() != shape[0] || rec.weight.cols() != shape[1])
            fail(Errc::shape_mismatch, "layer '" + rec.name + "' has wrong shape");
    }
    if (embedding.rows() != t.vocab_size || embedding.cols() != t.d_model)
        fail(Errc::shape_mismatch, "embedding shape inconsistent with topology");
    if (block_norms.size() != t.n_blocks)
        fail(Errc::shape_mismatch, "need one norm set per block");
    for (const BlockNorms& n : block_norms)
        if (n.ln1_scale.size() != t.d_model || n.ln1_bias.size() != t.d_model ||
            n.ln2_scale.size() != t.d_model || n.ln2_bias.size() != t.d_model)
            fail(Errc::shape_mismatch, "block norm vectors must have length d_model");
    if (final_scale.size() != t.d_model || final_bias.size() != t.d_model)
        fail(Errc::shape_mismatch, "final norm vectors must have length d_model");
    if (head && (head->rows() != t.vocab_size || head->cols() != t.d_model))
        fail(Errc::shape_mismatch, "head shape inconsistent with topology");
}

ModelBundle load_bundle(const std::filesystem::path& dir) {
    const auto manifest_path = dir / "manifest.json";
    std::ifstream mf(manifest_path);
    if (!mf) fail(Errc::missing_manifest, "cannot open " + manifest_path.string());
    json manifest;
    try {
        manifest = json::parse(mf);
    } catch (const json::exception& e) {
        fail(Errc::bad_manifest, std::string("manifest is not valid JSON: ") + e.what());
    }

    if (!manifest.contains("format_version") || !manifest["format_version"].is_number_integer())
        fail(Errc::bad_manifest, "manifest lacks integer format_version");
    if (manifest["format_version"].get<int>() != kFormatVersion)
        fail(Errc::unknown_version,
             "unsupported format_version " + manifest["format_version"].dump());

    Topology topo;
    try {
        const json& t = manifest.at("topology");
        topo.vocab_size = t.at("vocab_size").get<std::size_t>();
        topo.d_model = t.at("d_model").get<std::size_t>();
        topo.n_heads = t.at("n_heads").get<std::size_t>();
        topo.n_blocks = t.at("n_blocks").get<std::size_t>();
        topo.d_mlp = t.at("d_mlp").get<std::size_t>();
        topo.max_seq_len = t.at("max_seq_len").get<std::size_t>();
    } catch (const json::exception& e) {
        fail(Errc::bad_manifest, std::string("bad topology: ") + e.what());
    }
    const bool tied = manifest.value("tied_head", false);

    const auto expected = canonical_tensors(topo, tied);
    const json& table = manifest.contains("tensors") ? manifest["tensors"] : json::array();
    if (!table.is_array() || table.size() != expected.size())
        fail(Errc::bad_manifest, "tensor table must list all " +
                                     std::to_string(expected.size()) + " tensors");

    std::size_t running_offset = 0;
    for (std::size_t i = 0; i < expected.size(); ++i) {
        const json& e = table[i];
        const TensorDecl& want = expected[i];
        if (e.value("name", "") != want.name)
            fail(Errc::bad_manifest, "tensor " + std::to_string(i) + " must be named '" +
                                         want.name + "'");
        if (e.value("kind", "") != want.kind)
            fail(Errc::bad_manifest, "tensor '" + want.name + "' has wrong kind");
        std::vector<std::size_t> shape = e.value("shape", std::vector<std::size_t>{});
        if (shape != want.shape)
            fail(Errc::shape_mismatch, "tensor '" + want.name + "' has unexpected shape");
        if (e.value("byte_offset", std::size_t(-1)) != running_offset)
            fail(Errc::shape_mismatch, "tensor '" + want.name + "' offset breaks concatenation");
        running_offset += want.count() * 4;
    }

    const auto data_path = dir / "tensors.bin";
    std::ifstream df(data_path, std::ios::binary);
    if (!df) fail(Errc::io_failure, "cannot open " + data_path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(df)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() != running_offset)
        fail(Errc::shape_mismatch, "tensors.bin holds " + std::to_string(bytes.size() / 4) +
                                       " floats, manifest declares " +
                                       std::to_string(running_offset / 4));

    std::vector<double> flat(bytes.size() / 4);
    for (std::size_t i = 0; i < flat.size(); ++i) {
        flat[i] = f32_from_le(bytes.data() + i * 4);
        if (!std::isfinite(flat[i]))
            fail(Errc::non_finite, "tensor data contains a non-finite entry");
    }

    ModelBundle bundle;
    bundle.topology = topo;
    std::size_t cursor = 0;
    auto take_matrix = [&](const TensorDecl& d) {
        Matrix m(d.shape[0], d.shape.size() > 1 ? d.shape[1] : 1,
                 take_vector(flat, cursor, d.count()));
        cursor += d.count();
        return m;
    };
    auto take_vec = [&](const TensorDecl& d) {
        auto v = take_vector(flat, cursor, d.count());
        cursor += d.count();
        return v;
    };

    std::size_t ti = 0;
    bundle.embedding = take_matrix(expected[ti++]);
    for (std::size_t b = 0; b < topo.n_blocks; ++b) {
        BlockNorms norms;
        norms.ln1_scale = take_vec(expected[ti++]);
        norms.ln1_bias = take_vec(expected[ti++]);
        for (int k = 0; k < 4; ++k) {
            LayerRecord rec;
            rec.kind = LayerKind(k);
            rec.name = ModelBundle::layer_name(b, rec.kind);
            rec.index = bundle.layers.size();
            rec.weight = take_matrix(expected[ti++]);
            bundle.layers.push_back(std::move(rec));
        }
        norms.ln2_scale = take_vec(expected[ti++]);
        norms.ln2_bias = take_vec(expected[ti++]);
        for (int k = 4; k < kLayerKindsPerBlock; ++k) {
            LayerRecord rec;
            rec.kind = LayerKind(k);
            rec.name = ModelBundle::layer_name(b, rec.kind);
            rec.index = bundle.layers.size();
            rec.weight = take_matrix(expected[ti++]);
            bundle.layers.push_back(std::move(rec));
        }
        bundle.block_norms.push_back(std::move(norms));
    }
    bundle.final_scale = take_vec(expected[ti++]);
    bundle.final_bias = take_vec(expected[ti++]);
    if (!tied) bundle.head = take_matrix(expected[ti++]);

    bundle.validate();
    return bundle;
}

void save_bundle(const ModelBundle& bundle, const std::filesystem::path& dir) {
    bundle.validate();
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) fail(Errc::io_failure, "cannot create " + dir.string() + ": " + ec.message());

    const auto decls = canonical_tensors(bundle.topology, bundle.tied_head());

    std::vector<const double*> sources;
    std::vector<std::size_t> counts;
    auto add = [&](const double* p, std::size_t n) {
        sources.push_back(p);
        counts.push_back(n);
    };
    add(bundle.embedding.data(), bundle.embedding.size());
    for (std::size_t b = 0; b < bundle.topology.n_blocks; ++b) {
        const BlockNorms& n = bundle.block_norms[b];
        add(n.ln1_scale.data(), n.ln1_scale.size());
        add(n.ln1_bias.data(), n.ln1_bias.size());
        for (int k = 0; k < 4; ++k) {
            const Matrix& w = bundle.layer(b, LayerKind(k)).weight;
            add(w.data(), w.size());
        }
        add(n.ln2_scale.data(), n.ln2_scale.size());
        add(n.ln2_bias.data(), n.ln2_bias.size());
        for (int k = 4; k < kLayerKindsPerBlock; ++k) {
            const Matrix& w = bundle.layer(b, LayerKind(k)).weight;
            add(w.data(), w.size());
        }
    }
    add(bundle.final_scale.data(), bundle.final_scale.size());
    add(bundle.final_bias.data(), bundle.final_bias.size());
    if (!bundle.tied_head()) add(bundle.head->data(), bundle.head->size());

    json table = json::array();
    std::size_t offset = 0;
    for (std::size_t i = 0; i < decls.size(); ++i) {
        table.push_back({{"name", decls[i].name},
                         {"kind", decls[i].kind},
                         {"shape", decls[i].shape},
                         {"byte_offset", offset}});
        offset += counts[i] * 4;
    }

    json manifest = {
        {"format_version", kFormatVersion},
        {"tied_head", bundle.tied_head()},
        {"topology",
         {{"vocab_size", bundle.topology.vocab_size},
          {"d_model", bundle.topology.d_model},
          {"n_heads", bundle.topology.n_heads},
          {"n_blocks", bundle.topology.n_blocks},
          {"d_mlp", bundle.topology.d_mlp},
          {"max_seq_len", bundle.topology.max_seq_len}}},
        {"tensors", table},
    };

    std::ofstream mf(dir / "manifest.json");
    if (!mf) fail(Errc::io_failure, "cannot write manifest under " + dir.string());
    mf << manifest.dump(2) << "\n";
    if (!mf.flush()) fail(Errc::io_failure, "failed writing manifest");

    std::ofstream df(dir / "tensors.bin", std::ios::binary);
    if (!df) fail(Errc::io_failure, "cannot write tensors.bin under " + dir.string());
    std::vector<unsigned char> buf;
    for (std::size_t i = 0; i < sources.size(); ++i) {
        buf.resize(counts[i] * 4);
        for (std::size_t j = 0; j < counts[i]; ++j) f32_to_le(sources[i][j], buf.data() + j * 4);
        df.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size()));
    }
    if (!df.flush()) fail(Errc::io_failure, "failed writing tensors.bin");
}

TokenCorpus load_corpus(const std::filesystem::path& file) {
    std::ifstream f(file, std::ios::binary);
    if (!f) fail(Errc::io_failure, "cannot open " + file.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() % 4 != 0)
        fail(Errc::malformed_corpus, "token file length is not a multiple of 4 bytes");
    TokenCorpus corpus;
    corpus.tokens.resize(bytes.size() / 4);
    for (std::size_t i = 0; i < corpus.tokens.size(); ++i) {
        const unsigned char* p = bytes.data() + i * 4;
        corpus.tokens[i] = std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 |
                           std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
    }
    if (corpus.tokens.size() < 2)
        fail(Errc::empty_corpus, "corpus needs at least 2 tokens (one next-token target)");
    return corpus;
}

void save_corpus(const TokenCorpus& corpus, const std::filesystem::path& file) {
    std::ofstream f(file, std::ios::binary);
    if (!f) fail(Errc::io_failure, "cannot write " + file.string());
    std::vector<unsigned char> bytes(corpus.tokens.size() * 4);
    for (std::size_t i = 0; i < corpus.tokens.size(); ++i) {
        const std::uint32_t t = corpus.tokens[i];
        bytes[i * 4] = t & 0xff;
        bytes[i * 4 + 1] = (t >> 8) & 0xff;
        bytes[i * 4 + 2] = (t >> 16) & 0xff;
        bytes[i * 4 + 3] = (t >> 24) & 0xff;
    }
    f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!f.flush()) fail(Errc::io_failure, "failed writing corpus");
}

const char* errc_name(Errc code) {
    switch (code) {
        case Errc::missing_manifest: return "MissingManifest";
        case Errc::unknown_version: return "UnknownVersion";
        case Errc::bad_manifest: return "BadManifest";
        case Errc::shape_mismatch: return "ShapeMismatch";
        case Errc::non_finite: return "NonFinite";
        case Errc::io_failure: return "IoFailure";
        case Errc::empty_corpus: return "EmptyCorpus";
        case Errc::malformed_corpus: return "MalformedCorpus";
        case Errc::token_out_of_range: return "TokenOutOfRange";
        case Errc::invalid_argument: return "InvalidArgument";
        case Errc::singular_gram: return "SingularGram";
        case Errc::invalid_contrast_cap: return "InvalidContrastCap";
        case Errc::infeasible_budget: return "InfeasibleBudget";
        case Errc::syntax_error: return "SyntaxError";
        case Errc::shape_error: return "ShapeError";
        case Errc::dimension_mismatch: return "DimensionMismatch";
        case Errc::group_misaligned: return "GroupMisaligned";
        case Errc::missing_calibration: return "MissingCalibration";
        case Errc::missing_placeholder: return "MissingPlaceholder";
        case Errc::generator_failure: return "GeneratorFailure";
        case Errc::unparseable_candidate: return "UnparseableCandidate";
        case Errc::search_exhausted: return "SearchExhausted";
        case Errc::config_invalid: return "ConfigInvalid";
    }
    return "Error";
}

} // namespace autoprune
