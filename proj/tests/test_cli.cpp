// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "autoprune/cli.hpp"
#include "autoprune/model_eval.hpp"
#include "testutil.hpp"

using namespace autoprune;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Self-contained sandbox: a bundle with planted heavy-tailed q/k layers plus
/// calibration and eval corpora, written to a temp directory.
struct CliSandbox {
    fs::path root;
    fs::path bundle_dir;
    fs::path calib;
    fs::path eval_corpus;

    CliSandbox() {
        root = fs::temp_directory_path() / "autoprune_cli_sandbox";
        fs::remove_all(root);
        fs::create_directories(root);
        testutil::Rng rng(31415);
        const ModelBundle bundle =
            testutil::random_bundle(rng, testutil::tiny_topology(), {0, 7}, 1.5, 1.2);
        bundle_dir = root / "bundle";
        save_bundle(bundle, bundle_dir);
        calib = root / "calib.bin";
        eval_corpus = root / "eval.bin";
        save_corpus(testutil::random_corpus(rng, 4096, 64), calib);
        save_corpus(testutil::random_corpus(rng, 4096, 64), eval_corpus);
    }
};

int run(const std::vector<std::string>& args) { return cli::run_command(args); }

std::vector<std::string> base_args(const CliSandbox& sb, const std::string& sub,
                                   const fs::path& out) {
    return {sub,
            "--bundle", sb.bundle_dir.string(),
            "--calib", sb.calib.string(),
            "--eval-corpus", sb.eval_corpus.string(),
            "--nsamples", "8",
            "--out", out.string()};
}

std::size_t csv_rows(const fs::path& p) {
    const std::string text = testutil::read_text(p);
    std::size_t lines = 0;
    for (char c : text) lines += c == '\n' ? 1 : 0;
    return lines - 1; // minus header
}

} // namespace

TEST_CASE("analyze emits the skewness table") {
    CliSandbox sb;
    const fs::path out = sb.root / "analyze";
    REQUIRE(run(base_args(sb, "analyze", out)) == 0);
    CHECK(csv_rows(out / "skewness.csv") == 12);
    const json report = json::parse(testutil::read_text(out / "skewness.json"));
    for (const auto& row : report.at("result").at("per_layer")) {
        const double gt = row.at("gamma_tilde").get<double>();
        CHECK(gt >= -1.0);
        CHECK(gt <= 1.0);
    }
    CHECK(report.contains("config")); // resolved config embedded
}

TEST_CASE("prune at zero sparsity copies the tensors bit for bit") {
    CliSandbox sb;
    const fs::path out = sb.root / "prune0";
    auto args = base_args(sb, "prune", out);
    args.insert(args.end(), {"--sparsity", "0", "--metric", "magnitude"});
    REQUIRE(run(args) == 0);
    CHECK(testutil::read_bytes(sb.bundle_dir / "tensors.bin") ==
          testutil::read_bytes(out / "pruned_bundle" / "tensors.bin"));
}

TEST_CASE("prune writes a report consistent with the masks") {
    CliSandbox sb;
    const fs::path out = sb.root / "prune50";
    auto args = base_args(sb, "prune", out);
    args.insert(args.end(), {"--sparsity", "0.5", "--metric", "wanda", "--allocator", "uniform"});
    REQUIRE(run(args) == 0);
    const json report = json::parse(testutil::read_text(out / "prune_report.json"));
    CHECK(report.at("result").at("overall").at("achieved_sparsity").get<double>() ==
          doctest::Approx(0.5).epsilon(1e-12));
    // The input bundle is untouched.
    const ModelBundle original = load_bundle(sb.bundle_dir);
    std::size_t zeros = 0;
    for (const auto& rec : original.layers)
        for (double v : rec.weight.values()) zeros += v == 0.0 ? 1 : 0;
    CHECK(zeros == 0);
}

TEST_CASE("eval reports fitness for both modes") {
    CliSandbox sb;
    {
        const fs::path out = sb.root / "eval_recon";
        auto args = base_args(sb, "eval", out);
        args.insert(args.end(), {"--sparsity", "0.5", "--fitness", "recon"});
        REQUIRE(run(args) == 0);
        const json r = json::parse(testutil::read_text(out / "fitness.json"));
        CHECK(r.at("result").at("mode") == "reconstruction");
        CHECK(r.at("result").at("value").get<double>() > 0.0);
    }
    {
        const fs::path out = sb.root / "eval_ppl";
        auto args = base_args(sb, "eval", out);
        args.insert(args.end(), {"--sparsity", "0.5", "--fitness", "ppl"});
        REQUIRE(run(args) == 0);
        const json r = json::parse(testutil::read_text(out / "fitness.json"));
        CHECK(r.at("result").at("mode") == "perplexity");
        CHECK(r.at("result").at("value").get<double>() >= 1.0);
    }
}

TEST_CASE("sensitivity grid is complete") {
    CliSandbox sb;
    const fs::path out = sb.root / "sens";
    auto args = base_args(sb, "sensitivity", out);
    args.insert(args.end(), {"--metric", "wanda"});
    REQUIRE(run(args) == 0);
    CHECK(csv_rows(out / "sensitivity.csv") == 24); // 12 layers x {0, 0.5}
}

TEST_CASE("search runs offline with the fixture generator") {
    CliSandbox sb;
    const fs::path out = sb.root / "search";
    auto args = base_args(sb, "search", out);
    args.insert(args.end(), {"--sparsity", "0.5", "--seed", "1"});
    REQUIRE(run(args) == 0);
    const json graph = json::parse(testutil::read_text(out / "graph.json"));
    CHECK(graph.at("nodes").size() == 1 + 3 + 9 + 9); // default {1,3,3,1}
    CHECK(!graph.at("best").is_null());
    const std::string best = testutil::read_text(out / "best_metric.txt");
    CHECK(!best.empty());
    CHECK_NOTHROW(dsl::parse_metric(best.substr(0, best.size() - 1)));
}

TEST_CASE("bench compares allocators and seeds reproducibly") {
    CliSandbox sb;
    const fs::path out1 = sb.root / "bench1";
    auto mk = [&](const fs::path& out) {
        auto args = base_args(sb, "bench", out);
        args.insert(args.end(), {"--seed", "3"});
        // A single sparsity keeps the runtime low; 0.7 is the interesting regime.
        const fs::path cfg = sb.root / "bench_cfg.json";
        std::ofstream(cfg) << R"({"bench_sparsities": [0.7]})";
        args.insert(args.end(), {"--config", cfg.string()});
        return args;
    };
    REQUIRE(run(mk(out1)) == 0);
    const auto csv_first = testutil::read_bytes(out1 / "bench.csv");
    const auto json_first = testutil::read_bytes(out1 / "bench.json");

    // Byte-identical reports when the identical config + seed runs again.
    REQUIRE(run(mk(out1)) == 0);
    CHECK(testutil::read_bytes(out1 / "bench.csv") == csv_first);
    CHECK(testutil::read_bytes(out1 / "bench.json") == json_first);

    // SDSA beats uniform on the planted-heavy-tail sandbox at 0.7 (wanda rows).
    const json rows = json::parse(testutil::read_text(out1 / "bench.json")).at("result");
    double sdsa = -1.0, uniform = -1.0;
    for (const auto& row : rows) {
        if (row.at("metric") != "wanda") continue;
        if (row.at("allocator") == "sdsa") sdsa = row.at("fitness").get<double>();
        if (row.at("allocator") == "uniform") uniform = row.at("fitness").get<double>();
    }
    REQUIRE(sdsa > 0.0);
    REQUIRE(uniform > 0.0);
    CHECK(sdsa < uniform);
}

TEST_CASE("config file merges under flags") {
    CliSandbox sb;
    const fs::path cfg_path = sb.root / "cfg.json";
    json cfg = {{"bundle", sb.bundle_dir.string()},
                {"calib_corpus", sb.calib.string()},
                {"sparsity", 0.25},
                {"metric", "magnitude"},
                {"nsamples", 8},
                {"out", (sb.root / "cfg_out").string()}};
    std::ofstream(cfg_path) << cfg.dump();

    // Flag overrides the file's sparsity.
    REQUIRE(run({"allocate", "--config", cfg_path.string(), "--sparsity", "0.4", "--allocator",
                 "uniform"}) == 0);
    const json plan = json::parse(testutil::read_text(sb.root / "cfg_out" / "plan.json"));
    CHECK(plan.at("result").at("global_sparsity").get<double>() == 0.4);
    CHECK(plan.at("config").at("sparsity").get<double>() == 0.4);
}

TEST_CASE("config validation failures name the field") {
    CliSandbox sb;
    CHECK(run({"analyze", "--bundle", "/nonexistent/path"}) == 2);
    CHECK(run({"analyze", "--bundle", sb.bundle_dir.string(), "--sparsity", "1.5"}) == 2);
    CHECK(run({"prune", "--bundle", sb.bundle_dir.string(), "--sparsity", "0.5", "--metric",
               "wanda"}) == 2); // wanda without a calibration corpus
    CHECK(run({"nonsense"}) != 0);
}

TEST_CASE("block granularity plans") {
    CliSandbox sb;
    const fs::path out = sb.root / "block_plan";
    auto args = base_args(sb, "allocate", out);
    args.insert(args.end(), {"--granularity", "block", "--sparsity", "0.6"});
    REQUIRE(run(args) == 0);
    CHECK(csv_rows(out / "plan.csv") == 2);
    const json plan = json::parse(testutil::read_text(out / "plan.json"));
    CHECK(plan.at("result").at("granularity") == "per_block");
    CHECK(plan.at("config").at("contrast_cap").get<double>() == 1.5);
}
