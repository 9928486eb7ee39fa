// SPDX-License-Identifier: Apache-2.0

#include "autoprune/gcot.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "autoprune/prompts.hpp"
#include "autoprune/sdsa.hpp"

namespace autoprune::gcot {
namespace {

using nlohmann::json;

const char* placeholder_for(Stage s) {
    switch (s) {
        case Stage::analysis: return "{llm_description}";
        case Stage::hypothesis: return "{analysis_text}";
        case Stage::conceptual_formula: return "{hypothesis_text}";
        case Stage::computable_concept: return "{conceptual_formula}";
    }
    return "";
}

std::string context_key(Stage s) {
    const std::string p = placeholder_for(s);
    return p.substr(1, p.size() - 2);
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

/// First fenced block's inner text; falls back to the first line that parses.
std::string extract_expression_text(const std::string& content) {
    const std::string fence = "```";
    std::size_t open = content.find(fence);
    if (open != std::string::npos) {
        std::size_t body = content.find('\n', open + fence.size());
        if (body == std::string::npos) body = open + fence.size();
        std::size_t close = content.find(fence, body);
        if (close != std::string::npos) return trim(content.substr(body, close - body));
        return trim(content.substr(body));
    }
    std::istringstream lines(content);
    std::string line;
    while (std::getline(lines, line)) {
        const std::string t = trim(line);
        if (t.empty()) continue;
        try {
            (void)dsl::parse_metric(t);
            return t;
        } catch (const Error&) {
        }
    }
    return "";
}

} // namespace

const char* stage_name(Stage s) {
    switch (s) {
        case Stage::analysis: return "analysis";
        case Stage::hypothesis: return "hypothesis";
        case Stage::conceptual_formula: return "conceptual_formula";
        case Stage::computable_concept: return "computable_concept";
    }
    return "?";
}

Stage stage_from_name(const std::string& name) {
    for (std::size_t i = 0; i < kStageCount; ++i)
        if (name == stage_name(Stage(i))) return Stage(i);
    fail(Errc::invalid_argument, "unknown stage '" + name + "'");
}

Stage successor(Stage s) {
    if (s == Stage::computable_concept)
        fail(Errc::invalid_argument, "the final stage has no successor");
    return Stage(std::size_t(s) + 1);
}

const char* prompt_template(Stage s) {
    switch (s) {
        case Stage::analysis: return prompts::kAnalysis;
        case Stage::hypothesis: return prompts::kHypothesis;
        case Stage::conceptual_formula: return prompts::kConceptualFormula;
        case Stage::computable_concept: return prompts::kComputableConcept;
    }
    return "";
}

const char* dsl_instructions() { return prompts::kDslInstructions; }

std::string render_prompt(Stage s, const std::map<std::string, std::string>& context) {
    const std::string key = context_key(s);
    auto it = context.find(key);
    if (it == context.end())
        fail(Errc::missing_placeholder, "stage '" + std::string(stage_name(s)) +
                                            "' needs context entry '" + key + "'");
    std::string out = prompt_template(s);
    const std::string placeholder = placeholder_for(s);
    const std::size_t at = out.find(placeholder);
    if (at != std::string::npos) out.replace(at, placeholder.size(), it->second);
    if (s == Stage::computable_concept) {
        out += "\n";
        out += dsl_instructions();
    }
    return out;
}

std::vector<std::size_t> ReasoningGraph::nodes_at(Stage s) const {
    std::vector<std::size_t> out;
    for (const ReasoningNode& n : nodes)
        if (n.stage == s) out.push_back(n.id);
    return out;
}

std::string ReasoningGraph::to_json() const {
    json j;
    auto node_arr = json::array();
    for (const ReasoningNode& n : nodes) {
        json e = {{"id", n.id},
                  {"stage", stage_name(n.stage)},
                  {"temperature", n.temperature},
                  {"content", n.content},
                  {"failed", n.failed},
                  {"error", n.error}};
        e["parent"] = n.parent ? json(*n.parent) : json(nullptr);
        node_arr.push_back(std::move(e));
    }
    j["nodes"] = node_arr;
    auto cand_arr = json::array();
    for (const CandidateRecord& c : candidates) {
        json e = {{"leaf", c.leaf}, {"expression", c.expression}};
        if (c.fitness)
            e["fitness"] = {{"mode", eval::fitness_mode_name(c.fitness->mode)},
                            {"value", c.fitness->value}};
        else
            e["fitness"] = nullptr;
        e["failure"] = c.failure.empty() ? json(nullptr) : json(c.failure);
        cand_arr.push_back(std::move(e));
    }
    j["candidates"] = cand_arr;
    j["best"] = best ? json(*best) : json(nullptr);
    return j.dump(2) + "\n";
}

void SearchConfig::validate() const {
    for (std::size_t i = 0; i < kStageCount; ++i) {
        const StageConfig& sc = stages[i];
        if (sc.branch_factor < 1)
            fail(Errc::config_invalid, "branch factor must be >= 1 at every stage");
        if (sc.temperatures.size() != sc.branch_factor)
            fail(Errc::config_invalid,
                 std::string("stage '") + stage_name(Stage(i)) +
                     "' needs exactly one temperature per branch");
    }
    if (!(alpha > 0.0 && alpha < 1.0))
        fail(Errc::config_invalid, "search sparsity alpha must lie in (0,1)");
    if (contrast_cap <= 1.0) fail(Errc::config_invalid, "contrast cap must exceed 1");
    if (workers < 1) fail(Errc::config_invalid, "workers must be >= 1");
    if (fitness_mode == eval::FitnessMode::perplexity && generator == GeneratorKind::llm_endpoint &&
        llm.base_url.empty())
        fail(Errc::config_invalid, "llm_endpoint generator needs a base_url");
}

FixtureGenerator::FixtureGenerator(std::vector<std::string> candidates, std::uint64_t seed)
    : candidates_(std::move(candidates)), seed_(seed) {
    if (candidates_.empty())
        fail(Errc::invalid_argument, "fixture generator needs at least one candidate");
}

std::string FixtureGenerator::generate(Stage stage, const std::string&, double temperature) {
    const std::uint64_t n = counters_[std::size_t(stage)]++;
    char head[96];
    std::snprintf(head, sizeof(head), "Fixture %s #%llu (temperature %.2f)", stage_name(stage),
                  static_cast<unsigned long long>(n), temperature);
    switch (stage) {
        case Stage::analysis:
            return std::string(head) +
                   ": large-magnitude weights carry most of each layer's output energy, and "
                   "input columns with large calibration norms amplify whatever weights they "
                   "feed.";
        case Stage::hypothesis:
            return std::string(head) +
                   ": a weight's importance is the product of its magnitude and the scale of "
                   "the activations entering its input column.";
        case Stage::conceptual_formula:
            return std::string(head) + ": Importance(W, X) = |W| * g(X)";
        case Stage::computable_concept: {
            const std::string& expr = candidates_[(seed_ + n) % candidates_.size()];
            return std::string(head) +
                   ":\n- concept: weight_magnitude, inputs: W, output: |W|\n- concept: "
                   "activation_scale, inputs: X statistics, output: per-column scale\n- "
                   "concept: importance, inputs: the above, output: elementwise score\n\n```\n" +
                   expr + "\n```\n";
        }
    }
    return "";
}

std::vector<std::string> default_fixture_candidates() {
    return {
        "abs(W)",
        "abs(W) * coll2(X)",
        "abs(W) / rowl1(W) * sqrt(coll1(X) + coll2sq(X))",
        "abs(W) * sqrt(coll2sq(X))",
        "abs(W) * coll1(X)",
        "sq(W) * coll2sq(X)",
    };
}

std::vector<std::string> load_candidate_list(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) fail(Errc::io_failure, "cannot open candidate list " + file.string());
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        out.push_back(t);
    }
    if (out.empty()) fail(Errc::invalid_argument, "candidate list " + file.string() + " is empty");
    return out;
}

std::unique_ptr<CandidateGenerator> make_generator(const SearchConfig& config,
                                                   const std::filesystem::path& candidates_file) {
    if (config.generator == GeneratorKind::llm_endpoint)
        return std::make_unique<LlmClient>(config.llm);
    auto candidates = candidates_file.empty() ? default_fixture_candidates()
                                              : load_candidate_list(candidates_file);
    return std::make_unique<FixtureGenerator>(std::move(candidates), config.seed);
}

std::vector<std::size_t> expand_node(ReasoningGraph& graph, std::size_t node_id,
                                     const SearchConfig& config, CandidateGenerator& generator) {
    if (node_id >= graph.nodes.size()) fail(Errc::invalid_argument, "unknown node id");
    const ReasoningNode parent = graph.nodes[node_id];
    if (parent.stage == Stage::computable_concept)
        fail(Errc::invalid_argument, "cannot expand a final-stage node");
    const Stage child_stage = successor(parent.stage);
    const StageConfig& sc = config.stage(child_stage);

    const std::string prompt =
        render_prompt(child_stage, {{context_key(child_stage), parent.content}});

    std::vector<std::size_t> children;
    for (std::size_t b = 0; b < sc.branch_factor; ++b) {
        ReasoningNode node;
        node.id = graph.nodes.size();
        node.stage = child_stage;
        node.parent = node_id;
        node.temperature = sc.temperatures[b];
        try {
            node.content = generator.generate(child_stage, prompt, node.temperature);
        } catch (const Error& e) {
            node.failed = true;
            node.error = e.what();
        }
        children.push_back(node.id);
        graph.nodes.push_back(std::move(node));
    }
    return children;
}

dsl::ExprPtr parse_candidate(const std::string& leaf_content, std::size_t repair_budget,
                             CandidateGenerator& generator, const std::string& leaf_prompt,
                             double temperature, std::string* final_text) {
    std::string content = leaf_content;
    std::string last_error = "no expression found";
    for (std::size_t attempt = 0; attempt <= repair_budget; ++attempt) {
        const std::string text = extract_expression_text(content);
        if (!text.empty()) {
            try {
                dsl::ExprPtr expr = dsl::parse_metric(text);
                if (final_text) *final_text = dsl::pretty_print(expr);
                return expr;
            } catch (const Error& e) {
                last_error = e.what();
            }
        }
        if (attempt == repair_budget) break;
        const std::string repair_prompt =
            leaf_prompt +
            "\n\nYour previous answer could not be used: " + last_error +
            "\nRespond again with exactly one fenced code block containing a single expression "
            "in the given grammar.";
        try {
            content = generator.generate(Stage::computable_concept, repair_prompt, temperature);
        } catch (const Error& e) {
            last_error = e.what();
            break;
        }
    }
    fail(Errc::unparseable_candidate,
         "candidate could not be parsed after " + std::to_string(repair_budget) +
             " repair(s): " + last_error);
}

std::string describe_bundle(const ModelBundle& bundle) {
    const Topology& t = bundle.topology;
    std::ostringstream out;
    out << "Decoder-only transformer: vocab_size " << t.vocab_size << ", d_model " << t.d_model
        << ", " << t.n_blocks << " blocks, " << t.n_heads << " heads, d_mlp " << t.d_mlp
        << ", max_seq_len " << t.max_seq_len << "; " << bundle.layers.size()
        << " prunable projection matrices (q/k/v/o and the MLP pair per block); embeddings, "
           "norms and the output head are never pruned.";
    return out.str();
}

ReasoningGraph run_search(const SearchInputs& inputs, const SearchConfig& config,
                          CandidateGenerator& generator,
                          const std::optional<std::filesystem::path>& persist_to) {
    config.validate();
    if (!inputs.bundle || !inputs.calibration)
        fail(Errc::invalid_argument, "run_search needs a bundle and calibration statistics");
    if (config.fitness_mode == eval::FitnessMode::perplexity && !inputs.eval_corpus)
        fail(Errc::invalid_argument, "perplexity fitness needs an eval corpus");

    const ModelBundle& bundle = *inputs.bundle;
    ReasoningGraph graph;

    // Roots: one analysis node per configured branch.
    const std::string description =
        config.llm_description.empty() ? describe_bundle(bundle) : config.llm_description;
    const StageConfig& root_cfg = config.stage(Stage::analysis);
    const std::string root_prompt =
        render_prompt(Stage::analysis, {{"llm_description", description}});
    for (std::size_t b = 0; b < root_cfg.branch_factor; ++b) {
        ReasoningNode node;
        node.id = graph.nodes.size();
        node.stage = Stage::analysis;
        node.temperature = root_cfg.temperatures[b];
        try {
            node.content = generator.generate(Stage::analysis, root_prompt, node.temperature);
        } catch (const Error& e) {
            node.failed = true;
            node.error = e.what();
        }
        graph.nodes.push_back(std::move(node));
    }

    for (Stage s : {Stage::analysis, Stage::hypothesis, Stage::conceptual_formula}) {
        for (std::size_t id : graph.nodes_at(s)) {
            if (graph.nodes[id].failed) continue;
            expand_node(graph, id, config, generator);
        }
    }

    // Parse leaves into candidate metrics.
    for (std::size_t id : graph.nodes_at(Stage::computable_concept)) {
        const ReasoningNode& leaf = graph.nodes[id];
        CandidateRecord record;
        record.leaf = id;
        if (leaf.failed) {
            record.failure = leaf.error.empty() ? "generation failed" : leaf.error;
            graph.candidates.push_back(std::move(record));
            continue;
        }
        const std::string leaf_prompt = render_prompt(
            Stage::computable_concept,
            {{"conceptual_formula", leaf.parent ? graph.nodes[*leaf.parent].content : ""}});
        try {
            record.metric = parse_candidate(leaf.content, config.max_repairs, generator,
                                            leaf_prompt, leaf.temperature, &record.expression);
        } catch (const Error& e) {
            record.failure = e.what();
            record.expression = extract_expression_text(leaf.content);
        }
        graph.candidates.push_back(std::move(record));
    }

    // One skew-aware plan serves every candidate: it depends only on the
    // weights and alpha, not on the metric under evaluation.
    std::vector<std::size_t> sizes;
    for (const LayerRecord& rec : bundle.layers) sizes.push_back(rec.weight.size());
    const auto report = stats::skewness_report(bundle, stats::Granularity::per_layer);
    const auto plan = sdsa::allocate(report, sizes, config.alpha, config.contrast_cap);

    eval::FitnessOptions fitness_opts;
    fitness_opts.mode = config.fitness_mode;
    fitness_opts.eval_corpus = inputs.eval_corpus;

    std::vector<std::size_t> pending;
    for (std::size_t i = 0; i < graph.candidates.size(); ++i)
        if (graph.candidates[i].metric) pending.push_back(i);

    const std::size_t workers = std::min(config.workers, std::max<std::size_t>(pending.size(), 1));
    std::atomic<std::size_t> cursor{0};
    auto evaluate = [&]() {
        while (true) {
            const std::size_t slot = cursor.fetch_add(1);
            if (slot >= pending.size()) return;
            CandidateRecord& record = graph.candidates[pending[slot]];
            try {
                record.fitness = eval::fitness(bundle, plan, record.metric, *inputs.calibration,
                                               fitness_opts);
            } catch (const Error& e) {
                record.failure = e.what();
                record.metric = nullptr;
            }
        }
    };
    if (workers <= 1) {
        evaluate();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(evaluate);
        for (std::thread& t : pool) t.join();
    }

    bool any_ok = false;
    for (const CandidateRecord& c : graph.candidates) any_ok = any_ok || c.ok();
    if (any_ok) graph.best = select_best(graph);

    if (persist_to) {
        std::ofstream out(*persist_to);
        if (!out) fail(Errc::io_failure, "cannot write graph to " + persist_to->string());
        out << graph.to_json();
    }
    if (!any_ok)
        fail(Errc::search_exhausted, "every candidate failed to parse or evaluate");
    return graph;
}

std::size_t select_best(const ReasoningGraph& graph) {
    std::optional<std::size_t> best;
    double best_value = 0.0;
    for (const CandidateRecord& c : graph.candidates) {
        if (!c.ok()) continue;
        if (!best || c.fitness->value < best_value) {
            best = c.leaf;
            best_value = c.fitness->value;
        }
    }
    if (!best) fail(Errc::search_exhausted, "no successful candidate to select");
    return *best;
}

LlmClient::LlmClient(LlmEndpointConfig config) : config_(std::move(config)) {
    if (config_.base_url.empty())
        fail(Errc::config_invalid, "llm endpoint base_url must not be empty");
}

} // namespace autoprune::gcot
