// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "autoprune/bundle.hpp"
#include "autoprune/metric_dsl.hpp"
#include "autoprune/model_eval.hpp"
#include "autoprune/stats.hpp"

namespace autoprune::gcot {

enum class Stage { analysis, hypothesis, conceptual_formula, computable_concept };

constexpr std::size_t kStageCount = 4;

const char* stage_name(Stage s);
Stage stage_from_name(const std::string& name);
Stage successor(Stage s); // errors on the final stage

/// Committed template text for a stage (see assets/prompts/).
const char* prompt_template(Stage s);
const char* dsl_instructions();

/// Substitutes the stage's placeholder into its template. The final stage
/// additionally appends the grammar suffix after one separating newline.
std::string render_prompt(Stage s, const std::map<std::string, std::string>& context);

struct ReasoningNode {
    std::size_t id = 0;
    Stage stage = Stage::analysis;
    std::optional<std::size_t> parent; // absent for roots
    double temperature = 0.0;
    std::string content;
    bool failed = false;
    std::string error;
};

struct CandidateRecord {
    std::size_t leaf = 0;
    std::string expression; // canonical text when parsed, else the raw leaf excerpt
    dsl::ExprPtr metric;    // null when parsing failed
    std::optional<eval::FitnessResult> fitness;
    std::string failure;    // empty on success

    bool ok() const { return metric != nullptr && fitness.has_value() && failure.empty(); }
};

struct ReasoningGraph {
    std::vector<ReasoningNode> nodes;
    std::vector<CandidateRecord> candidates;
    std::optional<std::size_t> best; // leaf id of the fitness argmin

    std::vector<std::size_t> nodes_at(Stage s) const;
    std::string to_json() const;
};

struct StageConfig {
    std::size_t branch_factor = 1;
    std::vector<double> temperatures = {0.7}; // one per branch
};

enum class GeneratorKind { fixture, llm_endpoint };

struct LlmEndpointConfig {
    std::string base_url; // full endpoint URL, e.g. http://host:1234/v1/chat/completions
    std::string model;
    std::string api_key_env = "AUTOPRUNE_API_KEY";
    int timeout_seconds = 60;
    std::size_t max_retries = 3;
    int backoff_ms = 250;
};

struct SearchConfig {
    std::array<StageConfig, kStageCount> stages = {
        StageConfig{1, {0.7}},
        StageConfig{3, {0.3, 0.7, 1.1}},
        StageConfig{3, {0.3, 0.7, 1.1}},
        StageConfig{1, {0.7}},
    };
    double alpha = 0.5; // target sparsity for candidate evaluation
    double contrast_cap = 1.8;
    eval::FitnessMode fitness_mode = eval::FitnessMode::reconstruction;
    std::size_t max_repairs = 2;
    GeneratorKind generator = GeneratorKind::fixture;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    std::string llm_description; // filled from the bundle when empty
    LlmEndpointConfig llm;

    const StageConfig& stage(Stage s) const { return stages[std::size_t(s)]; }
    void validate() const;
};

class CandidateGenerator {
  public:
    virtual ~CandidateGenerator() = default;
    /// Produce one text continuation for the given stage prompt.
    virtual std::string generate(Stage stage, const std::string& prompt, double temperature) = 0;
};

/// Deterministic enumerator over a committed candidate list: stage texts are
/// pure functions of (stage, per-stage call counter, temperature); the final
/// stage cycles through the candidate expressions starting at `seed`.
class FixtureGenerator : public CandidateGenerator {
  public:
    FixtureGenerator(std::vector<std::string> candidates, std::uint64_t seed);

    std::string generate(Stage stage, const std::string& prompt, double temperature) override;

  private:
    std::vector<std::string> candidates_;
    std::uint64_t seed_;
    std::array<std::uint64_t, kStageCount> counters_{};
};

std::vector<std::string> default_fixture_candidates();
std::vector<std::string> load_candidate_list(const std::filesystem::path& file);

/// Chat-completion client: POST {model, messages, temperature} to the
/// configured URL, take the first choice's message content. Retries
/// transport errors, 429 and 5xx with exponential backoff.
class LlmClient : public CandidateGenerator {
  public:
    explicit LlmClient(LlmEndpointConfig config);

    std::string generate(Stage stage, const std::string& prompt, double temperature) override;

  private:
    LlmEndpointConfig config_;
};

std::unique_ptr<CandidateGenerator> make_generator(const SearchConfig& config,
                                                   const std::filesystem::path& candidates_file);

/// Creates one child per configured temperature at the successor stage.
/// A generator failure marks that child failed and moves on.
std::vector<std::size_t> expand_node(ReasoningGraph& graph, std::size_t node_id,
                                     const SearchConfig& config, CandidateGenerator& generator);

/// Extracts the first code-fenced (or line-isolated) expression from leaf
/// content and parses it; on failure re-prompts with the parse error
/// appended, up to `repair_budget` times. Throws UnparseableCandidate when
/// the budget is exhausted.
dsl::ExprPtr parse_candidate(const std::string& leaf_content, std::size_t repair_budget,
                             CandidateGenerator& generator, const std::string& leaf_prompt,
                             double temperature, std::string* final_text = nullptr);

struct SearchInputs {
    const ModelBundle* bundle = nullptr;
    const stats::ActivationStats* calibration = nullptr;
    const TokenCorpus* eval_corpus = nullptr; // perplexity mode only
};

/// Builds the reasoning graph stage by stage, parses the leaves, evaluates
/// every successful candidate at sparsity alpha under the skew-aware plan,
/// and selects the fitness argmin (ties to the lowest leaf id). The graph is
/// persisted to `persist_to` when given, even when every candidate failed
/// (in which case SearchExhausted is thrown afterwards).
ReasoningGraph run_search(const SearchInputs& inputs, const SearchConfig& config,
                          CandidateGenerator& generator,
                          const std::optional<std::filesystem::path>& persist_to = std::nullopt);

std::size_t select_best(const ReasoningGraph& graph);

std::string describe_bundle(const ModelBundle& bundle);

} // namespace autoprune::gcot
