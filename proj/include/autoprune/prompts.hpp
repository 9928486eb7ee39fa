// SPDX-License-Identifier: Apache-2.0

#pragma once

namespace autoprune::gcot::prompts {

// Compiled-in copies of the four stage templates under assets/prompts/. The
// acceptance suite checks these against the committed files byte-for-byte,
// so the two representations cannot drift apart.

inline constexpr const char* kAnalysis =
    R"PROMPT(You are an expert analyst in neural network architecture and pruning. Your task is to provide a concise, holistic analysis of the following model, focusing on the most critical properties a novel pruning metric must capture to be effective.

TARGET MODEL FOR ANALYSIS:

{llm_description}

Based on the provided model's architecture and your expert knowledge, write a paragraph analyzing its core sensitivities and the most promising principles for effective pruning. Your analysis should identify the key trade-offs of simpler metrics and conclude by pointing towards the essential, multifaceted characteristics that a superior metric needs to measure.
Provide only the analysis paragraph. Do not add any titles, introductory sentences, or concluding remarks.
)PROMPT";

inline constexpr const char* kHypothesis =
    R"PROMPT(You are a principal scientist responsible for formulating novel research directions. Your task is to distill a detailed analysis into a single, powerful, and testable hypothesis.

PRECEDING ANALYSIS:

{analysis_text}

YOUR HYPOTHESIS TASK:

Based only on the preceding analysis, synthesize its key insights into a single sentence that formulates a novel and unifying hypothesis for a superior pruning metric.

The hypothesis should propose a clear relationship or dependency. For example: "A component's importance is a function of property X combined with property Y."

Provide only the single hypothesis sentence. Do not add any titles, introductory phrases, or explanations.
)PROMPT";

inline constexpr const char* kConceptualFormula =
    R"PROMPT(You are a senior research engineer specializing in translating theoretical concepts into algorithmic structures. Your task is to convert a natural language hypothesis into a semi-formal conceptual formula.

PRECEDING HYPOTHESIS:

{hypothesis_text}

YOUR FORMALIZATION TASK:

Based on the provided hypothesis, create a conceptual formula that represents the core computational logic. This formula should be abstract, using mathematical notation and placeholders for functions and variables, to outline the structure without getting into implementation details.

For example, if the hypothesis is "Importance is the product of weight magnitude and activation norm," a valid conceptual formula would be: Importance(W, X) = |W| * ||f(X)||.

Provide only the conceptual formula. Do not add any titles, introductory sentences, or explanations.
)PROMPT";

inline constexpr const char* kComputableConcept =
    R"PROMPT(You are a software architect designing a library of computational modules. Your task is to decompose a conceptual formula into a set of precise, machine-readable functional components.

CONCEPTUAL FORMULA:

{conceptual_formula}

YOUR DECOMPOSITION TASK:

Break down the conceptual formula into a series of modular, computable concepts. For each concept, define its precise functional signature, including a description, a list of inputs, and the expected output. This decomposition should create an unambiguous blueprint ready for direct implementation.

Provide only the list of computable concepts. Do not add any titles, introductory phrases, or concluding remarks.
)PROMPT";

// The final stage needs output an interpreter can run, so its prompt gets
// this grammar suffix appended after a separating blank line.
inline constexpr const char* kDslInstructions =
    R"PROMPT(CONCRETE EXPRESSION REQUIREMENT:

Express the final importance score in the expression language below and end your answer with exactly one fenced code block containing that single expression.

  expr     := term (('+'|'-') term)*
  term     := factor (('*'|'/') factor)*
  factor   := func '(' expr ')' | terminal | number | '(' expr ')'
  func     := 'abs' | 'sqrt' | 'sq' | 'log1p'
  terminal := 'W' | 'rowl1(W)' | 'rowl2(W)' | 'coll1(X)' | 'coll2(X)' | 'coll2sq(X)' | 'hessdiag(X)'

W is the layer's weight matrix; rowl1/rowl2 are its per-row norms; coll1,
coll2 and coll2sq are per-input-column norms of the calibration activations;
hessdiag is the diagonal of the inverse damped Gram matrix of those
activations. Example:

```
abs(W) * coll2(X)
```
)PROMPT";

} // namespace autoprune::gcot::prompts
