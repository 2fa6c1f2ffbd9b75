#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "core/model.hpp"
#include "syntax/diff.hpp"

namespace mutforge::metrics {

// ---- usability -------------------------------------------------------------

/// z for the supported two-sided confidence levels 0.90, 0.95, 0.99.
/// Throws Error(InvalidArgument) otherwise.
double z_value(double confidence);

/// Cochran sample size with finite population correction: n0 = z^2 p(1-p)/e^2
/// (p = 0.5, unrounded), n = ceil(n0 / (1 + (n0 - 1)/N)), capped at N.
std::size_t sample_size(std::size_t population, double confidence = 0.95, double margin = 0.05);

struct SamplingPlan {
  std::size_t population = 0;
  double confidence = 0.95;
  double margin = 0.05;
  double p = 0.5;
  std::size_t n = 0;
  std::uint64_t seed = 0;
};

SamplingPlan plan_sample(std::size_t population, double confidence, double margin,
                         std::uint64_t seed);

/// Seeded uniform sample of plan.n ids, returned in their original order.
std::vector<std::string> draw_sample(const std::vector<std::string>& ids, const SamplingPlan& plan);

enum class EquivalenceLabel { Equivalent, NonEquivalent, Unsure };

const char* to_string(EquivalenceLabel l) noexcept;
std::optional<EquivalenceLabel> equivalence_label_from_string(std::string_view s) noexcept;

struct LabelRow {
  std::string mutant_id;
  std::string annotator;
  std::optional<EquivalenceLabel> label;  // empty in an unfilled skeleton
};

std::string labels_to_csv(const std::vector<LabelRow>& rows);
/// Throws Error(Parse) on a bad header or label value.
std::vector<LabelRow> labels_from_csv(std::string_view csv);

struct UsabilityReport {
  std::size_t all = 0;
  std::size_t compilable = 0;
  std::size_t useless = 0;
  std::size_t viable = 0;
  double cr = 0.0;
  double umr = 0.0;
  // Present when labels were supplied.
  std::optional<double> emr_estimate;
  std::size_t emr_sample = 0;      // labeled mutants
  std::size_t emr_equivalent = 0;  // of which judged equivalent
};

/// A mutant is judged equivalent when a strict majority of its labels say
/// EQUIVALENT. Throws Error(InvalidArgument) for an empty pool and
/// Error(Integrity) for labels naming unknown mutants.
UsabilityReport usability(const MutationPool& pool,
                          const std::vector<LabelRow>* labels = nullptr);

// ---- syntactic -------------------------------------------------------------

/// BLEU up to 4-grams, orders truncated to the candidate length, no
/// smoothing (any zero precision gives 0), standard brevity penalty.
double bleu(const std::vector<std::string>& candidate, const std::vector<std::string>& reference);

struct DiversityInput {
  std::vector<std::string> original_tokens;  // of the mutated span
  std::vector<std::string> mutated_tokens;
  // Trees of the enclosing function before and after, when the mutant parses.
  std::optional<syntax::SyntaxTree> before;
  std::optional<syntax::SyntaxTree> after;
};

struct KindShare {
  syntax::NodeKind kind;
  std::size_t count = 0;
  double share = 0.0;  // count / histogram total
};

struct DiversityReport {
  std::size_t considered = 0;
  std::size_t deletions = 0;
  std::size_t unparseable = 0;  // non-deletions without trees
  double deletion_ratio = 0.0;  // 0 when nothing was considered
  syntax::KindHistogram histogram;
  std::vector<KindShare> top;
};

/// Deletions are strict token subsequences of the original span; every other
/// mutant contributes its newly introduced node kinds to the histogram.
DiversityReport diversity(const std::vector<DiversityInput>& inputs, std::size_t top_k = 3);

/// Ranked by count descending, ties by kind order.
std::vector<KindShare> top_kinds(const syntax::KindHistogram& h, std::size_t k);

// ---- behavior --------------------------------------------------------------

double ochiai(const std::set<std::string>& killing, const std::set<std::string>& triggering);

bool coupled(const std::set<std::string>& killing, const std::set<std::string>& triggering);

/// Coupled mutants / all mutants of the matrix (the viable set).
/// Throws Error(InvalidArgument) when the matrix has no mutants.
double coupling_rate(const KillMatrix& m, const std::set<std::string>& triggering);

/// Mean Ochiai over the matrix's mutants. Throws like coupling_rate.
double mean_ochiai(const KillMatrix& m, const std::set<std::string>& triggering);

bool bug_detected(const KillMatrix& m, const std::set<std::string>& triggering);

struct BugKillData {
  std::string bug_id;
  const KillMatrix* matrix = nullptr;  // null: no viable mutants
  std::set<std::string> triggering;
};

/// Detected bugs / bugs. Throws Error(InvalidArgument) for an empty list.
double real_bug_detectability(const std::vector<BugKillData>& bugs);

/// Viable mutants whose whole mutated file token-equals the buggy file.
std::size_t exact_match_count(const MutationPool& pool, const ProjectSnapshot& fixed,
                              const ProjectSnapshot& buggy);

// ---- statistics ------------------------------------------------------------

struct Correlation {
  double coefficient = 0.0;
  double p_value = 1.0;  // two-sided permutation p-value
  std::size_t permutations = 0;
};

/// Pearson coefficient only. Throws Error(InvalidArgument) for size mismatch
/// or fewer than 3 points, Error(Undefined) for zero variance.
double pearson_coefficient(const std::vector<double>& xs, const std::vector<double>& ys);
/// Average ranks (1-based), ties share the mean rank.
std::vector<double> ranks(const std::vector<double>& xs);

Correlation pearson(const std::vector<double>& xs, const std::vector<double>& ys,
                    std::size_t permutations = 10000, std::uint64_t seed = 0);
Correlation spearman(const std::vector<double>& xs, const std::vector<double>& ys,
                     std::size_t permutations = 10000, std::uint64_t seed = 0);

/// Throws Error(InvalidArgument) for mismatched or empty inputs and
/// Error(Undefined) when chance agreement is 1.
double cohen_kappa(const std::vector<std::string>& a, const std::vector<std::string>& b);

}  // namespace mutforge::metrics
