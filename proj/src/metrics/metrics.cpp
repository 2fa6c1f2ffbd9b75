#include "metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "core/error.hpp"
#include "core/serialize.hpp"
#include "harness/harness.hpp"
#include "syntax/token.hpp"

namespace mutforge::metrics {

namespace {

double ratio(std::size_t a, std::size_t b) {
  return static_cast<double>(a) / static_cast<double>(b);
}

// Fisher-Yates driven by raw mt19937_64 output so results do not depend on
// the standard library's distribution implementations.
template <typename T>
void seeded_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace

double z_value(double confidence) {
  if (std::fabs(confidence - 0.90) < 1e-12) return 1.645;
  if (std::fabs(confidence - 0.95) < 1e-12) return 1.96;
  if (std::fabs(confidence - 0.99) < 1e-12) return 2.576;
  throw Error(ErrorCode::InvalidArgument,
              "unsupported confidence " + std::to_string(confidence) + " (use 0.90, 0.95 or 0.99)");
}

std::size_t sample_size(std::size_t population, double confidence, double margin) {
  if (population < 1) throw Error(ErrorCode::InvalidArgument, "population must be at least 1");
  if (!(margin > 0.0 && margin < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "margin must lie in (0, 1)");
  }
  double z = z_value(confidence);
  double n0 = z * z * 0.25 / (margin * margin);
  double n = n0 / (1.0 + (n0 - 1.0) / static_cast<double>(population));
  auto rounded = static_cast<std::size_t>(std::ceil(n - 1e-9));
  return std::clamp<std::size_t>(rounded, 1, population);
}

SamplingPlan plan_sample(std::size_t population, double confidence, double margin,
                         std::uint64_t seed) {
  SamplingPlan plan;
  plan.population = population;
  plan.confidence = confidence;
  plan.margin = margin;
  plan.seed = seed;
  plan.n = population == 0 ? 0 : sample_size(population, confidence, margin);
  return plan;
}

std::vector<std::string> draw_sample(const std::vector<std::string>& ids, const SamplingPlan& plan) {
  if (plan.n > ids.size()) {
    throw Error(ErrorCode::InvalidArgument, "sample larger than the population");
  }
  std::vector<std::size_t> idx(ids.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(plan.seed);
  seeded_shuffle(idx, rng);
  idx.resize(plan.n);
  std::sort(idx.begin(), idx.end());
  std::vector<std::string> out;
  for (auto i : idx) out.push_back(ids[i]);
  return out;
}

const char* to_string(EquivalenceLabel l) noexcept {
  switch (l) {
    case EquivalenceLabel::Equivalent: return "EQUIVALENT";
    case EquivalenceLabel::NonEquivalent: return "NONEQUIVALENT";
    case EquivalenceLabel::Unsure: return "UNSURE";
  }
  return "?";
}

std::optional<EquivalenceLabel> equivalence_label_from_string(std::string_view s) noexcept {
  for (auto l : {EquivalenceLabel::Equivalent, EquivalenceLabel::NonEquivalent,
                 EquivalenceLabel::Unsure}) {
    if (s == to_string(l)) return l;
  }
  return std::nullopt;
}

std::string labels_to_csv(const std::vector<LabelRow>& rows) {
  std::string out = "mutant_id,annotator,label\n";
  for (const auto& r : rows) {
    out += csv_field(r.mutant_id) + "," + csv_field(r.annotator) + "," +
           (r.label ? to_string(*r.label) : "") + "\n";
  }
  return out;
}

std::vector<LabelRow> labels_from_csv(std::string_view csv) {
  auto rows = parse_csv(csv);
  if (rows.empty() || rows[0] != std::vector<std::string>{"mutant_id", "annotator", "label"}) {
    throw Error(ErrorCode::Parse, "label csv: header must be 'mutant_id,annotator,label'");
  }
  std::vector<LabelRow> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != 3) {
      throw Error(ErrorCode::Parse, "label csv: row " + std::to_string(i + 1) + " needs 3 fields");
    }
    LabelRow row{r[0], r[1], std::nullopt};
    if (!r[2].empty()) {
      row.label = equivalence_label_from_string(r[2]);
      if (!row.label) {
        throw Error(ErrorCode::Parse, "label csv: row " + std::to_string(i + 1) +
                                          ": unknown label '" + r[2] + "'");
      }
    }
    out.push_back(std::move(row));
  }
  return out;
}

UsabilityReport usability(const MutationPool& pool, const std::vector<LabelRow>* labels) {
  SetCounts c = set_counts(pool);
  if (c.all == 0) throw Error(ErrorCode::InvalidArgument, "usability of an empty pool is undefined");
  UsabilityReport r;
  r.all = c.all;
  r.compilable = c.compilable;
  r.useless = c.useless;
  r.viable = c.viable;
  r.cr = ratio(c.compilable, c.all);
  r.umr = ratio(c.useless, c.all);
  if (labels) {
    std::map<std::string, std::pair<std::size_t, std::size_t>> votes;  // id -> (equiv, total)
    for (const auto& row : *labels) {
      if (!row.label) continue;
      if (!pool.find(row.mutant_id)) {
        throw Error(ErrorCode::Integrity, "label for unknown mutant '" + row.mutant_id + "'");
      }
      auto& v = votes[row.mutant_id];
      v.first += *row.label == EquivalenceLabel::Equivalent ? 1 : 0;
      v.second += 1;
    }
    r.emr_sample = votes.size();
    for (const auto& [id, v] : votes) r.emr_equivalent += 2 * v.first > v.second ? 1 : 0;
    if (r.emr_sample > 0) r.emr_estimate = ratio(r.emr_equivalent, r.emr_sample);
  }
  return r;
}

double bleu(const std::vector<std::string>& candidate, const std::vector<std::string>& reference) {
  if (candidate.empty() || reference.empty()) return 0.0;
  std::size_t orders = std::min<std::size_t>(4, candidate.size());
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= orders; ++n) {
    std::map<std::vector<std::string>, std::size_t> ref_counts;
    for (std::size_t i = 0; i + n <= reference.size(); ++i) {
      ++ref_counts[{reference.begin() + static_cast<long>(i),
                    reference.begin() + static_cast<long>(i + n)}];
    }
    std::map<std::vector<std::string>, std::size_t> cand_counts;
    for (std::size_t i = 0; i + n <= candidate.size(); ++i) {
      ++cand_counts[{candidate.begin() + static_cast<long>(i),
                     candidate.begin() + static_cast<long>(i + n)}];
    }
    std::size_t clipped = 0, total = candidate.size() - n + 1;
    for (const auto& [gram, count] : cand_counts) {
      auto it = ref_counts.find(gram);
      if (it != ref_counts.end()) clipped += std::min(count, it->second);
    }
    if (clipped == 0) return 0.0;
    log_sum += std::log(ratio(clipped, total));
  }
  double bp = candidate.size() >= reference.size()
                  ? 1.0
                  : std::exp(1.0 - ratio(reference.size(), candidate.size()));
  double score = bp * std::exp(log_sum / static_cast<double>(orders));
  if (candidate == reference) return 1.0;
  return std::min(score, 1.0);
}

std::vector<KindShare> top_kinds(const syntax::KindHistogram& h, std::size_t k) {
  std::size_t total = 0;
  for (const auto& [kind, n] : h) total += n;
  std::vector<KindShare> all;
  for (const auto& [kind, n] : h) {
    if (n > 0) all.push_back({kind, n, total ? ratio(n, total) : 0.0});
  }
  std::stable_sort(all.begin(), all.end(),
                   [](const KindShare& a, const KindShare& b) { return a.count > b.count; });
  if (all.size() > k) all.resize(k);
  return all;
}

DiversityReport diversity(const std::vector<DiversityInput>& inputs, std::size_t top_k) {
  DiversityReport r;
  for (const auto& in : inputs) {
    ++r.considered;
    if (syntax::is_deletion(in.original_tokens, in.mutated_tokens)) {
      ++r.deletions;
      continue;
    }
    if (!in.before || !in.after) {
      ++r.unparseable;
      continue;
    }
    for (const auto& [kind, n] : syntax::new_node_kinds(*in.before, *in.after)) {
      r.histogram[kind] += n;
    }
  }
  r.deletion_ratio = r.considered ? ratio(r.deletions, r.considered) : 0.0;
  r.top = top_kinds(r.histogram, top_k);
  return r;
}

double ochiai(const std::set<std::string>& killing, const std::set<std::string>& triggering) {
  if (killing.empty() || triggering.empty()) return 0.0;
  std::size_t common = 0;
  for (const auto& t : killing) common += triggering.count(t);
  return static_cast<double>(common) /
         std::sqrt(static_cast<double>(killing.size()) * static_cast<double>(triggering.size()));
}

bool coupled(const std::set<std::string>& killing, const std::set<std::string>& triggering) {
  for (const auto& t : killing) {
    if (triggering.count(t)) return true;
  }
  return false;
}

double coupling_rate(const KillMatrix& m, const std::set<std::string>& triggering) {
  std::size_t n = m.mutant_ids().size();
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "coupling rate needs at least one viable mutant");
  std::size_t c = 0;
  for (std::size_t i = 0; i < n; ++i) c += coupled(m.killing_tests(i), triggering) ? 1 : 0;
  return ratio(c, n);
}

double mean_ochiai(const KillMatrix& m, const std::set<std::string>& triggering) {
  std::size_t n = m.mutant_ids().size();
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "mean Ochiai needs at least one viable mutant");
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += ochiai(m.killing_tests(i), triggering);
  return sum / static_cast<double>(n);
}

bool bug_detected(const KillMatrix& m, const std::set<std::string>& triggering) {
  for (std::size_t i = 0; i < m.mutant_ids().size(); ++i) {
    if (coupled(m.killing_tests(i), triggering)) return true;
  }
  return false;
}

double real_bug_detectability(const std::vector<BugKillData>& bugs) {
  if (bugs.empty()) throw Error(ErrorCode::InvalidArgument, "RBD needs at least one bug");
  std::size_t detected = 0;
  for (const auto& b : bugs) detected += b.matrix && bug_detected(*b.matrix, b.triggering) ? 1 : 0;
  return ratio(detected, bugs.size());
}

std::size_t exact_match_count(const MutationPool& pool, const ProjectSnapshot& fixed,
                              const ProjectSnapshot& buggy) {
  std::size_t n = 0;
  for (const auto* r : pool.viable()) {
    const std::string* target = buggy.file(r->location.file);
    if (!target) continue;
    auto ws = harness::materialize(fixed, *r);
    if (syntax::normalized_tokens(ws.project.files.at(r->location.file)) ==
        syntax::normalized_tokens(*target)) {
      ++n;
    }
  }
  return n;
}

namespace {

void check_pair(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw Error(ErrorCode::InvalidArgument, "vectors differ in length");
  if (xs.size() < 3) throw Error(ErrorCode::InvalidArgument, "correlation needs at least 3 points");
}

Correlation permutation_test(const std::vector<double>& xs, const std::vector<double>& ys,
                             std::size_t permutations, std::uint64_t seed) {
  constexpr std::size_t kMinPermutations = 10000;
  Correlation c;
  c.coefficient = pearson_coefficient(xs, ys);
  c.permutations = std::max(permutations, kMinPermutations);
  std::mt19937_64 rng(seed);
  std::vector<double> shuffled = ys;
  std::size_t extreme = 0;
  double observed = std::fabs(c.coefficient) - 1e-12;
  for (std::size_t i = 0; i < c.permutations; ++i) {
    seeded_shuffle(shuffled, rng);
    if (std::fabs(pearson_coefficient(xs, shuffled)) >= observed) ++extreme;
  }
  c.p_value = static_cast<double>(extreme + 1) / static_cast<double>(c.permutations + 1);
  return c;
}

}  // namespace

double pearson_coefficient(const std::vector<double>& xs, const std::vector<double>& ys) {
  check_pair(xs, ys);
  double n = static_cast<double>(xs.size());
  double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double dx = xs[i] - mx, dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw Error(ErrorCode::Undefined, "correlation is undefined for a constant vector");
  }
  double r = sxy / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

std::vector<double> ranks(const std::vector<double>& xs) {
  std::vector<std::size_t> idx(xs.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return xs[a] < xs[b]; });
  std::vector<double> out(xs.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && xs[idx[j + 1]] == xs[idx[i]]) ++j;
    double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) out[idx[k]] = avg;
    i = j + 1;
  }
  return out;
}

Correlation pearson(const std::vector<double>& xs, const std::vector<double>& ys,
                    std::size_t permutations, std::uint64_t seed) {
  check_pair(xs, ys);
  return permutation_test(xs, ys, permutations, seed);
}

Correlation spearman(const std::vector<double>& xs, const std::vector<double>& ys,
                     std::size_t permutations, std::uint64_t seed) {
  check_pair(xs, ys);
  return permutation_test(ranks(xs), ranks(ys), permutations, seed);
}

double cohen_kappa(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.size() != b.size() || a.empty()) {
    throw Error(ErrorCode::InvalidArgument, "kappa needs two non-empty label lists of equal length");
  }
  std::map<std::string, std::pair<std::size_t, std::size_t>> marginals;
  std::size_t agree = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    agree += a[i] == b[i] ? 1 : 0;
    ++marginals[a[i]].first;
    ++marginals[b[i]].second;
  }
  double n = static_cast<double>(a.size());
  double po = static_cast<double>(agree) / n;
  double pe = 0.0;
  for (const auto& [label, m] : marginals) {
    pe += (static_cast<double>(m.first) / n) * (static_cast<double>(m.second) / n);
  }
  if (std::fabs(1.0 - pe) < 1e-15) {
    throw Error(ErrorCode::Undefined, "kappa is undefined when chance agreement is 1");
  }
  return (po - pe) / (1.0 - pe);
}

}  // namespace mutforge::metrics
