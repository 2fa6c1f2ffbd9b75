#include "study/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <mutex>

#include "core/error.hpp"
#include "core/serialize.hpp"
#include "syntax/diff.hpp"
#include "syntax/minilang.hpp"

namespace mutforge::study {

namespace fs = std::filesystem;

std::vector<ClassifierRule> effective_rules(const AdapterSpec& spec) {
  if (!spec.error_rules.empty()) return spec.error_rules;
  return spec.kind == "subprocess" ? javac_rules() : minilang_rules();
}

std::unique_ptr<harness::ToolchainAdapter> make_adapter(const AdapterSpec& spec) {
  if (spec.kind == "minilang") return harness::make_minilang_adapter();
  if (spec.kind == "subprocess") return harness::make_subprocess_adapter(spec.subprocess);
  throw Error(ErrorCode::Config, "unknown adapter kind '" + spec.kind + "'");
}

// ---- generation ---------------------------------------------------------------

GenerationOutput generate(const BugCase& bug, const BugContext& ctx, const GeneratorSpec& gen,
                          llmgen::ChatBackend* backend, const std::string& id_prefix) {
  GenerationOutput out;
  out.pool.project_id = bug.id;
  out.pool.generator_id = gen.id;
  const std::string* text = bug.fixed.file(ctx.target.file);
  if (!text) throw Error(ErrorCode::FixtureInvalid, "bug case " + bug.id + ": missing " + ctx.target.file);

  if (gen.type == GeneratorType::Rule) {
    auto unit = syntax::parse_mini_unit(*text, ctx.target.file);
    if (!unit.ok()) {
      const auto& d = unit.diagnostics.front();
      throw Error(ErrorCode::Parse, ctx.target.file + ":" + std::to_string(d.line) + ":" +
                                        std::to_string(d.column) + ": " + d.message);
    }
    auto start = std::chrono::steady_clock::now();
    out.pool.records = rulegen::enumerate_rule_mutants(unit, *text, gen.operators, ctx.target, id_prefix);
    double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    for (auto& r : out.pool.records) r.gen_wall_time = elapsed / static_cast<double>(out.pool.records.size());
    out.pool.stats.wall_time = elapsed;
    return out;
  }

  if (!backend) throw Error(ErrorCode::Config, "generator " + gen.id + " has no backend");
  llmgen::PromptRequest req;
  req.tmpl = gen.prompt;
  req.target = ctx.target_text;
  req.target_location = ctx.target;
  if (gen.prompt != llmgen::PromptTemplate::P3) req.enclosing_function = ctx.function_text;
  if (gen.prompt == llmgen::PromptTemplate::P1 || gen.prompt == llmgen::PromptTemplate::P4) {
    req.examples = llmgen::default_examples();
  }
  if (gen.prompt == llmgen::PromptTemplate::P4) req.unit_tests = ctx.unit_tests;
  req.budget = llmgen::budget_for(ctx.target_text);
  std::string prompt = llmgen::build_prompt(req);
  auto result = llmgen::request_mutations(*backend, prompt, ctx.target);
  out.prompted = 1;
  std::string origin = backend->descriptor().id + ":" + llmgen::to_string(gen.prompt);
  out.pool.records = llmgen::to_records(result, bug.fixed, origin, id_prefix);
  auto& s = out.pool.stats;
  s.prompts = 1;
  s.responses_parsed = result.parse_failure ? 0 : 1;
  s.parse_failures = result.parse_failure ? 1 : 0;
  s.skipped_elements = result.skipped + (result.candidates.size() - out.pool.records.size());
  s.wall_time = result.wall_time;
  s.usage = result.usage;
  out.results.push_back(std::move(result));
  return out;
}

MutationPool screen_and_classify(harness::ToolchainAdapter& adapter, const ProjectSnapshot& fixed,
                                 MutationPool pool, std::size_t workers) {
  std::vector<const MutationRecord*> todo;
  for (const auto& id : needs_compilation(pool)) todo.push_back(pool.find(id));
  auto results = harness::screen_compile(adapter, fixed, todo, workers);
  return classify(std::move(pool), results);
}

harness::KillRun execute(harness::ToolchainAdapter& adapter, const ProjectSnapshot& fixed,
                         const MutationPool& pool, const harness::ExecOptions& opts) {
  auto viable = pool.viable();
  auto tests = adapter.list_tests(harness::Workspace{fixed, {}});
  return harness::build_kill_matrix(adapter, fixed, viable, tests, opts);
}

// ---- evaluation ---------------------------------------------------------------

namespace {

json ratio(std::size_t num, std::size_t den) {
  if (den == 0) return nullptr;
  return static_cast<double>(num) / static_cast<double>(den);
}

json mean(double sum, std::size_t n) {
  if (n == 0) return nullptr;
  return sum / static_cast<double>(n);
}

template <typename K, typename F>
json count_map(const std::map<K, std::size_t>& m, F&& name) {
  json out = json::object();
  for (const auto& [k, n] : m) out[name(k)] = n;
  return out;
}

template <typename K, typename F>
json fraction_map(const std::map<K, std::size_t>& m, F&& name) {
  json out = json::object();
  for (const auto& [k, f] : fractions(m)) out[name(k)] = f;
  return out;
}

const char* error_name(ErrorType t) { return to_string(t); }
const char* kind_name(syntax::NodeKind k) { return syntax::to_string(k); }

std::optional<syntax::SyntaxTree> function_tree(std::string_view text, const std::string& file,
                                                const std::string& name) {
  if (name.empty()) return std::nullopt;
  auto unit = syntax::parse_mini_unit(text, file);
  if (!unit.ok()) return std::nullopt;
  for (const auto& sig : unit.functions) {
    if (sig.name == name) return unit.tree.subtree(sig.node);
  }
  return std::nullopt;
}

int line_count(std::string_view s) {
  return static_cast<int>(std::max<std::size_t>(1, split_lines(s).size()));
}

json usage_cost(const CellCounts& c, const llmgen::BackendDescriptor* d) {
  json out = {{"prompt_tokens", c.prompt_tokens}, {"completion_tokens", c.completion_tokens}};
  if (!d) return out;
  double usd = static_cast<double>(c.prompt_tokens) / 1000.0 * d->price_prompt_per_1k +
               static_cast<double>(c.completion_tokens) / 1000.0 * d->price_completion_per_1k;
  out["usd_total"] = usd;
  out["usd_per_1k_mutations"] = c.all == 0 ? json(nullptr) : json(1000.0 * usd / static_cast<double>(c.all));
  return out;
}

}  // namespace

json to_json(const CellCounts& c) {
  json j = {{"prompted", c.prompted},
            {"parsed", c.parsed},
            {"all", c.all},
            {"compilable", c.compilable},
            {"useless", c.useless},
            {"viable", c.viable},
            {"executed", c.executed},
            {"killed", c.killed},
            {"coupled", c.coupled},
            {"detected", c.detected},
            {"exact_match", c.exact_match},
            {"diversity_considered", c.diversity_considered},
            {"deletions", c.deletions},
            {"bleu_scored", c.bleu_scored},
            {"tree_scored", c.tree_scored},
            {"prompt_tokens", c.prompt_tokens},
            {"completion_tokens", c.completion_tokens}};
  j["error_types"] = count_map(c.error_types, error_name);
  j["origin_nodes"] = count_map(c.origin_nodes, kind_name);
  return j;
}

CellCounts cell_counts_from_json(const json& j) {
  CellCounts c;
  auto get = [&](const char* k) { return j.at(k).get<std::size_t>(); };
  c.prompted = get("prompted");
  c.parsed = get("parsed");
  c.all = get("all");
  c.compilable = get("compilable");
  c.useless = get("useless");
  c.viable = get("viable");
  c.executed = get("executed");
  c.killed = get("killed");
  c.coupled = get("coupled");
  c.detected = get("detected");
  c.exact_match = get("exact_match");
  c.diversity_considered = get("diversity_considered");
  c.deletions = get("deletions");
  c.bleu_scored = get("bleu_scored");
  c.tree_scored = get("tree_scored");
  c.prompt_tokens = j.at("prompt_tokens").get<std::uint64_t>();
  c.completion_tokens = j.at("completion_tokens").get<std::uint64_t>();
  for (const auto& [k, v] : j.at("error_types").items()) {
    auto t = error_type_from_string(k);
    if (!t) throw Error(ErrorCode::Parse, "unknown error type '" + k + "'");
    c.error_types[*t] = v.get<std::size_t>();
  }
  for (const auto& [k, v] : j.at("origin_nodes").items()) {
    auto n = syntax::node_kind_from_string(k);
    if (!n) throw Error(ErrorCode::Parse, "unknown node kind '" + k + "'");
    c.origin_nodes[*n] = v.get<std::size_t>();
  }
  return c;
}

CellEvaluation evaluate_cell(const EvaluationInput& in) {
  if (!in.bug || !in.context || !in.pool) {
    throw Error(ErrorCode::InvalidArgument, "evaluate_cell needs a bug, its context and a pool");
  }
  const BugCase& bug = *in.bug;
  const BugContext& ctx = *in.context;
  const MutationPool& pool = *in.pool;
  CellEvaluation ev;
  CellCounts& c = ev.counts;
  json& rep = ev.report;

  auto sets = set_counts(pool);
  c.prompted = in.prompted;
  c.parsed = in.parsed;
  c.all = sets.all;
  c.compilable = sets.compilable;
  c.useless = sets.useless;
  c.viable = sets.viable;
  c.prompt_tokens = pool.stats.usage.prompt_tokens;
  c.completion_tokens = pool.stats.usage.completion_tokens;

  json usab = {{"cr", ratio(c.compilable, c.all)}, {"umr", ratio(c.useless, c.all)}};
  if (in.labels && c.all > 0) {
    auto u = metrics::usability(pool, in.labels);
    usab["emr_estimate"] = u.emr_estimate ? json(*u.emr_estimate) : json(nullptr);
    usab["emr_sample"] = u.emr_sample;
    usab["emr_equivalent"] = u.emr_equivalent;
  }
  rep["usability"] = usab;

  // Compile errors.
  auto per_mutant_errors = classify_pool_errors(pool, in.rules);
  json err_ids = json::object();
  for (const auto& [id, t] : per_mutant_errors) {
    ++c.error_types[t];
    err_ids[id] = to_string(t);
  }
  rep["error_types"] = {{"counts", count_map(c.error_types, error_name)},
                        {"fractions", fraction_map(c.error_types, error_name)},
                        {"mutants", err_ids}};
  c.origin_nodes = origin_node_counts(pool, bug.fixed);
  rep["origin_nodes"] = {{"counts", count_map(c.origin_nodes, kind_name)},
                         {"fractions", fraction_map(c.origin_nodes, kind_name)}};

  // Syntactic similarity to the real bug, over viable mutants.
  const std::string& file = ctx.target.file;
  const std::string* fixed_text = bug.fixed.file(file);
  const std::string* buggy_text = bug.buggy.file(file);
  std::vector<std::string> reference;
  if (buggy_text) {
    int buggy_last = std::min<int>(ctx.target.line_end,
                                   static_cast<int>(split_lines(*buggy_text).size()));
    reference = syntax::normalized_tokens(line_span(*buggy_text, ctx.target.line_start, buggy_last));
  }
  auto fixed_fn = fixed_text ? function_tree(*fixed_text, file, ctx.function_name) : std::nullopt;
  auto buggy_fn = buggy_text ? function_tree(*buggy_text, file, ctx.function_name) : std::nullopt;
  double bleu_sum = 0.0, tree_sum = 0.0;
  json bleu_each = json::object(), tree_each = json::object();
  std::vector<metrics::DiversityInput> div_inputs;
  for (const MutationRecord* r : pool.viable()) {
    auto ws = harness::materialize(bug.fixed, *r);
    const std::string& mutated = ws.project.files.at(r->location.file);
    metrics::DiversityInput di;
    di.original_tokens = syntax::normalized_tokens(r->original_text);
    di.mutated_tokens = syntax::normalized_tokens(r->mutated_text);
    if (r->location.file == file) {
      int shift = line_count(r->mutated_text) - line_count(r->original_text);
      if (r->location.line_start > ctx.target.line_end) shift = 0;
      int last = std::min<int>(ctx.target.line_end + shift, static_cast<int>(split_lines(mutated).size()));
      if (!reference.empty() && last >= ctx.target.line_start) {
        auto cand = syntax::normalized_tokens(line_span(mutated, ctx.target.line_start, last));
        double b = metrics::bleu(cand, reference);
        bleu_each[r->id] = b;
        bleu_sum += b;
        ++c.bleu_scored;
      }
      auto mutated_fn = function_tree(mutated, file, ctx.function_name);
      if (mutated_fn && buggy_fn) {
        auto d = syntax::tree_distance(*mutated_fn, *buggy_fn);
        tree_each[r->id] = d;
        tree_sum += static_cast<double>(d);
        ++c.tree_scored;
      }
      if (mutated_fn && fixed_fn) {
        di.before = fixed_fn;
        di.after = std::move(mutated_fn);
      }
    }
    div_inputs.push_back(std::move(di));
  }
  auto div = metrics::diversity(div_inputs, 3);
  c.diversity_considered = div.considered;
  c.deletions = div.deletions;
  json top = json::array();
  for (const auto& k : div.top) {
    top.push_back({{"kind", syntax::to_string(k.kind)}, {"count", k.count}, {"share", k.share}});
  }
  rep["syntactic"] = {
      {"bleu", {{"scored", c.bleu_scored}, {"sum", bleu_sum}, {"mean", mean(bleu_sum, c.bleu_scored)}, {"mutants", bleu_each}}},
      {"tree_distance", {{"scored", c.tree_scored}, {"sum", tree_sum}, {"mean", mean(tree_sum, c.tree_scored)}, {"mutants", tree_each}}},
      {"diversity",
       {{"considered", div.considered},
        {"deletions", div.deletions},
        {"unparseable", div.unparseable},
        {"deletion_ratio", ratio(div.deletions, div.considered)},
        {"histogram", count_map(div.histogram, kind_name)},
        {"top", top}}}};

  c.exact_match = metrics::exact_match_count(pool, bug.fixed, bug.buggy);
  rep["exact_match"] = c.exact_match;

  // Behavior.
  if (in.matrix) {
    const KillMatrix& m = *in.matrix;
    double ochiai_sum = 0.0;
    json rows = json::array();
    for (std::size_t i = 0; i < m.mutant_ids().size(); ++i) {
      auto killing = m.killing_tests(i);
      double o = metrics::ochiai(killing, bug.triggering_tests);
      bool cpl = metrics::coupled(killing, bug.triggering_tests);
      ochiai_sum += o;
      c.killed += killing.empty() ? 0 : 1;
      c.coupled += cpl ? 1 : 0;
      ev.coupled_by_id[m.mutant_ids()[i]] = cpl;
      rows.push_back({{"id", m.mutant_ids()[i]},
                      {"killing_tests", json(std::vector<std::string>(killing.begin(), killing.end()))},
                      {"ochiai", o},
                      {"coupled", cpl}});
    }
    c.executed = m.mutant_ids().size();
    c.detected = c.coupled > 0 ? 1 : 0;
    rep["behavior"] = {{"computed", true},
                       {"mutation_score", ratio(c.killed, c.executed)},
                       {"coupling_rate", ratio(c.coupled, c.executed)},
                       {"ochiai_sum", ochiai_sum},
                       {"mean_ochiai", mean(ochiai_sum, c.executed)},
                       {"detected", c.detected == 1},
                       {"triggering_tests", json(std::vector<std::string>(bug.triggering_tests.begin(),
                                                                           bug.triggering_tests.end()))},
                       {"mutants", rows}};
  } else {
    rep["behavior"] = {{"computed", false}, {"reason", "no kill matrix"}};
  }

  rep["cost"] = usage_cost(c, in.backend);
  rep["counts"] = to_json(c);
  return ev;
}

// ---- experiment ----------------------------------------------------------------

namespace {

std::string utc_now() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

struct LoadedBug {
  std::string id;
  std::optional<BugCase> bug;
  std::optional<BugContext> context;
  std::string error;
};

struct Cell {
  const LoadedBug* bug = nullptr;
  const GeneratorSpec* gen = nullptr;
  std::string error;
  MutationPool pool;
  std::optional<harness::KillRun> kill;
  CellEvaluation eval;
  double gen_seconds = 0.0, screen_seconds = 0.0, exec_seconds = 0.0;
  bool ok() const { return error.empty(); }
};

void add_counts(CellCounts& into, const CellCounts& c) {
  into.prompted += c.prompted;
  into.parsed += c.parsed;
  into.all += c.all;
  into.compilable += c.compilable;
  into.useless += c.useless;
  into.viable += c.viable;
  into.executed += c.executed;
  into.killed += c.killed;
  into.coupled += c.coupled;
  into.detected += c.detected;
  into.exact_match += c.exact_match;
  into.diversity_considered += c.diversity_considered;
  into.deletions += c.deletions;
  into.bleu_scored += c.bleu_scored;
  into.tree_scored += c.tree_scored;
  into.prompt_tokens += c.prompt_tokens;
  into.completion_tokens += c.completion_tokens;
  for (const auto& [k, n] : c.error_types) into.error_types[k] += n;
  for (const auto& [k, n] : c.origin_nodes) into.origin_nodes[k] += n;
}

struct Spread {
  double mean = 0.0, min = 0.0, max = 0.0;
  std::size_t n = 0;
  void add(double v) {
    min = n == 0 ? v : std::min(min, v);
    max = n == 0 ? v : std::max(max, v);
    mean += v;
    ++n;
  }
  json to_json() const {
    if (n == 0) return nullptr;
    return {{"mean", mean / static_cast<double>(n)}, {"min", min}, {"max", max}};
  }
};

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
  auto t_run = std::chrono::steady_clock::now();
  std::string started = utc_now();
  auto warn = [&](const std::string& msg) {
    if (opts.warn) opts.warn(msg);
  };
  if (cfg.generators.empty()) throw Error(ErrorCode::Config, "no generators configured");
  if (cfg.context_length < 1 || cfg.context_length > 3) {
    throw Error(ErrorCode::Config, "config key 'context_length': must be 1, 2 or 3");
  }
  auto rules = effective_rules(cfg.adapter);

  std::vector<fs::path> bug_dirs;
  if (cfg.bugs.empty()) {
    bug_dirs = discover_bug_cases(cfg.bugs_dir);
  } else {
    for (const auto& b : cfg.bugs) bug_dirs.push_back(cfg.bugs_dir / b);
  }
  if (bug_dirs.empty()) throw Error(ErrorCode::Config, "no bug cases under " + cfg.bugs_dir.string());

  std::map<std::string, std::unique_ptr<llmgen::ChatBackend>> backends;
  for (const auto& g : cfg.generators) {
    if (g.type != GeneratorType::Llm || backends.count(g.backend)) continue;
    const auto* d = cfg.backend(g.backend);
    if (!d) throw Error(ErrorCode::Config, "generator " + g.id + ": unknown backend " + g.backend);
    backends[g.backend] = llmgen::make_backend(*d);
  }

  std::size_t workers = std::max<std::size_t>(1, cfg.workers);
  std::vector<LoadedBug> bugs(bug_dirs.size());
  harness::parallel_for(bug_dirs.size(), workers, [&](std::size_t i) {
    LoadedBug& lb = bugs[i];
    lb.id = bug_dirs[i].filename().string();
    try {
      auto adapter = make_adapter(cfg.adapter);
      lb.bug = load_bug_case(bug_dirs[i], *adapter);
      lb.context = extract_context(*lb.bug, cfg.context_length);
    } catch (const std::exception& e) {
      lb.error = e.what();
      lb.bug.reset();
    }
  });
  for (const auto& lb : bugs) {
    if (!lb.error.empty()) warn("bug " + lb.id + ": " + lb.error);
  }

  fs::create_directories(cfg.out_dir);
  std::vector<Cell> cells;
  for (const auto& lb : bugs) {
    for (const auto& g : cfg.generators) {
      Cell c;
      c.bug = &lb;
      c.gen = &g;
      cells.push_back(std::move(c));
    }
  }
  std::mutex warn_mu;
  harness::parallel_for(cells.size(), workers, [&](std::size_t i) {
    Cell& cell = cells[i];
    const LoadedBug& lb = *cell.bug;
    if (!lb.bug) {
      cell.error = "bug case not loaded: " + lb.error;
      return;
    }
    try {
      auto adapter = make_adapter(cfg.adapter);
      llmgen::ChatBackend* backend = nullptr;
      if (cell.gen->type == GeneratorType::Llm) backend = backends.at(cell.gen->backend).get();
      auto t0 = std::chrono::steady_clock::now();
      auto gen = generate(*lb.bug, *lb.context, *cell.gen, backend, lb.id + "/" + cell.gen->id);
      cell.gen_seconds = seconds_since(t0);
      t0 = std::chrono::steady_clock::now();
      cell.pool = screen_and_classify(*adapter, lb.bug->fixed, std::move(gen.pool));
      cell.screen_seconds = seconds_since(t0);
      t0 = std::chrono::steady_clock::now();
      harness::ExecOptions eo;
      eo.timeout = cfg.test_timeout;
      eo.warn = [&](const std::string& m) {
        std::lock_guard lk(warn_mu);
        warn(lb.id + "/" + cell.gen->id + ": " + m);
      };
      cell.kill = execute(*adapter, lb.bug->fixed, cell.pool, eo);
      cell.exec_seconds = seconds_since(t0);
      EvaluationInput in;
      in.bug = &*lb.bug;
      in.context = &*lb.context;
      in.pool = &cell.pool;
      in.matrix = &cell.kill->matrix;
      in.rules = rules;
      in.backend = backend ? &backend->descriptor() : nullptr;
      in.prompted = gen.prompted;
      in.parsed = cell.pool.stats.responses_parsed;
      cell.eval = evaluate_cell(in);
    } catch (const std::exception& e) {
      cell.error = e.what();
      cell.kill.reset();
    }
  });

  RunResult out;
  std::vector<fs::path> written;
  auto emit = [&](const std::string& name, const std::string& content) {
    write_file(cfg.out_dir / name, content);
    written.push_back(name);
  };

  // Per-cell files.
  json cells_json = json::array();
  json manifest_cells = json::array();
  json timing_cells = json::array();
  for (const auto& cell : cells) {
    const std::string& bug = cell.bug->id;
    const std::string& gen = cell.gen->id;
    json cj = {{"bug", bug}, {"generator", gen}};
    json mj = {{"bug", bug}, {"generator", gen}};
    if (!cell.ok()) {
      ++out.failed_cells;
      warn("cell " + bug + " x " + gen + " failed: " + cell.error);
      cj["status"] = "error";
      cj["error"] = cell.error;
      mj["status"] = "error";
      mj["error"] = cell.error;
    } else {
      cj["status"] = "ok";
      cj["target"] = to_json(cell.bug->context->target);
      for (auto it = cell.eval.report.begin(); it != cell.eval.report.end(); ++it) cj[it.key()] = *it;
      mj["status"] = "ok";
      mj["counts"] = to_json(cell.eval.counts);
      std::string stem = bug + "-" + gen;
      emit("pool-" + stem + ".json", to_json(cell.pool).dump(2) + "\n");
      mj["pool"] = "pool-" + stem + ".json";
      if (cell.kill) {
        emit("killmatrix-" + stem + ".csv", kill_matrix_to_csv(cell.kill->matrix));
        mj["killmatrix"] = "killmatrix-" + stem + ".csv";
        mj["test_timeout"] = cell.kill->timeout;
        mj["excluded_tests"] = cell.kill->excluded;
      }
      timing_cells.push_back({{"bug", bug},
                              {"generator", gen},
                              {"generation_seconds", cell.gen_seconds},
                              {"llm_wall_seconds", cell.pool.stats.wall_time},
                              {"agt_seconds", cell.pool.records.empty()
                                                  ? json(nullptr)
                                                  : json(cell.pool.stats.wall_time /
                                                         static_cast<double>(cell.pool.records.size()))},
                              {"screen_seconds", cell.screen_seconds},
                              {"execution_seconds", cell.exec_seconds},
                              {"baseline_seconds", cell.kill ? cell.kill->baseline_wall_time : 0.0}});
    }
    cells_json.push_back(std::move(cj));
    manifest_cells.push_back(std::move(mj));
  }

  // Per-generator aggregates (micro sums over successful cells).
  json aggregate = json::object();
  json manifest_gens = json::object();
  json sample_seeds = json::object();
  json samples = json::object();
  std::vector<MutationPool> gen_pools;
  std::map<std::string, bool> coupled_by_id;
  for (const auto& cell : cells) {
    for (const auto& [id, cpl] : cell.eval.coupled_by_id) coupled_by_id[id] = cpl;
  }
  for (const auto& g : cfg.generators) {
    CellCounts total;
    std::size_t bugs_evaluated = 0, cells_failed = 0, macro_n = 0;
    double cpr_macro = 0.0, ochiai_macro = 0.0, ochiai_sum = 0.0, bleu_sum = 0.0, tree_sum = 0.0;
    syntax::KindHistogram hist;
    MutationPool all;
    all.generator_id = g.id;
    for (const auto& cell : cells) {
      if (cell.gen != &g) continue;
      if (!cell.ok()) {
        ++cells_failed;
        continue;
      }
      ++bugs_evaluated;
      const auto& c = cell.eval.counts;
      add_counts(total, c);
      const json& rep = cell.eval.report;
      ochiai_sum += rep["behavior"].value("ochiai_sum", 0.0);
      bleu_sum += rep["syntactic"]["bleu"]["sum"].get<double>();
      tree_sum += rep["syntactic"]["tree_distance"]["sum"].get<double>();
      for (const auto& [k, n] : rep["syntactic"]["diversity"]["histogram"].items()) {
        hist[*syntax::node_kind_from_string(k)] += n.get<std::size_t>();
      }
      if (c.executed > 0) {
        ++macro_n;
        cpr_macro += static_cast<double>(c.coupled) / static_cast<double>(c.executed);
        ochiai_macro += rep["behavior"]["ochiai_sum"].get<double>() / static_cast<double>(c.executed);
      }
      for (const auto& r : cell.pool.records) all.records.push_back(r);
    }
    json top = json::array();
    for (const auto& k : metrics::top_kinds(hist, 3)) {
      top.push_back({{"kind", syntax::to_string(k.kind)}, {"count", k.count}, {"share", k.share}});
    }
    const llmgen::BackendDescriptor* d = g.type == GeneratorType::Llm ? cfg.backend(g.backend) : nullptr;
    json agg = {
        {"type", g.type == GeneratorType::Llm ? "llm" : "rule"},
        {"bugs_evaluated", bugs_evaluated},
        {"cells_failed", cells_failed},
        {"counts", to_json(total)},
        {"cr", ratio(total.compilable, total.all)},
        {"umr", ratio(total.useless, total.all)},
        {"rbd", ratio(total.detected, bugs_evaluated)},
        {"coupling_rate", ratio(total.coupled, total.executed)},
        {"coupling_rate_macro", macro_n == 0 ? json(nullptr) : json(cpr_macro / static_cast<double>(macro_n))},
        {"mean_ochiai", mean(ochiai_sum, total.executed)},
        {"mean_ochiai_macro", macro_n == 0 ? json(nullptr) : json(ochiai_macro / static_cast<double>(macro_n))},
        {"mutation_score", ratio(total.killed, total.executed)},
        {"exact_match", total.exact_match},
        {"deletion_ratio", ratio(total.deletions, total.diversity_considered)},
        {"bleu_mean", mean(bleu_sum, total.bleu_scored)},
        {"tree_distance_mean", mean(tree_sum, total.tree_scored)},
        {"new_node_kinds", count_map(hist, kind_name)},
        {"top_new_node_kinds", top},
        {"error_type_fractions", fraction_map(total.error_types, error_name)},
        {"origin_node_fractions", fraction_map(total.origin_nodes, kind_name)},
        {"cost", usage_cost(total, d)}};
    if (g.type == GeneratorType::Llm) {
      agg["backend"] = g.backend;
      agg["prompt"] = llmgen::to_string(g.prompt);
    }

    // Equivalence sample over viable mutants.
    std::vector<std::string> viable_ids;
    for (const auto& r : all.records) {
      if (r.status.viable()) viable_ids.push_back(r.id);
    }
    std::uint64_t sseed = cfg.seed;
    sample_seeds[g.id] = sseed;
    json sj = {{"population", viable_ids.size()}, {"confidence", cfg.confidence}, {"margin", cfg.margin},
               {"seed", sseed}};
    std::vector<metrics::LabelRow> rows;
    if (!viable_ids.empty()) {
      auto plan = metrics::plan_sample(viable_ids.size(), cfg.confidence, cfg.margin, sseed);
      for (const auto& id : metrics::draw_sample(viable_ids, plan)) rows.push_back({id, "", std::nullopt});
      sj["n"] = plan.n;
    } else {
      sj["n"] = 0;
    }
    emit("sample-" + g.id + ".csv", metrics::labels_to_csv(rows));
    sj["file"] = "sample-" + g.id + ".csv";
    samples[g.id] = sj;

    if (auto it = cfg.labels.find(g.id); it != cfg.labels.end()) {
      auto labels = metrics::labels_from_csv(read_file(it->second));
      if (!all.records.empty()) {
        auto u = metrics::usability(all, &labels);
        agg["emr_estimate"] = u.emr_estimate ? json(*u.emr_estimate) : json(nullptr);
        agg["emr_sample"] = u.emr_sample;
        agg["emr_equivalent"] = u.emr_equivalent;
      }
    }
    aggregate[g.id] = agg;
    manifest_gens[g.id] = {{"bugs_evaluated", bugs_evaluated},
                           {"cells_failed", cells_failed},
                           {"counts", to_json(total)},
                           {"new_node_kinds", count_map(hist, kind_name)}};
    gen_pools.push_back(std::move(all));
  }

  // Equal-count comparison.
  json equal_count = json::object();
  json subsample_seeds = json::array();
  json round_counts = json::array();
  std::vector<MutationPool> nonempty;
  for (const auto& p : gen_pools) {
    if (!p.records.empty()) nonempty.push_back(p);
  }
  if (nonempty.size() >= 2) {
    std::map<std::string, Spread> cr, umr, cpr;
    std::size_t size = 0;
    for (std::size_t r = 0; r < cfg.subsample_rounds; ++r) {
      std::uint64_t s = cfg.seed + r;
      subsample_seeds.push_back(s);
      auto subs = equal_count_subsample(nonempty, s);
      json rc = json::object();
      for (const auto& p : subs) {
        size = p.records.size();
        auto sc = set_counts(p);
        cr[p.generator_id].add(static_cast<double>(sc.compilable) / static_cast<double>(sc.all));
        umr[p.generator_id].add(static_cast<double>(sc.useless) / static_cast<double>(sc.all));
        std::size_t executed = 0, coupled = 0;
        for (const auto& rec : p.records) {
          auto it = coupled_by_id.find(rec.id);
          if (it == coupled_by_id.end()) continue;
          ++executed;
          coupled += it->second ? 1 : 0;
        }
        if (executed > 0) cpr[p.generator_id].add(static_cast<double>(coupled) / static_cast<double>(executed));
        rc[p.generator_id] = {{"all", sc.all},
                              {"compilable", sc.compilable},
                              {"useless", sc.useless},
                              {"executed", executed},
                              {"coupled", coupled}};
      }
      round_counts.push_back({{"seed", s}, {"generators", rc}});
    }
    equal_count["rounds"] = cfg.subsample_rounds;
    equal_count["size"] = size;
    json per = json::object();
    for (const auto& p : nonempty) {
      per[p.generator_id] = {{"cr", cr[p.generator_id].to_json()},
                             {"umr", umr[p.generator_id].to_json()},
                             {"coupling_rate", cpr[p.generator_id].to_json()}};
    }
    equal_count["generators"] = per;
  }

  json gen_ids = json::array();
  for (const auto& g : cfg.generators) gen_ids.push_back(g.id);
  json bug_ids = json::array();
  for (const auto& b : bugs) bug_ids.push_back(b.id);

  json report = {{"format", "mutforge-report"},
                 {"version", 1},
                 {"seed", cfg.seed},
                 {"context_length", cfg.context_length},
                 {"adapter", cfg.adapter.kind},
                 {"generators", gen_ids},
                 {"bugs", bug_ids},
                 {"cells", cells_json},
                 {"aggregate", aggregate},
                 {"equal_count", equal_count},
                 {"samples", samples}};
  emit("report.json", report.dump(2) + "\n");
  std::string summary = render_summary({report});
  emit("summary.md", summary);

  json timing = {{"cells", timing_cells}, {"total_seconds", seconds_since(t_run)}};
  emit("timing.json", timing.dump(2) + "\n");

  json backend_seeds = json::object();
  for (const auto& b : cfg.backends) backend_seeds[b.id] = b.seed;
  json bug_errors = json::object();
  for (const auto& b : bugs) {
    if (!b.error.empty()) bug_errors[b.id] = b.error;
  }
  json outputs = json::array();
  for (const auto& p : written) outputs.push_back(p.generic_string());
  outputs.push_back("manifest.json");
  json manifest = {{"format", "mutforge-manifest"},
                   {"version", 1},
                   {"config", config_to_json(cfg)},
                   {"generators", gen_ids},
                   {"bugs", bug_ids},
                   {"bug_errors", bug_errors},
                   {"seeds",
                    {{"run", cfg.seed},
                     {"backends", backend_seeds},
                     {"samples", sample_seeds},
                     {"subsample", subsample_seeds}}},
                   {"started_at", started},
                   {"finished_at", utc_now()},
                   {"counts",
                    {{"cells", manifest_cells},
                     {"generators", manifest_gens},
                     {"equal_count_rounds", round_counts}}},
                   {"outputs", outputs}};
  write_file(cfg.out_dir / "manifest.json", manifest.dump(2) + "\n");
  written.push_back("manifest.json");

  out.report = std::move(report);
  out.manifest = std::move(manifest);
  out.timing = std::move(timing);
  out.summary = std::move(summary);
  out.written = std::move(written);
  return out;
}

// ---- summary ---------------------------------------------------------------------

namespace {

std::string pct(const json& v) {
  if (v.is_null()) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * v.get<double>());
  return buf;
}

std::string num(const json& v, int digits) {
  if (v.is_null()) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v.get<double>());
  return buf;
}

std::string row(const std::vector<std::string>& cells) {
  std::string s = "|";
  for (const auto& c : cells) s += " " + c + " |";
  return s + "\n";
}

std::string rule(std::size_t n) {
  std::string s = "|";
  for (std::size_t i = 0; i < n; ++i) s += i == 0 ? "---|" : "---:|";
  return s + "\n";
}

}  // namespace

std::string render_summary(const std::vector<json>& reports) {
  struct Column {
    std::string name;
    const json* agg;
    const json* equal;
  };
  std::vector<Column> cols;
  std::set<std::string> seen;
  std::size_t bugs = 0;
  for (std::size_t r = 0; r < reports.size(); ++r) {
    const json& rep = reports[r];
    bugs = std::max<std::size_t>(bugs, rep.at("bugs").size());
    for (const auto& g : rep.at("generators")) {
      std::string name = g.get<std::string>();
      const json& agg = rep.at("aggregate").at(name);
      const json* eq = nullptr;
      if (rep.contains("equal_count") && rep["equal_count"].contains("generators") &&
          rep["equal_count"]["generators"].contains(name)) {
        eq = &rep["equal_count"]["generators"][name];
      }
      std::string label = name;
      for (int k = 2; seen.count(label); ++k) label = name + " (" + std::to_string(k) + ")";
      seen.insert(label);
      cols.push_back({label, &agg, eq});
    }
  }
  std::string s = "# Mutation study summary\n\n";
  s += "Bug cases: " + std::to_string(bugs) + "\n\n";
  s += "## Overall performance\n\n";
  auto header = [&](const std::string& first) {
    std::vector<std::string> h = {first};
    for (const auto& c : cols) h.push_back(c.name);
    return row(h) + rule(h.size());
  };
  s += header("Metric");
  auto metric_row = [&](const std::string& label, auto&& cell) {
    std::vector<std::string> r = {label};
    for (const auto& c : cols) r.push_back(cell(*c.agg));
    s += row(r);
  };
  auto count = [](const char* key) {
    return [key](const json& a) { return std::to_string(a["counts"][key].get<std::size_t>()); };
  };
  metric_row("Mutations", count("all"));
  metric_row("Compilable", count("compilable"));
  metric_row("Useless", count("useless"));
  metric_row("Viable", count("viable"));
  metric_row("Compilation rate", [](const json& a) { return pct(a["cr"]); });
  metric_row("Useless mutation rate", [](const json& a) { return pct(a["umr"]); });
  metric_row("Equivalent mutation rate (sample)", [](const json& a) {
    if (!a.contains("emr_estimate")) return std::string("not labeled");
    return pct(a["emr_estimate"]) + " (n=" + std::to_string(a["emr_sample"].get<std::size_t>()) + ")";
  });
  metric_row("Real bug detectability", [](const json& a) { return pct(a["rbd"]); });
  metric_row("Coupling rate", [](const json& a) { return pct(a["coupling_rate"]); });
  metric_row("Mean Ochiai", [](const json& a) { return num(a["mean_ochiai"], 3); });
  metric_row("Mutation score", [](const json& a) { return pct(a["mutation_score"]); });
  metric_row("Exact matches", count("exact_match"));
  metric_row("Deletion ratio", [](const json& a) { return pct(a["deletion_ratio"]); });
  metric_row("Mean BLEU", [](const json& a) { return num(a["bleu_mean"], 3); });
  metric_row("Mean tree distance", [](const json& a) { return num(a["tree_distance_mean"], 2); });
  metric_row("Cost per 1K mutations (USD)", [](const json& a) {
    const json& c = a["cost"];
    return c.contains("usd_per_1k_mutations") ? num(c["usd_per_1k_mutations"], 4) : std::string("n/a");
  });

  s += "\n## Error types of non-compilable mutations\n\n";
  s += header("Error type");
  for (auto t : all_error_types()) {
    std::vector<std::string> r = {to_string(t)};
    bool any = false;
    for (const auto& c : cols) {
      const json& counts = (*c.agg)["counts"]["error_types"];
      std::size_t n = counts.contains(to_string(t)) ? counts[to_string(t)].get<std::size_t>() : 0;
      std::size_t total = 0;
      for (const auto& [k, v] : counts.items()) total += v.get<std::size_t>();
      any = any || n > 0;
      r.push_back(std::to_string(n) + " (" + pct(ratio(n, total)) + ")");
    }
    if (any) s += row(r);
  }

  s += "\n## Origin node kinds of non-compilable mutations\n\n";
  s += header("Node kind");
  std::set<std::string> kinds;
  for (const auto& c : cols) {
    for (const auto& [k, v] : (*c.agg)["counts"]["origin_nodes"].items()) kinds.insert(k);
  }
  for (const auto& k : kinds) {
    std::vector<std::string> r = {k};
    for (const auto& c : cols) {
      const json& counts = (*c.agg)["counts"]["origin_nodes"];
      std::size_t n = counts.contains(k) ? counts[k].get<std::size_t>() : 0;
      std::size_t total = 0;
      for (const auto& [kk, v] : counts.items()) total += v.get<std::size_t>();
      r.push_back(std::to_string(n) + " (" + pct(ratio(n, total)) + ")");
    }
    s += row(r);
  }

  s += "\n## Top newly introduced node kinds\n\n";
  s += header("Rank");
  for (std::size_t i = 0; i < 3; ++i) {
    std::vector<std::string> r = {"#" + std::to_string(i + 1)};
    for (const auto& c : cols) {
      const json& top = (*c.agg)["top_new_node_kinds"];
      r.push_back(i < top.size() ? top[i]["kind"].get<std::string>() + " (" + pct(top[i]["share"]) + ")"
                                 : "-");
    }
    s += row(r);
  }

  bool any_equal = std::any_of(cols.begin(), cols.end(), [](const Column& c) { return c.equal; });
  if (any_equal) {
    s += "\n## Equal-count comparison (mean [min, max] over rounds)\n\n";
    s += header("Metric");
    for (const char* key : {"cr", "umr", "coupling_rate"}) {
      std::vector<std::string> r = {std::string(key) == "cr"    ? "Compilation rate"
                                    : std::string(key) == "umr" ? "Useless mutation rate"
                                                                : "Coupling rate"};
      for (const auto& c : cols) {
        if (!c.equal || (*c.equal)[key].is_null()) {
          r.push_back("-");
          continue;
        }
        const json& v = (*c.equal)[key];
        r.push_back(pct(v["mean"]) + " [" + pct(v["min"]) + ", " + pct(v["max"]) + "]");
      }
      s += row(r);
    }
  }
  return s;
}

}  // namespace mutforge::study
