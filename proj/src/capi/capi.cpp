#include <mutforge/mutforge.h>

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "core/error.hpp"
#include "core/serialize.hpp"
#include "metrics/metrics.hpp"
#include "study/experiment.hpp"

using namespace mutforge;
using json = nlohmann::json;

struct mf_config {
  study::ExperimentConfig cfg;
};

struct mf_bug {
  BugCase bug;
  study::BugContext context;
};

struct mf_pool {
  MutationPool pool;
};

struct mf_kill_matrix {
  KillMatrix matrix;
};

namespace {

struct LastError {
  mf_status code = MF_OK;
  std::string message;
  std::string as_json;
};

thread_local LastError g_error;

mf_status fail(mf_status code, std::string message) {
  g_error.code = code;
  g_error.message = std::move(message);
  g_error.as_json = json{{"error", mf_status_name(code)}, {"code", static_cast<int>(code)},
                         {"message", g_error.message}}
                        .dump();
  return code;
}

mf_status ok() {
  g_error = LastError{};
  return MF_OK;
}

template <typename F>
mf_status guarded(F&& f) {
  try {
    f();
    return ok();
  } catch (const Error& e) {
    return fail(static_cast<mf_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(MF_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(MF_INTERNAL, e.what());
  }
}

#define MF_REQUIRE(cond, what) \
  if (!(cond)) return fail(MF_INVALID_ARGUMENT, what)

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

const study::GeneratorSpec* find_generator(const study::ExperimentConfig& cfg, const std::string& id) {
  for (const auto& g : cfg.generators) {
    if (g.id == id) return &g;
  }
  return nullptr;
}

}  // namespace

extern "C" {

const char* mf_version(void) { return "0.1.0"; }

const char* mf_status_name(mf_status status) {
  if (status == MF_OK) return "Ok";
  if (status < MF_INVALID_ARGUMENT || status > MF_INTERNAL) return "Unknown";
  return to_string(static_cast<ErrorCode>(status));
}

mf_status mf_last_error_code(void) { return g_error.code; }
const char* mf_last_error_message(void) { return g_error.message.c_str(); }
const char* mf_last_error_json(void) { return g_error.as_json.c_str(); }

void mf_string_free(char* s) { std::free(s); }

// ---- configuration ----

mf_status mf_config_new(mf_config** out) {
  MF_REQUIRE(out, "out is null");
  *out = nullptr;
  return guarded([&] {
    auto c = std::make_unique<mf_config>();
    c->cfg.backends.push_back(llmgen::BackendDescriptor{});
    for (auto t : {llmgen::PromptTemplate::P1, llmgen::PromptTemplate::P2, llmgen::PromptTemplate::P3,
                   llmgen::PromptTemplate::P4}) {
      study::GeneratorSpec g;
      g.type = study::GeneratorType::Llm;
      g.backend = "stub";
      g.prompt = t;
      g.id = std::string("stub-") + (t == llmgen::PromptTemplate::P1   ? "p1"
                                     : t == llmgen::PromptTemplate::P2 ? "p2"
                                     : t == llmgen::PromptTemplate::P3 ? "p3"
                                                                       : "p4");
      c->cfg.generators.push_back(g);
    }
    study::GeneratorSpec rules;
    rules.id = "rules";
    rules.type = study::GeneratorType::Rule;
    c->cfg.generators.push_back(rules);
    *out = c.release();
  });
}

mf_status mf_config_load(const char* path, mf_config** out) {
  MF_REQUIRE(path && out, "path or out is null");
  *out = nullptr;
  return guarded([&] {
    auto c = std::make_unique<mf_config>();
    c->cfg = study::load_config(path);
    *out = c.release();
  });
}

void mf_config_free(mf_config* cfg) { delete cfg; }

mf_status mf_config_set_seed(mf_config* cfg, uint64_t seed) {
  MF_REQUIRE(cfg, "config is null");
  for (auto& b : cfg->cfg.backends) {
    if (b.seed == cfg->cfg.seed) b.seed = seed;
  }
  cfg->cfg.seed = seed;
  return ok();
}

mf_status mf_config_set_workers(mf_config* cfg, size_t workers) {
  MF_REQUIRE(cfg, "config is null");
  MF_REQUIRE(workers >= 1, "workers must be at least 1");
  cfg->cfg.workers = workers;
  return ok();
}

mf_status mf_config_set_out_dir(mf_config* cfg, const char* dir) {
  MF_REQUIRE(cfg && dir && *dir, "config or dir is null");
  cfg->cfg.out_dir = dir;
  return ok();
}

mf_status mf_config_set_context_length(mf_config* cfg, int lines) {
  MF_REQUIRE(cfg, "config is null");
  if (lines < 1 || lines > 3) {
    return fail(MF_CONFIG, "config key 'context_length': must be 1, 2 or 3, got " + std::to_string(lines));
  }
  cfg->cfg.context_length = lines;
  return ok();
}

mf_status mf_config_set_test_timeout(mf_config* cfg, double seconds) {
  MF_REQUIRE(cfg, "config is null");
  MF_REQUIRE(seconds > 0.0, "test timeout must be positive");
  cfg->cfg.test_timeout = seconds;
  return ok();
}

uint64_t mf_config_seed(const mf_config* cfg) { return cfg ? cfg->cfg.seed : 0; }

const char* mf_config_out_dir(const mf_config* cfg) { return cfg ? cfg->cfg.out_dir.c_str() : ""; }

mf_status mf_config_to_json(const mf_config* cfg, char** out) {
  MF_REQUIRE(cfg && out, "config or out is null");
  *out = nullptr;
  return guarded([&] { *out = dup_string(study::config_to_json(cfg->cfg).dump(2)); });
}

// ---- stages ----

mf_status mf_bug_load(const mf_config* cfg, const char* dir, mf_bug** out) {
  MF_REQUIRE(cfg && dir && out, "config, dir or out is null");
  *out = nullptr;
  return guarded([&] {
    auto adapter = study::make_adapter(cfg->cfg.adapter);
    auto b = std::make_unique<mf_bug>();
    b->bug = study::load_bug_case(dir, *adapter);
    b->context = study::extract_context(b->bug, cfg->cfg.context_length);
    *out = b.release();
  });
}

void mf_bug_free(mf_bug* bug) { delete bug; }

const char* mf_bug_id(const mf_bug* bug) { return bug ? bug->bug.id.c_str() : ""; }

mf_status mf_generate(const mf_config* cfg, const mf_bug* bug, const char* generator_id, mf_pool** out) {
  MF_REQUIRE(cfg && bug && generator_id && out, "config, bug, generator or out is null");
  *out = nullptr;
  return guarded([&] {
    const auto* g = find_generator(cfg->cfg, generator_id);
    if (!g) throw Error(ErrorCode::Config, std::string("unknown generator '") + generator_id + "'");
    std::unique_ptr<llmgen::ChatBackend> backend;
    if (g->type == study::GeneratorType::Llm) {
      const auto* d = cfg->cfg.backend(g->backend);
      if (!d) throw Error(ErrorCode::Config, "generator " + g->id + ": unknown backend " + g->backend);
      backend = llmgen::make_backend(*d);
    }
    auto gen = study::generate(bug->bug, bug->context, *g, backend.get(), bug->bug.id + "/" + g->id);
    auto p = std::make_unique<mf_pool>();
    p->pool = std::move(gen.pool);
    *out = p.release();
  });
}

mf_status mf_pool_load(const char* path, mf_pool** out) {
  MF_REQUIRE(path && out, "path or out is null");
  *out = nullptr;
  return guarded([&] {
    auto p = std::make_unique<mf_pool>();
    p->pool = load_pool(path);
    *out = p.release();
  });
}

mf_status mf_pool_save(const mf_pool* pool, const char* path) {
  MF_REQUIRE(pool && path, "pool or path is null");
  return guarded([&] { save_pool(pool->pool, path); });
}

void mf_pool_free(mf_pool* pool) { delete pool; }

size_t mf_pool_size(const mf_pool* pool) { return pool ? pool->pool.records.size() : 0; }

mf_status mf_pool_counts(const mf_pool* pool, size_t* all, size_t* compilable, size_t* useless,
                         size_t* viable) {
  MF_REQUIRE(pool, "pool is null");
  return guarded([&] {
    metrics::UsabilityReport u;
    if (!pool->pool.records.empty()) u = metrics::usability(pool->pool);
    if (all) *all = u.all;
    if (compilable) *compilable = u.compilable;
    if (useless) *useless = u.useless;
    if (viable) *viable = u.viable;
  });
}

mf_status mf_filter(const mf_config* cfg, const mf_bug* bug, mf_pool* pool) {
  MF_REQUIRE(cfg && bug && pool, "config, bug or pool is null");
  return guarded([&] {
    auto adapter = study::make_adapter(cfg->cfg.adapter);
    pool->pool = study::screen_and_classify(*adapter, bug->bug.fixed, pool->pool,
                                            std::max<std::size_t>(1, cfg->cfg.workers));
  });
}

mf_status mf_execute(const mf_config* cfg, const mf_bug* bug, const mf_pool* pool, mf_kill_matrix** out) {
  MF_REQUIRE(cfg && bug && pool && out, "config, bug, pool or out is null");
  *out = nullptr;
  return guarded([&] {
    if (!pool->pool.classified()) throw Error(ErrorCode::InvalidArgument, "pool is not classified; filter it first");
    auto adapter = study::make_adapter(cfg->cfg.adapter);
    harness::ExecOptions eo;
    eo.workers = std::max<std::size_t>(1, cfg->cfg.workers);
    eo.timeout = cfg->cfg.test_timeout;
    auto run = study::execute(*adapter, bug->bug.fixed, pool->pool, eo);
    auto m = std::make_unique<mf_kill_matrix>();
    m->matrix = std::move(run.matrix);
    *out = m.release();
  });
}

mf_status mf_kill_matrix_load(const char* csv_path, mf_kill_matrix** out) {
  MF_REQUIRE(csv_path && out, "path or out is null");
  *out = nullptr;
  return guarded([&] {
    auto m = std::make_unique<mf_kill_matrix>();
    m->matrix = kill_matrix_from_csv(read_file(csv_path));
    *out = m.release();
  });
}

mf_status mf_kill_matrix_save(const mf_kill_matrix* m, const char* csv_path) {
  MF_REQUIRE(m && csv_path, "matrix or path is null");
  return guarded([&] { write_file(csv_path, kill_matrix_to_csv(m->matrix)); });
}

void mf_kill_matrix_free(mf_kill_matrix* m) { delete m; }

mf_status mf_metrics(const mf_config* cfg, const mf_bug* bug, const mf_pool* pool, const mf_kill_matrix* matrix,
                     const char* labels_csv, char** out_json) {
  MF_REQUIRE(cfg && bug && pool && out_json, "config, bug, pool or out is null");
  *out_json = nullptr;
  return guarded([&] {
    if (!pool->pool.classified()) throw Error(ErrorCode::InvalidArgument, "pool is not classified; filter it first");
    std::vector<metrics::LabelRow> labels;
    if (labels_csv) labels = metrics::labels_from_csv(read_file(labels_csv));
    study::EvaluationInput in;
    in.bug = &bug->bug;
    in.context = &bug->context;
    in.pool = &pool->pool;
    in.matrix = matrix ? &matrix->matrix : nullptr;
    in.rules = study::effective_rules(cfg->cfg.adapter);
    in.labels = labels_csv ? &labels : nullptr;
    if (const auto* g = find_generator(cfg->cfg, pool->pool.generator_id)) {
      if (g->type == study::GeneratorType::Llm) in.backend = cfg->cfg.backend(g->backend);
    }
    in.prompted = pool->pool.stats.prompts;
    in.parsed = pool->pool.stats.responses_parsed;
    auto eval = study::evaluate_cell(in);
    json report = eval.report;
    report["bug"] = bug->bug.id;
    report["generator"] = pool->pool.generator_id;
    report["counts"] = study::to_json(eval.counts);
    *out_json = dup_string(report.dump(2));
  });
}

mf_status mf_sample(const mf_pool* pool, double confidence, double margin, uint64_t seed, const char* csv_path,
                    size_t* rows) {
  MF_REQUIRE(pool && csv_path, "pool or path is null");
  return guarded([&] {
    bool classified = pool->pool.classified();
    std::vector<std::string> ids;
    for (const auto& r : pool->pool.records) {
      if (!classified || r.status.viable()) ids.push_back(r.id);
    }
    std::vector<metrics::LabelRow> out;
    if (!ids.empty()) {
      auto plan = metrics::plan_sample(ids.size(), confidence, margin, seed);
      for (const auto& id : metrics::draw_sample(ids, plan)) out.push_back({id, "", std::nullopt});
    }
    write_file(csv_path, metrics::labels_to_csv(out));
    if (rows) *rows = out.size();
  });
}

mf_status mf_sample_size(size_t population, double confidence, double margin, size_t* out) {
  MF_REQUIRE(out, "out is null");
  return guarded([&] { *out = metrics::sample_size(population, confidence, margin); });
}

mf_status mf_experiment_run(const mf_config* cfg, mf_warn_fn warn, void* user, char** summary_md,
                            size_t* failed_cells) {
  MF_REQUIRE(cfg, "config is null");
  if (summary_md) *summary_md = nullptr;
  return guarded([&] {
    study::RunOptions opts;
    if (warn) opts.warn = [&](const std::string& m) { warn(m.c_str(), user); };
    auto run = study::run_experiment(cfg->cfg, opts);
    if (failed_cells) *failed_cells = run.failed_cells;
    if (summary_md) *summary_md = dup_string(run.summary);
  });
}

mf_status mf_compare(const char* const* report_paths, size_t n, char** out_md) {
  MF_REQUIRE(report_paths && n > 0 && out_md, "no reports given");
  *out_md = nullptr;
  return guarded([&] {
    std::vector<json> reports;
    for (size_t i = 0; i < n; ++i) {
      if (!report_paths[i]) throw Error(ErrorCode::InvalidArgument, "report path is null");
      json j = json::parse(read_file(report_paths[i]), nullptr, false);
      if (j.is_discarded() || !j.is_object() || !j.contains("aggregate")) {
        throw Error(ErrorCode::Parse, std::string(report_paths[i]) + ": not a report.json");
      }
      reports.push_back(std::move(j));
    }
    *out_md = dup_string(study::render_summary(reports));
  });
}

}  // extern "C"
