// mutforge command-line tool. Links only the C API.

#include <mutforge/mutforge.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

namespace fs = std::filesystem;

namespace {

constexpr int kExitError = 1;
constexpr int kExitUsage = 2;
constexpr int kExitPartial = 3;

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::string out_dir;
  std::optional<int> context_length;
  std::optional<double> test_timeout;
  bool verbose = false;
};

struct Failure {
  int exit_code = kExitError;
};

Globals g;

void report_error() {
  if (g.verbose) {
    std::cerr << mf_last_error_json() << "\n";
  } else {
    std::cerr << "mutforge: " << mf_status_name(mf_last_error_code()) << ": " << mf_last_error_message() << "\n";
  }
}

void check(mf_status s) {
  if (s != MF_OK) {
    report_error();
    throw Failure{};
  }
}

[[noreturn]] void usage_error(const std::string& msg) {
  if (g.verbose) {
    std::cerr << R"({"error":"Usage","code":)" << kExitUsage << R"(,"message":")" << msg << "\"}\n";
  } else {
    std::cerr << "mutforge: " << msg << "\n";
  }
  throw Failure{kExitUsage};
}

template <typename T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using Config = std::unique_ptr<mf_config, Deleter<mf_config, mf_config_free>>;
using Bug = std::unique_ptr<mf_bug, Deleter<mf_bug, mf_bug_free>>;
using Pool = std::unique_ptr<mf_pool, Deleter<mf_pool, mf_pool_free>>;
using Matrix = std::unique_ptr<mf_kill_matrix, Deleter<mf_kill_matrix, mf_kill_matrix_free>>;

struct OwnedString {
  char* s = nullptr;
  ~OwnedString() { mf_string_free(s); }
  std::string str() const { return s ? s : ""; }
};

Config load_config() {
  mf_config* raw = nullptr;
  check(g.config.empty() ? mf_config_new(&raw) : mf_config_load(g.config.c_str(), &raw));
  Config cfg(raw);
  if (g.seed) check(mf_config_set_seed(cfg.get(), *g.seed));
  if (g.workers) check(mf_config_set_workers(cfg.get(), *g.workers));
  if (!g.out_dir.empty()) check(mf_config_set_out_dir(cfg.get(), g.out_dir.c_str()));
  if (g.context_length) check(mf_config_set_context_length(cfg.get(), *g.context_length));
  if (g.test_timeout) check(mf_config_set_test_timeout(cfg.get(), *g.test_timeout));
  return cfg;
}

Bug load_bug(const mf_config* cfg, const std::string& dir) {
  mf_bug* raw = nullptr;
  check(mf_bug_load(cfg, dir.c_str(), &raw));
  return Bug(raw);
}

Pool load_pool(const std::string& path) {
  mf_pool* raw = nullptr;
  check(mf_pool_load(path.c_str(), &raw));
  return Pool(raw);
}

std::string output_path(const mf_config* cfg, const std::string& given, const std::string& fallback) {
  fs::path p = given.empty() ? fs::path(mf_config_out_dir(cfg)) / fallback : fs::path(given);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  return p.string();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) usage_error("cannot write " + path);
}

void print_counts(const mf_pool* pool) {
  size_t all = 0, comp = 0, useless = 0, viable = 0;
  check(mf_pool_counts(pool, &all, &comp, &useless, &viable));
  std::printf("all=%zu compilable=%zu useless=%zu viable=%zu\n", all, comp, useless, viable);
}

// ---- subcommands ----

struct StageArgs {
  std::string bug;
  std::string generator;
  std::string pool;
  std::string matrix;
  std::string labels;
  std::string output;
  double confidence = 0.95;
  double margin = 0.05;
  std::vector<std::string> reports;
};

void run_generate(const StageArgs& a) {
  auto cfg = load_config();
  auto bug = load_bug(cfg.get(), a.bug);
  mf_pool* raw = nullptr;
  check(mf_generate(cfg.get(), bug.get(), a.generator.c_str(), &raw));
  Pool pool(raw);
  auto out = output_path(cfg.get(), a.output, "pool-" + std::string(mf_bug_id(bug.get())) + "-" + a.generator + ".json");
  check(mf_pool_save(pool.get(), out.c_str()));
  std::printf("%zu mutations -> %s\n", mf_pool_size(pool.get()), out.c_str());
}

void run_filter(const StageArgs& a) {
  auto cfg = load_config();
  auto bug = load_bug(cfg.get(), a.bug);
  auto pool = load_pool(a.pool);
  check(mf_filter(cfg.get(), bug.get(), pool.get()));
  std::string out = a.output.empty() ? a.pool : a.output;
  check(mf_pool_save(pool.get(), out.c_str()));
  print_counts(pool.get());
}

void run_execute(const StageArgs& a) {
  auto cfg = load_config();
  auto bug = load_bug(cfg.get(), a.bug);
  auto pool = load_pool(a.pool);
  mf_kill_matrix* raw = nullptr;
  check(mf_execute(cfg.get(), bug.get(), pool.get(), &raw));
  Matrix m(raw);
  auto stem = fs::path(a.pool).stem().string();
  if (stem.rfind("pool-", 0) == 0) stem = stem.substr(5);
  auto out = output_path(cfg.get(), a.output, "killmatrix-" + stem + ".csv");
  check(mf_kill_matrix_save(m.get(), out.c_str()));
  std::printf("kill matrix -> %s\n", out.c_str());
}

void run_metrics(const StageArgs& a) {
  auto cfg = load_config();
  auto bug = load_bug(cfg.get(), a.bug);
  auto pool = load_pool(a.pool);
  Matrix m;
  if (!a.matrix.empty()) {
    mf_kill_matrix* raw = nullptr;
    check(mf_kill_matrix_load(a.matrix.c_str(), &raw));
    m.reset(raw);
  }
  OwnedString report;
  check(mf_metrics(cfg.get(), bug.get(), pool.get(), m.get(), a.labels.empty() ? nullptr : a.labels.c_str(),
                   &report.s));
  if (a.output.empty()) {
    std::cout << report.str() << "\n";
  } else {
    auto out = output_path(cfg.get(), a.output, "");
    write_text(out, report.str() + "\n");
  }
}

void run_sample(const StageArgs& a) {
  auto cfg = load_config();
  auto pool = load_pool(a.pool);
  auto stem = fs::path(a.pool).stem().string();
  if (stem.rfind("pool-", 0) == 0) stem = stem.substr(5);
  auto out = output_path(cfg.get(), a.output, "sample-" + stem + ".csv");
  size_t rows = 0;
  check(mf_sample(pool.get(), a.confidence, a.margin, mf_config_seed(cfg.get()), out.c_str(), &rows));
  std::printf("%zu rows -> %s\n", rows, out.c_str());
}

void run_experiment(const StageArgs&) {
  if (g.config.empty()) usage_error("experiment requires --config");
  auto cfg = load_config();
  OwnedString summary;
  size_t failed = 0;
  auto warn = [](const char* msg, void*) { std::cerr << "mutforge: warning: " << msg << "\n"; };
  check(mf_experiment_run(cfg.get(), warn, nullptr, &summary.s, &failed));
  std::printf("report -> %s\n", (fs::path(mf_config_out_dir(cfg.get())) / "report.json").string().c_str());
  if (failed > 0) {
    std::cerr << "mutforge: " << failed << " cell(s) failed; see manifest.json\n";
    throw Failure{kExitPartial};
  }
}

void run_compare(const StageArgs& a) {
  std::vector<const char*> paths;
  for (const auto& r : a.reports) paths.push_back(r.c_str());
  OwnedString md;
  check(mf_compare(paths.data(), paths.size(), &md.s));
  if (a.output.empty()) {
    std::cout << md.str();
  } else {
    write_text(a.output, md.str());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mutation generation and evaluation pipeline"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(mf_version()));
  app.add_option("-c,--config", g.config, "Run configuration (TOML or JSON)")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Seed for every random choice");
  app.add_option("--workers", g.workers, "Parallel workers")->check(CLI::PositiveNumber);
  app.add_option("--out-dir", g.out_dir, "Output directory");
  app.add_option("--context-length", g.context_length, "Lines around the bug handed to generators (1-3)");
  app.add_option("--test-timeout", g.test_timeout, "Per-test timeout in seconds");
  app.add_flag("-v,--verbose", g.verbose, "Machine-readable JSON errors on stderr");

  StageArgs a;
  auto* gen = app.add_subcommand("generate", "Run one generator on a bug case and write its pool");
  gen->add_option("--bug", a.bug, "Bug case directory")->required()->check(CLI::ExistingDirectory);
  gen->add_option("--generator", a.generator, "Generator id from the configuration")->required();
  gen->add_option("-o,--output", a.output, "Pool JSON (default: <out-dir>/pool-<bug>-<generator>.json)");

  auto* filt = app.add_subcommand("filter", "Classify a pool by compiling its mutants");
  filt->add_option("--bug", a.bug, "Bug case directory")->required()->check(CLI::ExistingDirectory);
  filt->add_option("--pool", a.pool, "Pool JSON")->required()->check(CLI::ExistingFile);
  filt->add_option("-o,--output", a.output, "Classified pool (default: rewrite --pool)");

  auto* exec = app.add_subcommand("execute", "Build the kill matrix of a classified pool");
  exec->add_option("--bug", a.bug, "Bug case directory")->required()->check(CLI::ExistingDirectory);
  exec->add_option("--pool", a.pool, "Classified pool JSON")->required()->check(CLI::ExistingFile);
  exec->add_option("-o,--output", a.output, "Kill matrix CSV (default: <out-dir>/killmatrix-<name>.csv)");

  auto* met = app.add_subcommand("metrics", "Compute every report for a classified pool");
  met->add_option("--bug", a.bug, "Bug case directory")->required()->check(CLI::ExistingDirectory);
  met->add_option("--pool", a.pool, "Classified pool JSON")->required()->check(CLI::ExistingFile);
  met->add_option("--matrix", a.matrix, "Kill matrix CSV")->check(CLI::ExistingFile);
  met->add_option("--labels", a.labels, "Completed equivalence sample CSV")->check(CLI::ExistingFile);
  met->add_option("-o,--output", a.output, "Report JSON (default: stdout)");

  auto* samp = app.add_subcommand("sample", "Write an equivalence-sample skeleton for a pool");
  samp->add_option("--pool", a.pool, "Pool JSON")->required()->check(CLI::ExistingFile);
  samp->add_option("--confidence", a.confidence, "0.90, 0.95 or 0.99")->capture_default_str();
  samp->add_option("--margin", a.margin, "Margin of error")->capture_default_str();
  samp->add_option("-o,--output", a.output, "Sample CSV (default: <out-dir>/sample-<name>.csv)");

  auto* exp = app.add_subcommand("experiment", "Run the full bug x generator grid from --config");

  auto* cmp = app.add_subcommand("compare", "Render a summary table from report.json files");
  cmp->add_option("reports", a.reports, "report.json files")->required()->check(CLI::ExistingFile);
  cmp->add_option("-o,--output", a.output, "Markdown file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (gen->parsed()) run_generate(a);
    if (filt->parsed()) run_filter(a);
    if (exec->parsed()) run_execute(a);
    if (met->parsed()) run_metrics(a);
    if (samp->parsed()) run_sample(a);
    if (exp->parsed()) run_experiment(a);
    if (cmp->parsed()) run_compare(a);
  } catch (const Failure& f) {
    return f.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "mutforge: " << e.what() << "\n";
    return kExitError;
  }
  return 0;
}
