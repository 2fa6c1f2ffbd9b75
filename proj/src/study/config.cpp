#include <toml.hpp>

#include <algorithm>
#include <cmath>
#include <cctype>
#include <regex>
#include <set>
#include <sstream>

#include "core/error.hpp"
#include "core/serialize.hpp"
#include "study/experiment.hpp"

namespace mutforge::study {

namespace fs = std::filesystem;

namespace {

std::string position(const fs::path& file, const toml::source_region& src) {
  return file.string() + ":" + std::to_string(src.begin.line) + ":" +
         std::to_string(src.begin.column);
}

json from_toml(const toml::node& n, const std::string& path, const fs::path& file, SourceMap& where) {
  where[path] = position(file, n.source());
  if (auto t = n.as_table()) {
    json out = json::object();
    for (auto&& [k, v] : *t) {
      std::string key(k.str());
      std::string child = path.empty() ? key : path + "." + key;
      out[key] = from_toml(v, child, file, where);
      // Key position is more useful than the value's.
      where[child] = position(file, k.source());
    }
    return out;
  }
  if (auto a = n.as_array()) {
    json out = json::array();
    for (std::size_t i = 0; i < a->size(); ++i) {
      out.push_back(from_toml(*a->get(i), path + "[" + std::to_string(i) + "]", file, where));
    }
    return out;
  }
  if (auto s = n.as_string()) return s->get();
  if (auto i = n.as_integer()) return i->get();
  if (auto f = n.as_floating_point()) return f->get();
  if (auto b = n.as_boolean()) return b->get();
  std::ostringstream os;
  if (auto d = n.as_date()) os << *d;
  if (auto t = n.as_time()) os << *t;
  if (auto dt = n.as_date_time()) os << *dt;
  return os.str();
}

class Reader {
 public:
  Reader(const ConfigDocument& doc) : doc_(doc) {}

  [[noreturn]] void fail(const std::string& path, const std::string& what) const {
    std::string msg = "config key '" + path + "'";
    if (auto it = doc_.where.find(path); it != doc_.where.end()) msg += " (" + it->second + ")";
    throw Error(ErrorCode::Config, msg + ": " + what);
  }

  void only(const json& obj, const std::string& path, std::initializer_list<const char*> keys) const {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      bool known = false;
      for (const char* k : keys) known = known || it.key() == k;
      if (!known) fail(join(path, it.key()), "unknown key");
    }
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

  const json& object(const json& parent, const std::string& path, const char* key) const {
    static const json empty = json::object();
    if (!parent.contains(key)) return empty;
    const json& v = parent[key];
    if (!v.is_object()) fail(join(path, key), "must be a table");
    return v;
  }

  std::optional<std::string> str(const json& obj, const std::string& path, const char* key) const {
    if (!obj.contains(key)) return std::nullopt;
    const json& v = obj[key];
    if (!v.is_string()) fail(join(path, key), "must be a string");
    return v.get<std::string>();
  }

  std::optional<std::int64_t> integer(const json& obj, const std::string& path, const char* key,
                                      std::int64_t min) const {
    if (!obj.contains(key)) return std::nullopt;
    const json& v = obj[key];
    if (!v.is_number_integer()) fail(join(path, key), "must be an integer");
    auto n = v.get<std::int64_t>();
    if (n < min) fail(join(path, key), "must be >= " + std::to_string(min));
    return n;
  }

  std::optional<double> number(const json& obj, const std::string& path, const char* key) const {
    if (!obj.contains(key)) return std::nullopt;
    const json& v = obj[key];
    if (!v.is_number()) fail(join(path, key), "must be a number");
    return v.get<double>();
  }

  std::vector<std::string> strings(const json& obj, const std::string& path, const char* key) const {
    std::vector<std::string> out;
    if (!obj.contains(key)) return out;
    const json& v = obj[key];
    if (!v.is_array()) fail(join(path, key), "must be an array of strings");
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_string()) fail(join(path, key) + "[" + std::to_string(i) + "]", "must be a string");
      out.push_back(v[i].get<std::string>());
    }
    return out;
  }

  const json& array(const json& obj, const std::string& path, const char* key) const {
    static const json empty = json::array();
    if (!obj.contains(key)) return empty;
    const json& v = obj[key];
    if (!v.is_array()) fail(join(path, key), "must be an array of tables");
    return v;
  }

  fs::path resolve(const std::string& p) const {
    fs::path path(p);
    return path.is_absolute() || doc_.base_dir.empty() ? path : doc_.base_dir / path;
  }

 private:
  const ConfigDocument& doc_;
};

bool file_safe_id(const std::string& id) {
  if (id.empty()) return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
  });
}

}  // namespace

const llmgen::BackendDescriptor* ExperimentConfig::backend(const std::string& id) const {
  for (const auto& b : backends) {
    if (b.id == id) return &b;
  }
  return nullptr;
}

ConfigDocument read_config_document(const fs::path& path) {
  ConfigDocument doc;
  doc.base_dir = path.parent_path();
  std::string text = read_file(path);
  if (path.extension() == ".toml") {
    try {
      auto tbl = toml::parse(text, path.string());
      doc.data = from_toml(tbl, "", path, doc.where);
      doc.where.erase("");
    } catch (const toml::parse_error& e) {
      throw Error(ErrorCode::Config, "config " + position(path, e.source()) + ": " +
                                         std::string(e.description()));
    }
  } else {
    try {
      doc.data = json::parse(text);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::Config, "config " + path.string() + " (byte " +
                                         std::to_string(e.byte) + "): " + e.what());
    }
    if (!doc.data.is_object()) throw Error(ErrorCode::Config, "config " + path.string() + ": not an object");
  }
  return doc;
}

ExperimentConfig config_from_document(const ConfigDocument& doc) {
  Reader rd(doc);
  const json& j = doc.data;
  rd.only(j, "", {"seed", "workers", "out_dir", "context_length", "bugs_dir", "bugs", "sampling",
                  "subsample_rounds", "test_timeout", "adapter", "backends", "generators", "labels"});
  ExperimentConfig cfg;
  if (auto v = rd.integer(j, "", "seed", 0)) cfg.seed = static_cast<std::uint64_t>(*v);
  if (auto v = rd.integer(j, "", "workers", 1)) cfg.workers = static_cast<std::size_t>(*v);
  if (auto v = rd.str(j, "", "out_dir")) cfg.out_dir = rd.resolve(*v);
  if (auto v = rd.integer(j, "", "context_length", 1)) {
    if (*v > 3) rd.fail("context_length", "must be 1, 2 or 3, got " + std::to_string(*v));
    cfg.context_length = static_cast<int>(*v);
  }
  auto bugs_dir = rd.str(j, "", "bugs_dir");
  if (!bugs_dir) rd.fail("bugs_dir", "is required");
  cfg.bugs_dir = rd.resolve(*bugs_dir);
  cfg.bugs = rd.strings(j, "", "bugs");
  if (auto v = rd.integer(j, "", "subsample_rounds", 1)) cfg.subsample_rounds = static_cast<std::size_t>(*v);
  if (auto v = rd.number(j, "", "test_timeout")) {
    if (!(*v > 0)) rd.fail("test_timeout", "must be > 0");
    cfg.test_timeout = *v;
  }

  const json& sampling = rd.object(j, "", "sampling");
  rd.only(sampling, "sampling", {"confidence", "margin"});
  if (auto v = rd.number(sampling, "sampling", "confidence")) {
    try {
      metrics::z_value(*v);
    } catch (const Error&) {
      rd.fail("sampling.confidence", "must be 0.90, 0.95 or 0.99");
    }
    cfg.confidence = *v;
  }
  if (auto v = rd.number(sampling, "sampling", "margin")) {
    if (!(*v > 0 && *v < 1)) rd.fail("sampling.margin", "must lie in (0, 1)");
    cfg.margin = *v;
  }

  const json& adapter = rd.object(j, "", "adapter");
  rd.only(adapter, "adapter", {"kind", "check_cmd", "test_cmd", "list_tests_cmd", "pass_exit_code",
                               "timeout", "error_rules"});
  if (auto v = rd.str(adapter, "adapter", "kind")) {
    if (*v != "minilang" && *v != "subprocess") {
      rd.fail("adapter.kind", "must be \"minilang\" or \"subprocess\", got \"" + *v + "\"");
    }
    cfg.adapter.kind = *v;
  }
  auto& sp = cfg.adapter.subprocess;
  if (auto v = rd.str(adapter, "adapter", "check_cmd")) sp.check_cmd = *v;
  if (auto v = rd.str(adapter, "adapter", "test_cmd")) sp.test_cmd = *v;
  if (auto v = rd.str(adapter, "adapter", "list_tests_cmd")) sp.list_tests_cmd = *v;
  if (auto v = rd.integer(adapter, "adapter", "pass_exit_code", 0)) sp.pass_exit_code = static_cast<int>(*v);
  if (auto v = rd.number(adapter, "adapter", "timeout")) {
    if (!(*v > 0)) rd.fail("adapter.timeout", "must be > 0");
    sp.timeout = *v;
  }
  if (cfg.adapter.kind == "subprocess") {
    if (sp.check_cmd.empty()) rd.fail("adapter.check_cmd", "is required for a subprocess adapter");
    if (sp.test_cmd.empty()) rd.fail("adapter.test_cmd", "is required for a subprocess adapter");
    if (sp.list_tests_cmd.empty()) rd.fail("adapter.list_tests_cmd", "is required for a subprocess adapter");
  }
  const json& rules = rd.array(adapter, "adapter", "error_rules");
  for (std::size_t i = 0; i < rules.size(); ++i) {
    std::string p = "adapter.error_rules[" + std::to_string(i) + "]";
    if (!rules[i].is_object()) rd.fail(p, "must be a table");
    rd.only(rules[i], p, {"type", "kind", "pattern"});
    ClassifierRule rule;
    auto type = rd.str(rules[i], p, "type");
    if (!type) rd.fail(p + ".type", "is required");
    auto t = error_type_from_string(*type);
    if (!t) rd.fail(p + ".type", "unknown error type \"" + *type + "\"");
    rule.type = *t;
    rule.kind = rd.str(rules[i], p, "kind").value_or("");
    rule.pattern = rd.str(rules[i], p, "pattern").value_or("");
    if (rule.kind.empty() && rule.pattern.empty()) rd.fail(p, "needs a kind or a pattern");
    if (!rule.pattern.empty()) {
      try {
        std::regex re(rule.pattern);
      } catch (const std::regex_error& e) {
        rd.fail(p + ".pattern", std::string("bad regular expression: ") + e.what());
      }
    }
    cfg.adapter.error_rules.push_back(std::move(rule));
  }

  const json& backends = rd.array(j, "", "backends");
  for (std::size_t i = 0; i < backends.size(); ++i) {
    std::string p = "backends[" + std::to_string(i) + "]";
    const json& b = backends[i];
    if (!b.is_object()) rd.fail(p, "must be a table");
    rd.only(b, p, {"id", "kind", "endpoint", "model", "price_prompt_per_1k",
                   "price_completion_per_1k", "max_in_flight", "temperature", "seed", "retries",
                   "backoff_seconds", "request_timeout", "api_key_env"});
    llmgen::BackendDescriptor d;
    d.seed = cfg.seed;
    auto id = rd.str(b, p, "id");
    if (!id || !file_safe_id(*id)) rd.fail(p + ".id", "must be a non-empty name of letters, digits, '-', '_' or '.'");
    d.id = *id;
    if (cfg.backend(d.id)) rd.fail(p + ".id", "duplicate backend id \"" + d.id + "\"");
    auto kind = rd.str(b, p, "kind").value_or("stub");
    if (kind == "stub") {
      d.kind = llmgen::BackendKind::Stub;
    } else if (kind == "http-chat") {
      d.kind = llmgen::BackendKind::HttpChat;
    } else {
      rd.fail(p + ".kind", "must be \"stub\" or \"http-chat\", got \"" + kind + "\"");
    }
    if (auto v = rd.str(b, p, "endpoint")) d.endpoint = *v;
    if (auto v = rd.str(b, p, "model")) d.model_name = *v;
    if (auto v = rd.number(b, p, "price_prompt_per_1k")) d.price_prompt_per_1k = *v;
    if (auto v = rd.number(b, p, "price_completion_per_1k")) d.price_completion_per_1k = *v;
    if (auto v = rd.integer(b, p, "max_in_flight", 1)) d.max_in_flight = static_cast<std::size_t>(*v);
    if (auto v = rd.number(b, p, "temperature")) d.temperature = *v;
    if (auto v = rd.integer(b, p, "seed", 0)) d.seed = static_cast<std::uint64_t>(*v);
    if (auto v = rd.integer(b, p, "retries", 0)) d.retries = static_cast<int>(*v);
    if (auto v = rd.number(b, p, "backoff_seconds")) d.backoff_seconds = *v;
    if (auto v = rd.number(b, p, "request_timeout")) d.request_timeout = *v;
    if (auto v = rd.str(b, p, "api_key_env")) d.api_key_env = *v;
    try {
      llmgen::validate(d);
    } catch (const Error& e) {
      rd.fail(p, e.what());
    }
    cfg.backends.push_back(std::move(d));
  }

  const json& gens = rd.array(j, "", "generators");
  if (gens.empty()) rd.fail("generators", "at least one generator is required");
  std::set<std::string> gen_ids;
  for (std::size_t i = 0; i < gens.size(); ++i) {
    std::string p = "generators[" + std::to_string(i) + "]";
    const json& g = gens[i];
    if (!g.is_object()) rd.fail(p, "must be a table");
    rd.only(g, p, {"id", "type", "backend", "prompt", "operators"});
    GeneratorSpec spec;
    auto id = rd.str(g, p, "id");
    if (!id || !file_safe_id(*id)) rd.fail(p + ".id", "must be a non-empty name of letters, digits, '-', '_' or '.'");
    spec.id = *id;
    if (!gen_ids.insert(spec.id).second) rd.fail(p + ".id", "duplicate generator id \"" + spec.id + "\"");
    auto type = rd.str(g, p, "type");
    if (!type) rd.fail(p + ".type", "is required (\"llm\" or \"rule\")");
    if (*type == "llm") {
      spec.type = GeneratorType::Llm;
      auto backend = rd.str(g, p, "backend");
      if (!backend) rd.fail(p + ".backend", "is required for an llm generator");
      if (!cfg.backend(*backend)) rd.fail(p + ".backend", "no backend with id \"" + *backend + "\"");
      spec.backend = *backend;
      auto prompt = rd.str(g, p, "prompt").value_or("P1");
      auto t = llmgen::prompt_template_from_string(prompt);
      if (!t) rd.fail(p + ".prompt", "must be one of P1, P2, P3, P4, got \"" + prompt + "\"");
      spec.prompt = *t;
      if (g.contains("operators")) rd.fail(p + ".operators", "only applies to rule generators");
    } else if (*type == "rule") {
      spec.type = GeneratorType::Rule;
      if (g.contains("operators")) {
        try {
          spec.operators = rulegen::parse_operators(rd.strings(g, p, "operators"));
        } catch (const Error& e) {
          rd.fail(p + ".operators", e.what());
        }
        if (spec.operators.empty()) rd.fail(p + ".operators", "must not be empty");
      }
      if (g.contains("backend")) rd.fail(p + ".backend", "only applies to llm generators");
      if (g.contains("prompt")) rd.fail(p + ".prompt", "only applies to llm generators");
    } else {
      rd.fail(p + ".type", "must be \"llm\" or \"rule\", got \"" + *type + "\"");
    }
    cfg.generators.push_back(std::move(spec));
  }

  const json& labels = rd.object(j, "", "labels");
  for (auto it = labels.begin(); it != labels.end(); ++it) {
    std::string p = "labels." + it.key();
    if (!gen_ids.count(it.key())) rd.fail(p, "no generator with this id");
    if (!it->is_string()) rd.fail(p, "must be a path string");
    cfg.labels[it.key()] = rd.resolve(it->get<std::string>());
  }
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  return config_from_document(read_config_document(path));
}

json config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["workers"] = cfg.workers;
  j["out_dir"] = cfg.out_dir.generic_string();
  j["context_length"] = cfg.context_length;
  j["bugs_dir"] = cfg.bugs_dir.generic_string();
  j["bugs"] = cfg.bugs;
  j["sampling"] = {{"confidence", cfg.confidence}, {"margin", cfg.margin}};
  j["subsample_rounds"] = cfg.subsample_rounds;
  if (cfg.test_timeout) j["test_timeout"] = *cfg.test_timeout;
  json a = {{"kind", cfg.adapter.kind}};
  if (cfg.adapter.kind == "subprocess") {
    const auto& sp = cfg.adapter.subprocess;
    a["check_cmd"] = sp.check_cmd;
    a["test_cmd"] = sp.test_cmd;
    a["list_tests_cmd"] = sp.list_tests_cmd;
    a["pass_exit_code"] = sp.pass_exit_code;
    a["timeout"] = sp.timeout;
  }
  a["error_rules"] = json::array();
  for (const auto& r : cfg.adapter.error_rules) {
    a["error_rules"].push_back({{"type", to_string(r.type)}, {"kind", r.kind}, {"pattern", r.pattern}});
  }
  j["adapter"] = a;
  j["backends"] = json::array();
  for (const auto& b : cfg.backends) {
    j["backends"].push_back({{"id", b.id},
                             {"kind", b.kind == llmgen::BackendKind::Stub ? "stub" : "http-chat"},
                             {"endpoint", b.endpoint},
                             {"model", b.model_name},
                             {"price_prompt_per_1k", b.price_prompt_per_1k},
                             {"price_completion_per_1k", b.price_completion_per_1k},
                             {"max_in_flight", b.max_in_flight},
                             {"temperature", b.temperature},
                             {"seed", b.seed},
                             {"retries", b.retries},
                             {"backoff_seconds", b.backoff_seconds},
                             {"request_timeout", b.request_timeout},
                             {"api_key_env", b.api_key_env}});
  }
  j["generators"] = json::array();
  for (const auto& g : cfg.generators) {
    json gj = {{"id", g.id}, {"type", g.type == GeneratorType::Llm ? "llm" : "rule"}};
    if (g.type == GeneratorType::Llm) {
      gj["backend"] = g.backend;
      gj["prompt"] = llmgen::to_string(g.prompt);
    } else {
      gj["operators"] = json::array();
      for (auto op : g.operators) gj["operators"].push_back(rulegen::to_string(op));
    }
    j["generators"].push_back(gj);
  }
  json labels = json::object();
  for (const auto& [g, p] : cfg.labels) labels[g] = p.generic_string();
  j["labels"] = labels;
  return j;
}

}  // namespace mutforge::study
