#include <algorithm>
#include <cmath>
#include <cctype>
#include <json.hpp>
#include <random>
#include <regex>
#include <set>

#include "llmgen/llmgen.hpp"
#include "rulegen/rulegen.hpp"
#include "syntax/token.hpp"

namespace mutforge::llmgen {

using syntax::Token;
using syntax::TokenKind;

namespace {

// Share of each candidate kind, in percent; identical copies take the rest.
constexpr int kRuleStyle = 55;
constexpr int kUnknownFunction = 15;
constexpr int kOtherBroken = 15;
constexpr int kDuplicate = 10;

enum class Kind { Rule, UnknownFunction, Broken, Duplicate, Identical };

struct TargetLine {
  int line;
  std::string code;
};

std::uint64_t fnv1a(std::uint64_t seed, std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](unsigned char c) {
    h ^= c;
    h *= 0x100000001b3ULL;
  };
  for (int i = 0; i < 8; ++i) mix(static_cast<unsigned char>(seed >> (8 * i)));
  for (char c : text) mix(static_cast<unsigned char>(c));
  return h;
}

std::vector<Token> tokens_of(const std::string& code) { return syntax::lex(code).tokens; }

std::string replace_token(const std::string& code, const Token& t, const std::string& with) {
  return code.substr(0, t.offset) + with + code.substr(t.offset + t.text.size());
}

// Same tokens, different spacing.
std::string respaced(const std::string& code) {
  auto toks = tokens_of(code);
  std::string out = code.substr(0, code.find_first_not_of(" \t"));
  if (out.size() == code.size()) out.clear();
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (i > 0) out += " ";
    out += toks[i].text;
  }
  if (out == code) out += "  ";
  return out;
}

std::string camel(const std::string& name) {
  if (name.find('_') == std::string::npos) return name + "Value";
  std::string out;
  bool up = false;
  for (char c : name) {
    if (c == '_') {
      up = !out.empty();
      continue;
    }
    out.push_back(up ? static_cast<char>(std::toupper(static_cast<unsigned char>(c))) : c);
    up = false;
  }
  return out;
}

bool is_fn_header(const std::vector<Token>& toks) {
  return !toks.empty() && toks[0].kind == TokenKind::Keyword && toks[0].text == "fn";
}

// Indices of call-name tokens: identifier followed by "(".
std::vector<std::size_t> call_sites(const std::vector<Token>& toks) {
  std::vector<std::size_t> out;
  if (is_fn_header(toks)) return out;
  for (std::size_t i = 0; i + 1 < toks.size(); ++i) {
    if (toks[i].kind == TokenKind::Identifier && toks[i + 1].text == "(") out.push_back(i);
  }
  return out;
}

// Identifiers used as plain values (not declared, called, or qualified here).
std::vector<std::size_t> value_identifiers(const std::vector<Token>& toks) {
  std::vector<std::size_t> out;
  if (is_fn_header(toks)) return out;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (toks[i].kind != TokenKind::Identifier) continue;
    if (i + 1 < toks.size() && (toks[i + 1].text == "(" || toks[i + 1].text == ".")) continue;
    if (i > 0 && (toks[i - 1].text == "." || toks[i - 1].text == "let")) continue;
    out.push_back(i);
  }
  return out;
}

// Operands that can be wrapped in a call without becoming an lvalue.
std::vector<std::size_t> wrappable(const std::vector<Token>& toks) {
  std::vector<std::size_t> out;
  if (is_fn_header(toks)) return out;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    auto k = toks[i].kind;
    if (k == TokenKind::IntLiteral || k == TokenKind::BoolLiteral) {
      out.push_back(i);
      continue;
    }
    if (k != TokenKind::Identifier) continue;
    if (i + 1 < toks.size() &&
        (toks[i + 1].text == "(" || toks[i + 1].text == "." || toks[i + 1].text == "=")) {
      continue;
    }
    if (i > 0 && (toks[i - 1].text == "." || toks[i - 1].text == "let")) continue;
    out.push_back(i);
  }
  return out;
}

class Generator {
 public:
  Generator(std::uint64_t seed, std::string_view prompt, const std::string& file,
            std::vector<TargetLine> lines, std::optional<std::string> return_type)
      : rng_(fnv1a(seed, prompt)),
        lines_(std::move(lines)),
        return_type_(std::move(return_type)),
        phase_(static_cast<double>(fnv1a(seed, file) >> 11) * 0x1.0p-53) {}

  nlohmann::json run(std::size_t budget) {
    std::vector<Kind> kinds;
    for (std::size_t i = 0; i < budget; ++i) kinds.push_back(kind_for_slot(i));
    // Duplicates copy earlier rule-style candidates, so they are made last.
    std::vector<std::size_t> order(budget);
    for (std::size_t i = 0; i < budget; ++i) order[i] = i;
    std::stable_partition(order.begin(), order.end(),
                          [&](std::size_t i) { return kinds[i] != Kind::Duplicate; });
    std::vector<TargetLine> slots(budget);
    std::vector<std::size_t> source(budget, npos);
    for (std::size_t i : order) {
      slot_ = i;
      slots[i] = make(kinds[i], lines_[i % lines_.size()], source[i]);
    }
    // A duplicate follows its source in the response.
    nlohmann::json out = nlohmann::json::array();
    auto emit = [&](const TargetLine& t) {
      out.push_back({{"line", t.line}, {"mutated_code", t.code}});
    };
    for (std::size_t i = 0; i < budget; ++i) {
      if (source[i] != npos) continue;
      emit(slots[i]);
      for (std::size_t j = 0; j < budget; ++j) {
        if (source[j] == i) emit(slots[j]);
      }
    }
    return out;
  }

 private:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  // Kinds follow a golden-ratio sequence over line numbers with a per-file
  // phase, so every run of consecutive lines gets close to the intended mix.
  Kind kind_for_slot(std::size_t slot) const {
    double line = lines_[slot % lines_.size()].line + 7919.0 * static_cast<double>(slot / lines_.size());
    double u = phase_ + line * 0.6180339887498949;
    u = (u - std::floor(u)) * 100.0;
    if (u < kRuleStyle) return Kind::Rule;
    if ((u -= kRuleStyle) < kUnknownFunction) return Kind::UnknownFunction;
    if ((u -= kUnknownFunction) < kOtherBroken) return Kind::Broken;
    if ((u -= kOtherBroken) < kDuplicate) return Kind::Duplicate;
    return Kind::Identical;
  }

  std::size_t pick(std::size_t n) { return static_cast<std::size_t>(rng_() % n); }

  // Target lines starting at `from`, wrapping around.
  template <typename F>
  std::optional<TargetLine> first_line_with(const TargetLine& from, F&& f) {
    std::size_t start = 0;
    while (start < lines_.size() && lines_[start].line != from.line) ++start;
    for (std::size_t k = 0; k < lines_.size(); ++k) {
      const auto& tl = lines_[(start + k) % lines_.size()];
      if (auto r = f(tl)) {
        emitted_.insert({tl.line, *r});
        return TargetLine{tl.line, *r};
      }
    }
    return std::nullopt;
  }

  // Drops candidates this response already contains.
  std::vector<std::string> fresh(int line, std::vector<std::string> texts) const {
    std::erase_if(texts, [&](const std::string& t) { return emitted_.count({line, t}) > 0; });
    return texts;
  }

  std::optional<TargetLine> rule(const TargetLine& at) {
    auto r = first_line_with(at, [&](const TargetLine& tl) -> std::optional<std::string> {
      auto subs = fresh(tl.line, rulegen::line_substitutions(tl.code));
      if (subs.empty()) return std::nullopt;
      return subs[pick(subs.size())];
    });
    if (!r) {
      r = first_line_with(at, [&](const TargetLine& tl) -> std::optional<std::string> {
        auto subs = fresh(tl.line, statement_edits(tl.code));
        if (subs.empty()) return std::nullopt;
        return subs[pick(subs.size())];
      });
    }
    if (r) rule_done_.emplace_back(slot_, *r);
    return r;
  }

  // Statement deletion, return and condition negation, argument swaps: for
  // lines without operator sites.
  std::vector<std::string> statement_edits(const std::string& code) const {
    auto toks = tokens_of(code);
    std::vector<std::string> out = argument_swaps(code, toks);
    if (toks.size() >= 4 && (toks[0].text == "if" || toks[0].text == "while") &&
        toks[1].text == "(" && toks.back().text == "{") {
      std::size_t close = toks.size() - 2;
      if (toks[close].text == ")") {
        std::size_t b = toks[2].offset, e = toks[close].offset;
        std::string cond = code.substr(b, e - b);
        out.push_back(code.substr(0, b) + (close == 3 ? "!" + cond : "!(" + cond + ")") +
                      code.substr(e));
      }
    }
    if (toks.size() < 3 || toks.back().text != ";") return out;
    std::string indent = code.substr(0, toks.front().offset);
    bool assignment = toks[0].kind == TokenKind::Identifier && toks[1].text == "=";
    bool call = toks[0].kind == TokenKind::Identifier && toks[1].text == "(";
    if (assignment || call) out.push_back(indent + ";");
    if (toks[0].text == "return" && return_type_) {
      std::size_t b = toks[1].offset, e = toks.back().offset;
      std::string expr = code.substr(b, e - b);
      while (!expr.empty() && expr.back() == ' ') expr.pop_back();
      std::string sign = *return_type_ == "int" ? "-" : "!";
      out.push_back(indent + "return " + (toks.size() == 3 ? sign + expr : sign + "(" + expr + ")") +
                    code.substr(e));
    }
    return out;
  }

  // Swaps the first two arguments of each call that has at least two.
  static std::vector<std::string> argument_swaps(const std::string& code,
                                                 const std::vector<Token>& toks) {
    std::vector<std::string> out;
    for (std::size_t site : call_sites(toks)) {
      std::vector<std::pair<std::size_t, std::size_t>> args;  // token ranges [b, e)
      std::size_t b = site + 2;
      int depth = 0;
      for (std::size_t i = b; i < toks.size(); ++i) {
        const auto& t = toks[i].text;
        if (t == "(") {
          ++depth;
        } else if (t == ")" && depth > 0) {
          --depth;
        } else if (depth == 0 && (t == "," || t == ")")) {
          if (i > b) args.emplace_back(b, i);
          b = i + 1;
          if (t == ")") break;
        }
      }
      if (args.size() < 2) continue;
      auto text = [&](std::pair<std::size_t, std::size_t> r) {
        std::size_t from = toks[r.first].offset;
        std::size_t to = toks[r.second - 1].offset + toks[r.second - 1].text.size();
        return std::pair{from, code.substr(from, to - from)};
      };
      auto [b0, a0] = text(args[0]);
      auto [b1, a1] = text(args[1]);
      if (a0 == a1) continue;
      out.push_back(code.substr(0, b0) + a1 + code.substr(b0 + a0.size(), b1 - b0 - a0.size()) +
                    a0 + code.substr(b1 + a1.size()));
    }
    return out;
  }

  std::optional<TargetLine> unknown_function(const TargetLine& at) {
    auto renamed = first_line_with(at, [&](const TargetLine& tl) -> std::optional<std::string> {
      auto toks = tokens_of(tl.code);
      auto sites = call_sites(toks);
      if (sites.empty()) return std::nullopt;
      const Token& t = toks[sites[pick(sites.size())]];
      return replace_token(tl.code, t, camel(t.text));
    });
    if (renamed) return renamed;
    static const char* names[] = {"getValue", "toInt", "checkValue", "computeResult"};
    return first_line_with(at, [&](const TargetLine& tl) -> std::optional<std::string> {
      auto toks = tokens_of(tl.code);
      auto sites = wrappable(toks);
      if (sites.empty()) return std::nullopt;
      const Token& t = toks[sites[pick(sites.size())]];
      return replace_token(tl.code, t, std::string(names[pick(4)]) + "(" + t.text + ")");
    });
  }

  std::optional<TargetLine> structural(const TargetLine& at) {
    return first_line_with(at, [&](const TargetLine& tl) -> std::optional<std::string> {
      auto toks = tokens_of(tl.code);
      for (const char* p : {";", ")"}) {
        for (std::size_t i = toks.size(); i-- > 0;) {
          if (toks[i].text == p) return replace_token(tl.code, toks[i], "");
        }
      }
      return std::nullopt;
    });
  }

  std::optional<TargetLine> broken(const TargetLine& at) {
    switch (pick(3)) {
      case 0:
        return structural(at);
      case 1:
        if (auto r = first_line_with(at, [&](const TargetLine& tl) -> std::optional<std::string> {
              auto toks = tokens_of(tl.code);
              auto ids = value_identifiers(toks);
              if (ids.empty()) return std::nullopt;
              const Token& t = toks[ids[pick(ids.size())]];
              return replace_token(tl.code, t, t.text + "Val");
            })) {
          return r;
        }
        return structural(at);
      default:
        if (auto r = first_line_with(at, [&](const TargetLine& tl) -> std::optional<std::string> {
              auto toks = tokens_of(tl.code);
              if (is_fn_header(toks)) return std::nullopt;
              std::vector<std::size_t> ints;
              for (std::size_t i = 0; i < toks.size(); ++i) {
                if (toks[i].kind == TokenKind::IntLiteral) ints.push_back(i);
              }
              if (ints.empty()) return std::nullopt;
              return replace_token(tl.code, toks[ints[pick(ints.size())]], "true");
            })) {
          return r;
        }
        return structural(at);
    }
  }

  TargetLine make(Kind k, const TargetLine& at, std::size_t& source) {
    switch (k) {
      case Kind::Rule:
        break;
      case Kind::UnknownFunction:
        if (auto r = unknown_function(at)) return *r;
        break;
      case Kind::Broken:
        if (auto r = broken(at)) return *r;
        break;
      case Kind::Duplicate:
        if (!rule_done_.empty()) {
          const auto& [from, t] = rule_done_[pick(rule_done_.size())];
          source = from;
          return TargetLine{t.line, respaced(t.code)};
        }
        [[fallthrough]];
      case Kind::Identical:
        return TargetLine{at.line, respaced(at.code)};
    }
    if (auto r = rule(at)) return *r;
    return TargetLine{at.line, respaced(at.code)};
  }

  std::mt19937_64 rng_;
  std::vector<TargetLine> lines_;
  std::vector<std::pair<std::size_t, TargetLine>> rule_done_;
  std::set<std::pair<int, std::string>> emitted_;
  std::optional<std::string> return_type_;
  double phase_;
  std::size_t slot_ = 0;
};

}  // namespace

std::string stub_response(std::uint64_t seed, std::string_view prompt) {
  auto input = prompt.find("### Input");
  auto output = prompt.find("### Output");
  if (input == std::string_view::npos) return "I could not find any code to mutate.";
  std::string section(prompt.substr(input, output == std::string_view::npos
                                               ? std::string_view::npos
                                               : output - input));
  static const std::regex line_re(R"(^(\d+): (.*)$)");
  static const std::regex budget_re(R"(Generate (\d+) mutants?)");
  static const std::regex file_re(R"(Target code element in (\S+) )");
  std::vector<TargetLine> lines;
  std::string file;
  std::size_t budget = 0;
  for (const auto& l : split_lines(section)) {
    std::smatch m;
    if (std::regex_match(l, m, line_re)) {
      std::string code = m[2];
      if (code.find_first_not_of(" \t") != std::string::npos) {
        lines.push_back({std::stoi(m[1]), code});
      }
    } else if (std::regex_search(l, m, file_re)) {
      file = m[1];
    } else if (std::regex_search(l, m, budget_re)) {
      budget = static_cast<std::size_t>(std::stoul(m[1]));
    }
  }
  if (lines.empty() || budget == 0) return "[]";
  // The enclosing function, when the prompt shows it, tells the return type.
  std::optional<std::string> return_type;
  static const std::regex header_re(R"(fn\s+\w+\s*\([^)]*\)\s*->\s*(int|bool))");
  std::string context(prompt.substr(0, input));
  std::smatch hm;
  if (std::regex_search(context, hm, header_re)) return_type = hm[1];
  Generator g(seed, prompt, file, std::move(lines), std::move(return_type));
  return "Here are the mutants:\n```json\n" + g.run(budget).dump(2) + "\n```\n";
}

}  // namespace mutforge::llmgen
