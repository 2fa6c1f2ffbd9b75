#pragma once

// Random generator of well-typed MiniLang programs for property tests.

#include <random>
#include <string>
#include <vector>

namespace mutforge::testing {

class MiniLangGen {
 public:
  explicit MiniLangGen(std::uint64_t seed) : rng_(seed) {}

  std::string program(int functions = 3) {
    std::string out;
    fn_count_ = 0;
    for (int f = 0; f < functions; ++f) {
      out += function();
      out += "\n";
    }
    return out;
  }

 private:
  int pick(int n) { return static_cast<int>(rng_() % static_cast<std::uint64_t>(n)); }
  bool coin(int percent) { return pick(100) < percent; }

  std::string function() {
    std::string name = "f" + std::to_string(fn_count_);
    vars_ = {"a", "b"};
    bools_.clear();
    std::string out = "fn " + name + "(a, b: int) -> int {\n";
    int stmts = 1 + pick(5);
    for (int i = 0; i < stmts; ++i) out += statement(1, 2);
    out += "  return " + int_expr(3) + ";\n}\n";
    ++fn_count_;
    return out;
  }

  std::string indent(int depth) { return std::string(static_cast<std::size_t>(depth) * 2, ' '); }

  std::string statement(int depth, int nest) {
    int choice = pick(nest > 0 ? 6 : 4);
    switch (choice) {
      case 0: {
        std::string v = "v" + std::to_string(var_counter_++);
        std::string s = indent(depth) + "let " + v + " = " + int_expr(2) + ";\n";
        vars_.push_back(v);
        return s;
      }
      case 1: {
        std::string v = "p" + std::to_string(var_counter_++);
        std::string s = indent(depth) + "let " + v + " = " + bool_expr(2) + ";\n";
        bools_.push_back(v);
        return s;
      }
      case 2:
        return indent(depth) + vars_[static_cast<std::size_t>(pick(static_cast<int>(vars_.size())))] +
               " = " + int_expr(2) + ";\n";
      case 3:
        return indent(depth) + ";\n";
      case 4: {
        auto saved_i = vars_;
        auto saved_b = bools_;
        std::string s = indent(depth) + "if (" + bool_expr(2) + ") {\n";
        s += statement(depth + 1, nest - 1);
        vars_ = saved_i;
        bools_ = saved_b;
        s += indent(depth) + "}";
        if (coin(50)) {
          s += " else {\n" + statement(depth + 1, nest - 1) + indent(depth) + "}";
          vars_ = saved_i;
          bools_ = saved_b;
        }
        return s + "\n";
      }
      default: {
        auto saved_i = vars_;
        auto saved_b = bools_;
        std::string s = indent(depth) + "while (a < b && " + bool_expr(1) + ") {\n";
        s += statement(depth + 1, nest - 1);
        s += indent(depth) + "}\n";
        vars_ = saved_i;
        bools_ = saved_b;
        return s;
      }
    }
  }

  std::string int_expr(int depth) {
    int choice = pick(depth > 0 ? 8 : 3);
    switch (choice) {
      case 0: return std::to_string(pick(20));
      case 1:
      case 2: return vars_[static_cast<std::size_t>(pick(static_cast<int>(vars_.size())))];
      case 3: {
        static const char* ops[] = {"+", "-", "*", "/", "%"};
        return int_expr(depth - 1) + " " + ops[pick(5)] + " " + int_expr(depth - 1);
      }
      case 4: return "-" + int_expr(depth - 1);
      case 5: return "(" + int_expr(depth - 1) + ")";
      case 6:
        if (fn_count_ > 0) {
          return "f" + std::to_string(pick(fn_count_)) + "(" + int_expr(depth - 1) + ", " +
                 int_expr(depth - 1) + ")";
        }
        return "math.abs(" + int_expr(depth - 1) + ")";
      default:
        return coin(50) ? "math.max(" + int_expr(depth - 1) + ", " + int_expr(depth - 1) + ")"
                        : "math.maxint";
    }
  }

  std::string bool_expr(int depth) {
    int choice = pick(depth > 0 ? 6 : 2);
    switch (choice) {
      case 0: return coin(50) ? "true" : "false";
      case 1:
        if (!bools_.empty()) return bools_[static_cast<std::size_t>(pick(static_cast<int>(bools_.size())))];
        return "true";
      case 2: {
        static const char* ops[] = {"<", "<=", ">", ">=", "==", "!="};
        return int_expr(depth - 1) + " " + ops[pick(6)] + " " + int_expr(depth - 1);
      }
      case 3: return bool_expr(depth - 1) + (coin(50) ? " && " : " || ") + bool_expr(depth - 1);
      case 4: return "!(" + bool_expr(depth - 1) + ")";
      default: return "(" + bool_expr(depth - 1) + ")";
    }
  }

  std::mt19937_64 rng_;
  int fn_count_ = 0;
  int var_counter_ = 0;
  std::vector<std::string> vars_;
  std::vector<std::string> bools_;
};

}  // namespace mutforge::testing
