#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "treerl/common.hpp"

namespace treerl {

/// Index into a VocabularySpec. Valid iff < vocab.size().
using Token = std::int32_t;

enum class OpKind { add, mul, negate };

/// One arithmetic rewrite the policy can apply to the running value.
struct StepOp {
  OpKind kind;
  std::int64_t operand;  // ignored for negate

  std::int64_t apply(std::int64_t value) const {
    switch (kind) {
      case OpKind::add: return value + operand;
      case OpKind::mul: return value * operand;
      case OpKind::negate: return -value;
    }
    return value;
  }

  std::string name() const {
    switch (kind) {
      case OpKind::add:
        return (operand >= 0 ? "add_" + std::to_string(operand)
                             : "sub_" + std::to_string(-operand));
      case OpKind::mul: return "mul_" + std::to_string(operand);
      case OpKind::negate: return "neg";
    }
    return "?";
  }
};

/**
 * Token table for the arithmetic-chain task family.
 *
 * Layout: [ops...] [sep] [ans] [minus] [digit 0..9]. A reasoning step is a
 * run of op tokens closed by `sep`; `ans` switches to answer mode, after
 * which the declared result is spelled as minus/digit tokens.
 */
struct VocabularySpec {
  std::vector<StepOp> ops;

  Token sep_id() const { return static_cast<Token>(ops.size()); }
  Token ans_id() const { return static_cast<Token>(ops.size() + 1); }
  Token minus_id() const { return static_cast<Token>(ops.size() + 2); }
  Token digit_id(int d) const { return static_cast<Token>(ops.size() + 3 + d); }
  int size() const { return static_cast<int>(ops.size()) + 13; }

  bool is_op(Token t) const { return t >= 0 && t < sep_id(); }
  bool is_digit(Token t) const { return t >= digit_id(0) && t <= digit_id(9); }
  int digit_value(Token t) const { return static_cast<int>(t - digit_id(0)); }
  bool is_answer_token(Token t) const { return t == minus_id() || is_digit(t); }
  bool valid(Token t) const { return t >= 0 && t < size(); }

  std::string token_name(Token t) const {
    if (is_op(t)) return ops[static_cast<std::size_t>(t)].name();
    if (t == sep_id()) return "sep";
    if (t == ans_id()) return "ans";
    if (t == minus_id()) return "-";
    if (is_digit(t)) return std::to_string(digit_value(t));
    throw ContractViolation("token_name: token out of range");
  }

  /// Lookup by name; throws on unknown names.
  Token token_id(const std::string& name) const {
    for (Token t = 0; t < size(); ++t)
      if (token_name(t) == name) return t;
    throw ConfigError("unknown token name: " + name);
  }

  /// 13 ops, 26 tokens total. The default task vocabulary.
  static VocabularySpec standard() {
    VocabularySpec v;
    for (std::int64_t k : {1, 2, 3, 5, 7}) v.ops.push_back({OpKind::add, k});
    for (std::int64_t k : {1, 2, 3, 5, 7}) v.ops.push_back({OpKind::add, -k});
    v.ops.push_back({OpKind::mul, 2});
    v.ops.push_back({OpKind::mul, 3});
    v.ops.push_back({OpKind::negate, 0});
    return v;
  }

  /// 3 ops, 16 tokens total. Used for small-vocabulary experiments.
  static VocabularySpec compact() {
    VocabularySpec v;
    v.ops.push_back({OpKind::add, 1});
    v.ops.push_back({OpKind::add, -1});
    v.ops.push_back({OpKind::mul, 2});
    return v;
  }
};

}  // namespace treerl
