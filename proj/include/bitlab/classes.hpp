#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bitlab/bitstring.hpp"

namespace bitlab {

namespace detail {
class PromptIndex;
}

/// Prompt coordinates a computation may read.
///
/// `all` means "unknown, assume every coordinate". Used to reduce exact
/// expectations over uniformly random prompts to the coordinates that matter.
struct Dependence {
  bool all = true;
  std::vector<std::size_t> positions;  // sorted, unique; meaningful only when !all

  static Dependence everything() { return {}; }
  static Dependence none() { return {false, {}}; }
  static Dependence on(std::vector<std::size_t> positions);

  Dependence& merge(const Dependence& other);
};

/// A deterministic next-token predictor f: strings -> {0,1}.
///
/// The optional read set lists, for an input of a given length, every position
/// the rule may inspect besides the length itself. Rules without one are
/// treated as reading everything.
class NextTokenFn {
 public:
  using Rule = std::function<Bit(BitView)>;
  using ReadSet = std::function<std::vector<std::size_t>(std::size_t length)>;

  NextTokenFn(std::string name, Rule rule, ReadSet reads = {});

  const std::string& name() const { return name_; }
  Bit operator()(BitView s) const;

  bool declares_reads() const { return static_cast<bool>(reads_); }
  std::vector<std::size_t> reads(std::size_t length) const;

  /// Prompt coordinates that evaluation on any x + y[:t] (t < horizon), and
  /// hence f^AR(x), can depend on for prompts of the given length.
  Dependence prompt_dependence(std::size_t prompt_length, std::size_t horizon) const;

 private:
  std::string name_;
  std::shared_ptr<const Rule> rule_;
  ReadSet reads_;
};

Bit eval(const NextTokenFn& f, BitView s);

/// Teacher-forced mistakes of f on one record: #{t : f(x + y[:t]) != y[t]}.
std::size_t teacher_forced_errors(const NextTokenFn& f, BitView x, BitView y);

NextTokenFn constant_predictor(Bit value);
/// f(s) = s[-1]; 0 on the empty string.
NextTokenFn last_bit_predictor();
/// Predictor returning labels[j] on strings that start with prompts[j], 0 elsewhere.
/// All prompts must share one length.
NextTokenFn lookup_predictor(std::string name, std::vector<BitString> prompts,
                             std::vector<Bit> labels);

/// Layout of a lookup-table class: every member labels each prompt, and
/// members range over all labelings that agree with the pinned entries.
/// Member index bits enumerate the free prompts in order.
struct TableLayout {
  std::vector<BitString> prompts;
  std::vector<std::optional<Bit>> pinned;  // empty, or one entry per prompt

  std::size_t free_count() const;
  std::vector<std::size_t> free_positions() const;
  std::vector<Bit> labels(std::uint64_t index) const;
  std::uint64_t index_of(const std::vector<Bit>& labels) const;
  /// Position of s's prompt, when s starts with one of the prompts.
  std::optional<std::size_t> prompt_of(BitView s) const;
};

/// Finite, ordered class of next-token predictors.
///
/// Either an explicit member list or a lazily indexed table class; the latter
/// keeps classes such as 2^32 lookup tables representable without
/// materialising them.
class FunctionClass {
 public:
  /// Throws ArgumentError when empty or when names repeat.
  FunctionClass(std::vector<NextTokenFn> members, std::size_t horizon);
  static FunctionClass table(TableLayout layout, std::size_t horizon);

  std::uint64_t size() const;
  std::size_t horizon() const { return horizon_; }
  NextTokenFn member(std::uint64_t index) const;
  /// Materialised member list. Throws ResourceError above the budget.
  std::vector<NextTokenFn> members(std::uint64_t budget = kEnumerationBudget) const;
  std::optional<std::uint64_t> find(std::string_view name) const;

  /// Non-null for table classes.
  const TableLayout* table_layout() const { return table_.get(); }

 private:
  FunctionClass() = default;

  std::vector<NextTokenFn> members_;
  std::shared_ptr<const TableLayout> table_;
  std::shared_ptr<const detail::PromptIndex> index_;
  std::size_t horizon_ = 1;
};

std::vector<NextTokenFn> members(const FunctionClass& cls);

/// Pair {f1, f2} of counting rules: f1 outputs 1 iff #1 >= #0; f2 outputs 1
/// iff the string holds exactly one 1.
FunctionClass make_counting_pair(std::size_t horizon = 2);

/// {f_0, ..., f_D}: f_0 = 0 and f_d(s) = s[-d*T]. f_d throws RangeError on
/// strings shorter than d*T. Intended prompts have length D*T + 1.
FunctionClass make_shift_class(std::size_t class_size, std::size_t horizon);

struct TableConstruction {
  FunctionClass functions;
  std::vector<BitString> prompts;
};

/// Prompts x_i = "1" + binary(i), i = 1..m, padded to ceil(log2(m+1)) bits.
std::vector<BitString> table_prompts(std::size_t count);

/// 2^m lookup-table predictors whose end tokens on the m prompts realise
/// every labeling. The class is indexed lazily; materialising more than the
/// enumeration budget throws ResourceError.
TableConstruction make_table_class(std::size_t count, std::size_t horizon);

/// Table class restricted to labelings that agree with `pinned`.
TableConstruction make_pinned_table_class(std::vector<std::optional<Bit>> pinned,
                                          std::size_t horizon);

}  // namespace bitlab
