#include "bitlab/classes.hpp"

#include <algorithm>
#include <bit>
#include <set>
#include <unordered_map>

namespace bitlab {

Dependence Dependence::on(std::vector<std::size_t> positions) {
  std::ranges::sort(positions);
  positions.erase(std::unique(positions.begin(), positions.end()), positions.end());
  return {false, std::move(positions)};
}

Dependence& Dependence::merge(const Dependence& other) {
  if (all) return *this;
  if (other.all) {
    all = true;
    positions.clear();
    return *this;
  }
  std::vector<std::size_t> merged;
  std::ranges::set_union(positions, other.positions, std::back_inserter(merged));
  positions = std::move(merged);
  return *this;
}

NextTokenFn::NextTokenFn(std::string name, Rule rule, ReadSet reads)
    : name_(std::move(name)), rule_(std::make_shared<const Rule>(std::move(rule))),
      reads_(std::move(reads)) {
  if (!*rule_) throw ArgumentError("NextTokenFn: empty rule for " + name_);
}

Bit NextTokenFn::operator()(BitView s) const {
  Bit b = (*rule_)(s);
  if (b > 1) throw ArgumentError("NextTokenFn " + name_ + ": non-binary output");
  return b;
}

std::vector<std::size_t> NextTokenFn::reads(std::size_t length) const {
  if (!reads_) {
    std::vector<std::size_t> out(length);
    for (std::size_t i = 0; i < length; ++i) out[i] = i;
    return out;
  }
  return reads_(length);
}

Dependence NextTokenFn::prompt_dependence(std::size_t prompt_length, std::size_t horizon) const {
  if (!reads_) return Dependence::everything();
  std::vector<std::size_t> positions;
  for (std::size_t t = 0; t < horizon; ++t) {
    for (std::size_t p : reads_(prompt_length + t)) {
      if (p < prompt_length) positions.push_back(p);
    }
  }
  return Dependence::on(std::move(positions));
}

Bit eval(const NextTokenFn& f, BitView s) { return f(s); }

std::size_t teacher_forced_errors(const NextTokenFn& f, BitView x, BitView y) {
  if (x.size() + y.size() > kMaxLength) throw ResourceError("teacher forcing: length guard exceeded");
  std::vector<Bit> joined;
  joined.reserve(x.size() + y.size());
  joined.insert(joined.end(), x.begin(), x.end());
  joined.insert(joined.end(), y.begin(), y.end());
  const BitView all{std::span<const Bit>(joined)};
  std::size_t errors = 0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    if (f(all.first(x.size() + t)) != y[t]) ++errors;
  }
  return errors;
}

NextTokenFn constant_predictor(Bit value) {
  if (value > 1) throw ArgumentError("constant_predictor: value must be 0 or 1");
  return NextTokenFn(value ? "const1" : "const0", [value](BitView) { return value; },
                     [](std::size_t) { return std::vector<std::size_t>{}; });
}

NextTokenFn last_bit_predictor() {
  return NextTokenFn(
      "last_bit", [](BitView s) -> Bit { return s.empty() ? Bit{0} : s[s.size() - 1]; },
      [](std::size_t len) {
        return len == 0 ? std::vector<std::size_t>{} : std::vector<std::size_t>{len - 1};
      });
}

namespace detail {

// Prompt lookup shared by every member of a table class.
class PromptIndex {
 public:
  explicit PromptIndex(const std::vector<BitString>& prompts) {
    if (prompts.empty()) throw ArgumentError("table: no prompts");
    length_ = prompts.front().size();
    for (const auto& p : prompts) {
      if (p.size() != length_) throw ArgumentError("table: prompts must share one length");
    }
    packed_ = length_ <= 63;
    for (std::size_t j = 0; j < prompts.size(); ++j) {
      if (packed_) {
        auto [it, inserted] = keys_.emplace(pack(prompts[j].view()), j);
        if (!inserted) throw ArgumentError("table: duplicate prompt " + prompts[j].str());
      } else {
        for (std::size_t k = 0; k < j; ++k) {
          if (prompts[k] == prompts[j]) throw ArgumentError("table: duplicate prompt");
        }
      }
    }
    if (!packed_) prompts_ = prompts;
  }

  std::size_t length() const { return length_; }

  std::optional<std::size_t> find(BitView s) const {
    if (s.size() < length_) return std::nullopt;
    BitView head = s.first(length_);
    if (packed_) {
      auto it = keys_.find(pack(head));
      if (it == keys_.end()) return std::nullopt;
      return it->second;
    }
    for (std::size_t j = 0; j < prompts_.size(); ++j) {
      if (prompts_[j].view() == head) return j;
    }
    return std::nullopt;
  }

 private:
  static std::uint64_t pack(BitView s) {
    std::uint64_t key = 1;  // leading sentinel keeps lengths distinct
    for (Bit b : s) key = (key << 1) | b;
    return key;
  }

  std::size_t length_ = 0;
  bool packed_ = true;
  std::unordered_map<std::uint64_t, std::size_t> keys_;
  std::vector<BitString> prompts_;
};

}  // namespace detail

namespace {

using detail::PromptIndex;

NextTokenFn make_lookup(std::string name, std::shared_ptr<const PromptIndex> index,
                        std::vector<Bit> labels) {
  const std::size_t length = index->length();
  return NextTokenFn(
      std::move(name),
      [index, labels = std::move(labels)](BitView s) -> Bit {
        auto j = index->find(s);
        return j ? labels[*j] : Bit{0};
      },
      [length](std::size_t len) {
        std::vector<std::size_t> out;
        if (len >= length) {
          out.resize(length);
          for (std::size_t i = 0; i < length; ++i) out[i] = i;
        }
        return out;
      });
}

std::string labels_name(const std::vector<Bit>& labels) {
  std::string name = "table:";
  for (Bit b : labels) name.push_back(b ? '1' : '0');
  return name;
}

}  // namespace

NextTokenFn lookup_predictor(std::string name, std::vector<BitString> prompts,
                             std::vector<Bit> labels) {
  if (labels.size() != prompts.size()) throw ArgumentError("lookup_predictor: label count mismatch");
  for (Bit b : labels) {
    if (b > 1) throw ArgumentError("lookup_predictor: labels must be 0 or 1");
  }
  auto index = std::make_shared<const PromptIndex>(prompts);
  return make_lookup(std::move(name), std::move(index), std::move(labels));
}

std::size_t TableLayout::free_count() const {
  if (pinned.empty()) return prompts.size();
  return static_cast<std::size_t>(std::ranges::count_if(pinned, [](const auto& p) { return !p; }));
}

std::vector<std::size_t> TableLayout::free_positions() const {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < prompts.size(); ++j) {
    if (pinned.empty() || !pinned[j]) out.push_back(j);
  }
  return out;
}

std::vector<Bit> TableLayout::labels(std::uint64_t index) const {
  std::vector<Bit> out(prompts.size(), 0);
  std::size_t k = 0;
  for (std::size_t j = 0; j < prompts.size(); ++j) {
    if (!pinned.empty() && pinned[j]) {
      out[j] = *pinned[j];
    } else {
      out[j] = static_cast<Bit>((index >> k) & 1u);
      ++k;
    }
  }
  return out;
}

std::uint64_t TableLayout::index_of(const std::vector<Bit>& labels) const {
  if (labels.size() != prompts.size()) throw ArgumentError("TableLayout: label count mismatch");
  std::uint64_t index = 0;
  std::size_t k = 0;
  for (std::size_t j = 0; j < prompts.size(); ++j) {
    if (!pinned.empty() && pinned[j]) {
      if (labels[j] != *pinned[j]) throw ArgumentError("TableLayout: labeling violates a pinned entry");
    } else {
      index |= static_cast<std::uint64_t>(labels[j] & 1u) << k;
      ++k;
    }
  }
  return index;
}

std::optional<std::size_t> TableLayout::prompt_of(BitView s) const {
  if (prompts.empty() || s.size() < prompts.front().size()) return std::nullopt;
  BitView head = s.first(prompts.front().size());
  for (std::size_t j = 0; j < prompts.size(); ++j) {
    if (prompts[j].view() == head) return j;
  }
  return std::nullopt;
}

FunctionClass::FunctionClass(std::vector<NextTokenFn> members, std::size_t horizon)
    : members_(std::move(members)), horizon_(horizon) {
  if (members_.empty()) throw ArgumentError("FunctionClass: empty class");
  std::set<std::string> names;
  for (const auto& f : members_) {
    if (!names.insert(f.name()).second) {
      throw ArgumentError("FunctionClass: duplicate member name " + f.name());
    }
  }
}

FunctionClass FunctionClass::table(TableLayout layout, std::size_t horizon) {
  if (!layout.pinned.empty() && layout.pinned.size() != layout.prompts.size()) {
    throw ArgumentError("table: pinned entries must match the prompt count");
  }
  if (layout.free_count() > 62) throw ResourceError("table: more than 2^62 members");
  FunctionClass cls;
  cls.index_ = std::make_shared<const PromptIndex>(layout.prompts);
  cls.table_ = std::make_shared<const TableLayout>(std::move(layout));
  cls.horizon_ = horizon;
  return cls;
}

std::uint64_t FunctionClass::size() const {
  if (table_) return std::uint64_t{1} << table_->free_count();
  return members_.size();
}

NextTokenFn FunctionClass::member(std::uint64_t index) const {
  if (index >= size()) {
    throw RangeError("FunctionClass::member: index " + std::to_string(index) + " out of range");
  }
  if (!table_) return members_[index];
  auto labels = table_->labels(index);
  std::string name = labels_name(labels);
  return make_lookup(std::move(name), index_, std::move(labels));
}

std::vector<NextTokenFn> FunctionClass::members(std::uint64_t budget) const {
  if (size() > budget) {
    throw ResourceError("FunctionClass: " + std::to_string(size()) +
                        " members exceed the enumeration budget");
  }
  if (!table_) return members_;
  std::vector<NextTokenFn> out;
  out.reserve(size());
  for (std::uint64_t i = 0; i < size(); ++i) out.push_back(member(i));
  return out;
}

std::optional<std::uint64_t> FunctionClass::find(std::string_view name) const {
  if (!table_) {
    for (std::size_t i = 0; i < members_.size(); ++i) {
      if (members_[i].name() == name) return i;
    }
    return std::nullopt;
  }
  constexpr std::string_view tag = "table:";
  if (!name.starts_with(tag) || name.size() != tag.size() + table_->prompts.size()) {
    return std::nullopt;
  }
  std::vector<Bit> labels;
  for (char c : name.substr(tag.size())) {
    if (c != '0' && c != '1') return std::nullopt;
    labels.push_back(static_cast<Bit>(c - '0'));
  }
  try {
    return table_->index_of(labels);
  } catch (const ArgumentError&) {
    return std::nullopt;
  }
}

std::vector<NextTokenFn> members(const FunctionClass& cls) { return cls.members(); }

FunctionClass make_counting_pair(std::size_t horizon) {
  auto ones = [](BitView s) { return static_cast<std::size_t>(std::ranges::count(s, Bit{1})); };
  NextTokenFn f1("f1", [ones](BitView s) -> Bit {
    std::size_t c1 = ones(s);
    return c1 >= s.size() - c1 ? 1 : 0;
  });
  NextTokenFn f2("f2", [ones](BitView s) -> Bit { return ones(s) == 1 ? 1 : 0; });
  return FunctionClass({std::move(f1), std::move(f2)}, horizon);
}

FunctionClass make_shift_class(std::size_t class_size, std::size_t horizon) {
  if (class_size == 0) throw ArgumentError("make_shift_class: D must be at least 1");
  if (horizon == 0) throw ArgumentError("make_shift_class: T must be at least 1");
  std::vector<NextTokenFn> fs;
  fs.reserve(class_size + 1);
  fs.push_back(NextTokenFn("f0", [](BitView) -> Bit { return 0; },
                           [](std::size_t) { return std::vector<std::size_t>{}; }));
  for (std::size_t d = 1; d <= class_size; ++d) {
    const std::size_t back = d * horizon;
    fs.push_back(NextTokenFn(
        "f" + std::to_string(d),
        [back](BitView s) -> Bit {
          if (s.size() < back) {
            throw RangeError("shift predictor: string of length " + std::to_string(s.size()) +
                             " shorter than " + std::to_string(back));
          }
          return s[s.size() - back];
        },
        [back](std::size_t len) {
          return len >= back ? std::vector<std::size_t>{len - back} : std::vector<std::size_t>{};
        }));
  }
  return FunctionClass(std::move(fs), horizon);
}

std::vector<BitString> table_prompts(std::size_t count) {
  if (count == 0) throw ArgumentError("table_prompts: need at least one prompt");
  const std::size_t width = static_cast<std::size_t>(std::bit_width(count));  // ceil(log2(m+1))
  std::vector<BitString> prompts;
  prompts.reserve(count);
  for (std::size_t i = 1; i <= count; ++i) {
    prompts.push_back(concat(BitString::parse("1"), to_binary(i, width)));
  }
  return prompts;
}

TableConstruction make_table_class(std::size_t count, std::size_t horizon) {
  if (horizon == 0) throw ArgumentError("make_table_class: T must be at least 1");
  if (count > 62) throw ResourceError("make_table_class: 2^m members not indexable");
  auto prompts = table_prompts(count);
  TableLayout layout{prompts, {}};
  return {FunctionClass::table(std::move(layout), horizon), std::move(prompts)};
}

TableConstruction make_pinned_table_class(std::vector<std::optional<Bit>> pinned,
                                          std::size_t horizon) {
  if (horizon == 0) throw ArgumentError("make_pinned_table_class: T must be at least 1");
  auto prompts = table_prompts(pinned.size());
  TableLayout layout{prompts, std::move(pinned)};
  return {FunctionClass::table(std::move(layout), horizon), std::move(prompts)};
}

}  // namespace bitlab
