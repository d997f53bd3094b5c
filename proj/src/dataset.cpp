#include "aware/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <unordered_set>

#include "aware/errors.hpp"

namespace aware::data {

namespace {

std::optional<double> parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    return std::nullopt;
  }
  return v;
}

// Reads one CSV record (RFC 4180 quoting). Returns false at end of input.
bool read_record(std::istream& in, std::vector<std::string>& fields, std::size_t line) {
  fields.clear();
  std::string field;
  bool in_quotes = false;
  bool any = false;
  char c = 0;
  while (in.get(c)) {
    any = true;
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      break;
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  if (in_quotes) {
    throw IngestionError("unterminated quoted field near line " + std::to_string(line));
  }
  if (!any) return false;
  fields.push_back(std::move(field));
  return true;
}

std::string format_edge(double v) {
  std::ostringstream os;
  os.precision(8);
  os << v;
  return os.str();
}

}  // namespace

std::string_view to_string(ColumnKind kind) {
  return kind == ColumnKind::numeric ? "numeric" : "categorical";
}

Dataset::Dataset(std::string name, std::vector<Column> columns)
    : name_(std::move(name)), columns_(std::move(columns)) {
  std::unordered_set<std::string> seen;
  for (const auto& c : columns_) {
    if (!seen.insert(c.name).second) {
      throw IngestionError("duplicate column name: " + c.name);
    }
  }
  row_count_ = columns_.empty() ? 0 : columns_.front().text.size();
  for (const auto& c : columns_) {
    if (c.text.size() != row_count_ ||
        (c.kind == ColumnKind::numeric && c.numbers.size() != row_count_)) {
      throw IngestionError("column " + c.name + " has a different number of rows");
    }
  }
}

bool Dataset::has_column(std::string_view name) const {
  return std::any_of(columns_.begin(), columns_.end(),
                     [&](const Column& c) { return c.name == name; });
}

const Column& Dataset::column(std::string_view name) const {
  for (const auto& c : columns_) {
    if (c.name == name) return c;
  }
  throw SchemaError("unknown attribute: " + std::string(name));
}

Dataset Dataset::sample(double fraction, std::uint64_t seed) const {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw DomainError("sample fraction must be in (0, 1]");
  }
  const auto keep = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(row_count_)));
  std::vector<std::size_t> rows(row_count_);
  std::iota(rows.begin(), rows.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(rows.begin(), rows.end(), rng);
  rows.resize(keep);
  std::sort(rows.begin(), rows.end());
  std::vector<Column> cols;
  cols.reserve(columns_.size());
  for (const auto& c : columns_) {
    Column out{c.name, c.kind, {}, {}};
    out.text.reserve(keep);
    for (auto r : rows) out.text.push_back(c.text[r]);
    if (c.kind == ColumnKind::numeric) {
      out.numbers.reserve(keep);
      for (auto r : rows) out.numbers.push_back(c.numbers[r]);
    }
    cols.push_back(std::move(out));
  }
  return Dataset(name_, std::move(cols));
}

Dataset parse_csv(std::istream& in, std::string name) {
  std::vector<std::string> header;
  std::size_t line = 1;
  if (!read_record(in, header, line)) throw IngestionError("empty file: no header row");
  if (header.size() == 1 && header.front().empty()) {
    throw IngestionError("empty header row");
  }
  if (!header.empty() && header.front().rfind("\xEF\xBB\xBF", 0) == 0) {
    header.front().erase(0, 3);  // UTF-8 byte order mark
  }
  std::vector<Column> cols(header.size());
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i].empty()) throw IngestionError("empty column name in header");
    if (!seen.insert(header[i]).second) {
      throw IngestionError("duplicate column name: " + header[i]);
    }
    cols[i].name = header[i];
  }
  std::vector<std::string> fields;
  while (read_record(in, fields, ++line)) {
    if (fields.size() == 1 && fields.front().empty()) continue;  // blank line
    if (fields.size() != header.size()) {
      throw IngestionError("line " + std::to_string(line) + ": expected " +
                           std::to_string(header.size()) + " fields, got " +
                           std::to_string(fields.size()));
    }
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (fields[i].empty()) {
        cols[i].text.emplace_back(std::nullopt);
      } else {
        cols[i].text.emplace_back(std::move(fields[i]));
      }
    }
  }
  for (auto& c : cols) {
    std::vector<std::optional<double>> numbers;
    numbers.reserve(c.text.size());
    bool numeric = false;
    bool all_parse = true;
    for (const auto& v : c.text) {
      if (!v) {
        numbers.emplace_back(std::nullopt);
        continue;
      }
      auto d = parse_double(*v);
      if (!d) {
        all_parse = false;
        break;
      }
      numeric = true;
      numbers.push_back(d);
    }
    if (numeric && all_parse) {
      c.kind = ColumnKind::numeric;
      c.numbers = std::move(numbers);
    }
  }
  return Dataset(std::move(name), std::move(cols));
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open dataset file: " + path.string());
  return parse_csv(in, path.stem().string());
}

std::string_view to_string(FilterOp op) {
  switch (op) {
    case FilterOp::equals:
      return "equals";
    case FilterOp::in_set:
      return "in_set";
    case FilterOp::range:
      return "range";
  }
  return "equals";
}

FilterOp filter_op_from_string(std::string_view name) {
  if (name == "equals") return FilterOp::equals;
  if (name == "in_set") return FilterOp::in_set;
  if (name == "range") return FilterOp::range;
  throw SchemaError("unknown filter operator: " + std::string(name));
}

void FilterPredicate::validate(const Dataset& dataset) const {
  const Column& c = dataset.column(column);
  switch (op) {
    case FilterOp::equals:
      if (values.size() != 1) throw SchemaError("equals filter takes exactly one value");
      break;
    case FilterOp::in_set:
      if (values.empty()) throw SchemaError("in_set filter needs at least one value");
      break;
    case FilterOp::range:
      if (c.kind != ColumnKind::numeric) {
        throw SchemaError("range filter on non-numeric column " + column);
      }
      if (lo && hi && *lo > *hi) throw SchemaError("range filter with lo > hi");
      break;
  }
  if (c.kind == ColumnKind::numeric && op != FilterOp::range) {
    for (const auto& v : values) {
      if (!parse_double(v)) {
        throw SchemaError("non-numeric value '" + v + "' for numeric column " + column);
      }
    }
  }
}

bool FilterPredicate::matches(const Dataset& dataset, std::size_t row) const {
  const Column& c = dataset.column(column);
  bool hit = false;
  if (c.kind == ColumnKind::numeric) {
    const auto& v = c.numbers[row];
    if (!v) return false;
    if (op == FilterOp::range) {
      hit = (!lo || *v >= *lo) && (!hi || *v <= *hi);
    } else {
      hit = std::any_of(values.begin(), values.end(),
                        [&](const std::string& s) { return parse_double(s) == *v; });
    }
  } else {
    const auto& v = c.text[row];
    if (!v) return false;
    hit = std::find(values.begin(), values.end(), *v) != values.end();
  }
  return hit != negated;
}

std::string FilterPredicate::describe() const {
  std::string s = negated ? "not (" : "";
  s += column;
  switch (op) {
    case FilterOp::equals:
      s += " = " + (values.empty() ? std::string() : values.front());
      break;
    case FilterOp::in_set: {
      s += " in {";
      for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) s += ", ";
        s += values[i];
      }
      s += "}";
      break;
    }
    case FilterOp::range:
      s += " in [" + (lo ? format_edge(*lo) : std::string("-inf")) + ", " +
           (hi ? format_edge(*hi) : std::string("inf")) + "]";
      break;
  }
  if (negated) s += ")";
  return s;
}

std::string describe(const Filters& filters) {
  std::string s;
  for (std::size_t i = 0; i < filters.size(); ++i) {
    if (i) s += " and ";
    s += filters[i].describe();
  }
  return s;
}

bool complementary(const Filters& a, const Filters& b) {
  if (a.size() != b.size() || a.empty()) return false;
  int differing = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == b[i]) continue;
    FilterPredicate flipped = b[i];
    flipped.negated = !flipped.negated;
    if (!(a[i] == flipped)) return false;
    ++differing;
  }
  return differing == 1;
}

std::vector<std::size_t> select_rows(const Dataset& dataset, const Filters& filters) {
  for (const auto& f : filters) f.validate(dataset);
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < dataset.row_count(); ++r) {
    bool ok = true;
    for (const auto& f : filters) {
      if (!f.matches(dataset, r)) {
        ok = false;
        break;
      }
    }
    if (ok) rows.push_back(r);
  }
  return rows;
}

std::vector<double> numeric_values(const Dataset& dataset, std::string_view attribute,
                                   const Filters& filters) {
  const Column& c = dataset.column(attribute);
  if (c.kind != ColumnKind::numeric) {
    throw SchemaError("attribute " + std::string(attribute) + " is not numeric");
  }
  std::vector<double> out;
  for (auto r : select_rows(dataset, filters)) {
    if (c.numbers[r]) out.push_back(*c.numbers[r]);
  }
  return out;
}

stats::Histogram histogram_of(const Dataset& dataset, std::string_view attribute,
                              const Filters& filters, int bins) {
  const Column& c = dataset.column(attribute);
  const auto rows = select_rows(dataset, filters);
  stats::Histogram h;
  if (c.kind == ColumnKind::categorical) {
    std::set<std::string> values;
    for (const auto& v : c.text) {
      if (v) values.insert(*v);
    }
    std::vector<std::string> labels(values.begin(), values.end());
    for (const auto& l : labels) h.bins.push_back({l, 0});
    for (auto r : rows) {
      if (!c.text[r]) continue;
      auto it = std::lower_bound(labels.begin(), labels.end(), *c.text[r]);
      h.bins[static_cast<std::size_t>(it - labels.begin())].count += 1;
    }
    return h;
  }
  if (bins < 1) throw DomainError("histogram needs at least one bin");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& v : c.numbers) {
    if (!v) continue;
    lo = std::min(lo, *v);
    hi = std::max(hi, *v);
  }
  if (!(lo <= hi)) return h;  // no values at all
  if (lo == hi) {
    h.bins.push_back({"[" + format_edge(lo) + ", " + format_edge(hi) + "]", 0});
    for (auto r : rows) {
      if (c.numbers[r]) h.bins.front().count += 1;
    }
    return h;
  }
  const double width = (hi - lo) / bins;
  for (int i = 0; i < bins; ++i) {
    const double a = lo + width * i;
    const double b = i + 1 == bins ? hi : lo + width * (i + 1);
    h.bins.push_back({"[" + format_edge(a) + ", " + format_edge(b) + (i + 1 == bins ? "]" : ")"), 0});
  }
  for (auto r : rows) {
    const auto& v = c.numbers[r];
    if (!v) continue;
    auto idx = static_cast<int>((*v - lo) / width);
    idx = std::clamp(idx, 0, bins - 1);
    h.bins[static_cast<std::size_t>(idx)].count += 1;
  }
  return h;
}

bool is_degenerate(const stats::Histogram& histogram) {
  return histogram.bins.size() < 2 || histogram.total() == 0;
}

}  // namespace aware::data
