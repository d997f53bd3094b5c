#pragma once

// Tabular datasets, filter predicates and histogram extraction.

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "aware/stats.hpp"

namespace aware::data {

enum class ColumnKind { categorical, numeric };

std::string_view to_string(ColumnKind kind);

struct Column {
  std::string name;
  ColumnKind kind = ColumnKind::categorical;
  std::vector<std::optional<std::string>> text;
  // Filled for numeric columns only; parallel to `text`.
  std::vector<std::optional<double>> numbers;
};

class Dataset {
 public:
  Dataset() = default;
  Dataset(std::string name, std::vector<Column> columns);

  const std::string& name() const { return name_; }
  std::size_t row_count() const { return row_count_; }
  const std::vector<Column>& columns() const { return columns_; }

  bool has_column(std::string_view name) const;
  /// Throws SchemaError for unknown names.
  const Column& column(std::string_view name) const;

  /// Uniform random subset of round(fraction * rows) rows, original order kept.
  Dataset sample(double fraction, std::uint64_t seed) const;

 private:
  std::string name_;
  std::vector<Column> columns_;
  std::size_t row_count_ = 0;
};

/// Parses comma-separated text with a header row. Empty fields are missing
/// values; a column whose present values all parse as numbers is numeric.
/// Throws IngestionError.
Dataset parse_csv(std::istream& in, std::string name);
Dataset load_dataset(const std::filesystem::path& path);

enum class FilterOp { equals, in_set, range };

std::string_view to_string(FilterOp op);
FilterOp filter_op_from_string(std::string_view name);

struct FilterPredicate {
  std::string column;
  FilterOp op = FilterOp::equals;
  std::vector<std::string> values;  // equals (one value) and in_set
  std::optional<double> lo;         // range bounds, inclusive; open when empty
  std::optional<double> hi;
  bool negated = false;

  /// Throws SchemaError when the predicate does not fit the dataset.
  void validate(const Dataset& dataset) const;
  /// Missing values never match, negated or not.
  bool matches(const Dataset& dataset, std::size_t row) const;
  std::string describe() const;

  bool operator==(const FilterPredicate&) const = default;
};

using Filters = std::vector<FilterPredicate>;

std::string describe(const Filters& filters);

/// Two filter lists that are identical except for exactly one predicate whose
/// negation flag differs.
bool complementary(const Filters& a, const Filters& b);

/// Rows satisfying every predicate.
std::vector<std::size_t> select_rows(const Dataset& dataset, const Filters& filters);

/// Non-missing numeric values of `attribute` over the selected rows.
std::vector<double> numeric_values(const Dataset& dataset, std::string_view attribute,
                                   const Filters& filters);

inline constexpr int kDefaultBins = 10;

/// Counts of `attribute` over the rows passing `filters`. Bins come from the
/// whole dataset: distinct values (sorted) for categorical attributes, equal
/// width bins over [min, max] for numeric ones.
stats::Histogram histogram_of(const Dataset& dataset, std::string_view attribute,
                              const Filters& filters, int bins = kDefaultBins);

/// Zero total or fewer than two bins: no valid chi-squared test exists.
bool is_degenerate(const stats::Histogram& histogram);

}  // namespace aware::data
