#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "dimscale/types.hpp"

namespace dimscale {

// Rectangular table of verbatim string cells with a unique header row.
struct RawTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t n_rows() const { return rows.size(); }
  std::size_t n_cols() const { return header.size(); }
};

struct CsvOptions {
  char delimiter = ',';
};

// Minimal RFC-4180 reader: quoted fields, doubled quotes, CRLF tolerant.
// Errors name the offending row (ragged rows, duplicate header ids, empty
// file).
RawTable load_csv(const std::filesystem::path& path, const CsvOptions& options = {});
RawTable parse_csv(std::string_view text, const CsvOptions& options = {});

// Per-item recode mappings from answer strings to {0,1}. The default rule
// dichotomises: "no" (case-insensitive) and "0" -> 0; "NA"/"na"/empty -> NA;
// every other answer -> 1. Explicit per-item rules override it.
struct RecodeRules {
  bool use_default = true;
  std::map<std::string, std::map<std::string, int>> per_item;
};

// Many-to-one OR aggregation: the output item is 1 if any source column is 1,
// NA if every source is NA, 0 otherwise. The group takes the position of its
// first source column.
struct AggregationRules {
  struct Group {
    std::string id;
    std::vector<std::string> sources;
  };
  std::vector<Group> groups;

  bool empty() const { return groups.empty(); }
};

struct RuleSet {
  RecodeRules recode;
  AggregationRules aggregation;
};

// Plain-text rule grammar, one rule per line ('#' comments allowed):
//   item_id = value -> 0        (recode; value may be double-quoted)
//   group_id = OR(col, col, ...)
RuleSet parse_rules(std::string_view text);
RuleSet load_rules(const std::filesystem::path& path);

// Applies recode rules cell-wise; output cells are "0", "1" or "NA".
RawTable dichotomize(const RawTable& table, const RecodeRules& rules = {});

RawTable aggregate_or(const RawTable& binary_table, const AggregationRules& rules);

struct PreprocessReport {
  std::size_t n_rows = 0;
  std::vector<std::pair<std::string, std::size_t>> missing_per_item;  // header order
  std::vector<std::string> degenerate_items;  // all-0 or all-1 after imputation
  std::vector<std::string> dropped_items;
  std::size_t total_missing() const;
};

struct PreparedMatrix {
  ResponseMatrix matrix;
  PreprocessReport report;
};

// NA -> 0 with per-item missingness accounting. Degenerate columns are
// flagged and retained unless drop_degenerate is set.
PreparedMatrix impute_missing_as_zero(const RawTable& binary_table, bool drop_degenerate = false);

}  // namespace dimscale
