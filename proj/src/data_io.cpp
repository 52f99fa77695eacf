#include "dimscale/data_io.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace dimscale {

namespace {

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string trim(std::string_view s) {
  std::size_t first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  std::size_t last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::string strip_quotes(std::string s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
  return s;
}

// One CSV record per call; handles quoted fields, doubled quotes and
// embedded delimiters. `pos` advances past the record's line break.
std::vector<std::string> parse_record(std::string_view text, std::size_t& pos, char delimiter) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  while (pos < text.size()) {
    const char c = text[pos];
    if (quoted) {
      if (c == '"') {
        if (pos + 1 < text.size() && text[pos + 1] == '"') {
          field += '"';
          ++pos;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      ++pos;
      continue;
    }
    if (c == '"' && field.empty()) {
      quoted = true;
      ++pos;
    } else if (c == delimiter) {
      fields.push_back(std::move(field));
      field.clear();
      ++pos;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && pos + 1 < text.size() && text[pos + 1] == '\n') ++pos;
      ++pos;
      break;
    } else {
      field += c;
      ++pos;
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

int default_recode(const std::string& value) {
  const std::string lower = to_lower(trim(value));
  if (lower.empty() || lower == "na") return -1;  // NA
  if (lower == "no" || lower == "0") return 0;
  return 1;  // every other answer marks the habit as present
}

}  // namespace

RawTable parse_csv(std::string_view text, const CsvOptions& options) {
  if (trim(text).empty()) throw std::runtime_error("CSV input is empty");
  RawTable table;
  std::size_t pos = 0;
  table.header = parse_record(text, pos, options.delimiter);
  std::set<std::string> seen;
  std::vector<std::string> duplicates;
  for (const auto& id : table.header) {
    if (!seen.insert(id).second) duplicates.push_back(id);
  }
  if (!duplicates.empty()) {
    std::ostringstream msg;
    msg << "CSV header has duplicate item ids:";
    for (const auto& id : duplicates) msg << " '" << id << "'";
    throw std::runtime_error(msg.str());
  }
  std::size_t row_number = 1;
  while (pos < text.size()) {
    // Skip a trailing blank line.
    std::size_t probe = pos;
    auto fields = parse_record(text, probe, options.delimiter);
    pos = probe;
    if (fields.size() == 1 && trim(fields[0]).empty() && pos >= text.size()) break;
    ++row_number;
    if (fields.size() != table.header.size()) {
      std::ostringstream msg;
      msg << "CSV row " << row_number << " has " << fields.size() << " fields, expected "
          << table.header.size();
      throw std::runtime_error(msg.str());
    }
    table.rows.push_back(std::move(fields));
  }
  return table;
}

RawTable load_csv(const std::filesystem::path& path, const CsvOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_csv(buffer.str(), options);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

RuleSet parse_rules(std::string_view text) {
  RuleSet rules;
  std::size_t line_number = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = std::min(text.find('\n', pos), text.size());
    std::string line = trim(text.substr(pos, eol - pos));
    pos = eol + 1;
    ++line_number;
    if (line.empty() || line.front() == '#') {
      if (eol >= text.size()) break;
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      std::ostringstream msg;
      msg << "rules line " << line_number << ": expected 'id = ...': " << line;
      throw std::runtime_error(msg.str());
    }
    const std::string id = trim(line.substr(0, eq));
    const std::string rhs = trim(line.substr(eq + 1));
    if (id.empty()) {
      std::ostringstream msg;
      msg << "rules line " << line_number << ": missing identifier";
      throw std::runtime_error(msg.str());
    }
    if (rhs.rfind("OR(", 0) == 0) {
      if (rhs.back() != ')') {
        std::ostringstream msg;
        msg << "rules line " << line_number << ": unterminated OR(...)";
        throw std::runtime_error(msg.str());
      }
      AggregationRules::Group group;
      group.id = id;
      std::stringstream args(rhs.substr(3, rhs.size() - 4));
      std::string col;
      while (std::getline(args, col, ',')) {
        const std::string cleaned = strip_quotes(trim(col));
        if (!cleaned.empty()) group.sources.push_back(cleaned);
      }
      if (group.sources.empty()) {
        std::ostringstream msg;
        msg << "rules line " << line_number << ": OR() needs at least one column";
        throw std::runtime_error(msg.str());
      }
      rules.aggregation.groups.push_back(std::move(group));
    } else {
      const std::size_t arrow = rhs.rfind("->");
      if (arrow == std::string::npos) {
        std::ostringstream msg;
        msg << "rules line " << line_number << ": expected 'value -> 0|1'";
        throw std::runtime_error(msg.str());
      }
      const std::string value = strip_quotes(trim(rhs.substr(0, arrow)));
      const std::string target = trim(rhs.substr(arrow + 2));
      if (target != "0" && target != "1") {
        std::ostringstream msg;
        msg << "rules line " << line_number << ": recode target must be 0 or 1, got '" << target
            << "'";
        throw std::runtime_error(msg.str());
      }
      rules.recode.per_item[id][value] = target == "1" ? 1 : 0;
    }
    if (eol >= text.size()) break;
  }
  return rules;
}

RuleSet load_rules(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open rules file: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_rules(buffer.str());
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

RawTable dichotomize(const RawTable& table, const RecodeRules& rules) {
  RawTable out;
  out.header = table.header;
  out.rows.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    std::vector<std::string> row;
    row.reserve(table.header.size());
    for (std::size_t c = 0; c < table.header.size(); ++c) {
      const std::string& raw = table.rows[r][c];
      int coded = -2;
      const auto item_rules = rules.per_item.find(table.header[c]);
      if (item_rules != rules.per_item.end()) {
        const auto hit = item_rules->second.find(trim(raw));
        if (hit != item_rules->second.end()) coded = hit->second;
      }
      if (coded == -2) {
        if (!rules.use_default) {
          std::ostringstream msg;
          msg << "dichotomize: no rule covers item '" << table.header[c] << "' value '" << raw
              << "' (row " << r + 2 << ") and the default rule is disabled";
          throw std::runtime_error(msg.str());
        }
        coded = default_recode(raw);
      }
      row.push_back(coded == -1 ? "NA" : (coded == 1 ? "1" : "0"));
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

RawTable aggregate_or(const RawTable& binary_table, const AggregationRules& rules) {
  if (rules.empty()) return binary_table;

  std::map<std::string, std::size_t> column_of;
  for (std::size_t c = 0; c < binary_table.header.size(); ++c)
    column_of[binary_table.header[c]] = c;

  std::vector<int> consumed_by(binary_table.header.size(), -1);
  for (std::size_t g = 0; g < rules.groups.size(); ++g) {
    for (const auto& source : rules.groups[g].sources) {
      const auto it = column_of.find(source);
      if (it == column_of.end())
        throw std::runtime_error("aggregate: unknown source column '" + source + "'");
      if (consumed_by[it->second] != -1)
        throw std::runtime_error("aggregate: column '" + source +
                                 "' is referenced by more than one group");
      consumed_by[it->second] = static_cast<int>(g);
    }
  }

  // Each group lands at the position of its first source column.
  RawTable out;
  std::vector<int> emitted_group(rules.groups.size(), 0);
  std::vector<int> layout;  // >= 0: original column; -(g+1): group g
  for (std::size_t c = 0; c < binary_table.header.size(); ++c) {
    const int g = consumed_by[c];
    if (g == -1) {
      out.header.push_back(binary_table.header[c]);
      layout.push_back(static_cast<int>(c));
    } else if (!emitted_group[g]) {
      out.header.push_back(rules.groups[g].id);
      layout.push_back(-(g + 1));
      emitted_group[g] = 1;
    }
  }
  std::set<std::string> unique(out.header.begin(), out.header.end());
  if (unique.size() != out.header.size())
    throw std::runtime_error("aggregate: output item ids collide");

  for (const auto& row : binary_table.rows) {
    std::vector<std::string> out_row;
    out_row.reserve(out.header.size());
    for (int slot : layout) {
      if (slot >= 0) {
        out_row.push_back(row[slot]);
        continue;
      }
      const auto& group = rules.groups[-slot - 1];
      bool any_one = false;
      bool all_na = true;
      for (const auto& source : group.sources) {
        const std::string& cell = row[column_of[source]];
        if (cell == "1") any_one = true;
        if (cell != "NA") all_na = false;
      }
      out_row.push_back(any_one ? "1" : (all_na ? "NA" : "0"));
    }
    out.rows.push_back(std::move(out_row));
  }
  return out;
}

std::size_t PreprocessReport::total_missing() const {
  std::size_t total = 0;
  for (const auto& [id, count] : missing_per_item) total += count;
  return total;
}

PreparedMatrix impute_missing_as_zero(const RawTable& binary_table, bool drop_degenerate) {
  const std::size_t j = binary_table.n_cols();
  const std::size_t n = binary_table.n_rows();
  if (n == 0) throw std::runtime_error("impute: table has no data rows");

  PreprocessReport report;
  report.n_rows = n;
  std::vector<std::size_t> missing(j, 0);
  std::vector<std::size_t> ones(j, 0);
  std::vector<std::uint8_t> cells(n * j, 0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < j; ++c) {
      const std::string& cell = binary_table.rows[r][c];
      if (cell == "1") {
        cells[r * j + c] = 1;
        ++ones[c];
      } else if (cell == "NA") {
        ++missing[c];  // imputed to 0
      } else if (cell != "0") {
        std::ostringstream msg;
        msg << "impute: cell at row " << r + 2 << ", item '" << binary_table.header[c]
            << "' is '" << cell << "', expected 0, 1 or NA";
        throw std::runtime_error(msg.str());
      }
    }
  }

  std::vector<bool> degenerate(j, false);
  for (std::size_t c = 0; c < j; ++c) {
    report.missing_per_item.emplace_back(binary_table.header[c], missing[c]);
    if (ones[c] == 0 || ones[c] == n) {
      degenerate[c] = true;
      report.degenerate_items.push_back(binary_table.header[c]);
    }
  }

  std::vector<std::string> kept_ids;
  std::vector<std::size_t> kept_cols;
  for (std::size_t c = 0; c < j; ++c) {
    if (drop_degenerate && degenerate[c]) {
      report.dropped_items.push_back(binary_table.header[c]);
      continue;
    }
    kept_ids.push_back(binary_table.header[c]);
    kept_cols.push_back(c);
  }
  if (kept_ids.empty()) throw std::runtime_error("impute: every item is degenerate; nothing left");

  if (kept_cols.size() == j) {
    return {ResponseMatrix(std::move(kept_ids), std::move(cells), n), std::move(report)};
  }
  std::vector<std::uint8_t> filtered(n * kept_cols.size());
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < kept_cols.size(); ++c)
      filtered[r * kept_cols.size() + c] = cells[r * j + kept_cols[c]];
  }
  return {ResponseMatrix(std::move(kept_ids), std::move(filtered), n), std::move(report)};
}

}  // namespace dimscale
