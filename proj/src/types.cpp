#include "dimscale/types.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "dimscale/estimation.hpp"
#include "dimscale/selection.hpp"

namespace dimscale {

ResponseMatrix::ResponseMatrix(std::vector<std::string> item_ids, std::vector<std::uint8_t> cells,
                               std::size_t n_respondents)
    : item_ids_(std::move(item_ids)), cells_(std::move(cells)), n_respondents_(n_respondents) {
  if (item_ids_.empty()) throw std::invalid_argument("ResponseMatrix: needs at least one item");
  if (n_respondents_ == 0)
    throw std::invalid_argument("ResponseMatrix: needs at least one respondent");
  if (cells_.size() != n_respondents_ * item_ids_.size())
    throw std::invalid_argument("ResponseMatrix: cell count does not match dimensions");
  std::set<std::string> seen(item_ids_.begin(), item_ids_.end());
  if (seen.size() != item_ids_.size())
    throw std::invalid_argument("ResponseMatrix: item identifiers must be unique");
  for (std::uint8_t v : cells_) {
    if (v != 0 && v != 1)
      throw std::invalid_argument("ResponseMatrix: cells must be exactly 0 or 1");
  }
}

ResponseMatrix ResponseMatrix::from_rows(std::vector<std::string> item_ids,
                                         const std::vector<std::vector<int>>& rows) {
  const std::size_t j = item_ids.size();
  std::vector<std::uint8_t> cells;
  cells.reserve(rows.size() * j);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != j) {
      std::ostringstream msg;
      msg << "ResponseMatrix: row " << r + 1 << " has " << rows[r].size() << " cells, expected "
          << j;
      throw std::invalid_argument(msg.str());
    }
    for (int v : rows[r]) {
      if (v != 0 && v != 1)
        throw std::invalid_argument("ResponseMatrix: cells must be exactly 0 or 1");
      cells.push_back(static_cast<std::uint8_t>(v));
    }
  }
  return ResponseMatrix(std::move(item_ids), std::move(cells), rows.size());
}

double ResponseMatrix::item_mean(std::size_t item) const {
  double sum = 0.0;
  for (std::size_t r = 0; r < n_respondents_; ++r) sum += (*this)(r, item);
  return sum / static_cast<double>(n_respondents_);
}

ItemPartition::ItemPartition(std::vector<std::vector<int>> groups, std::size_t n_items)
    : groups_(std::move(groups)), item_to_group_(n_items, static_cast<std::size_t>(-1)) {
  if (n_items == 0) throw std::invalid_argument("ItemPartition: zero items");
  if (groups_.empty() || groups_.size() > n_items)
    throw std::invalid_argument("ItemPartition: group count must be in [1, J]");
  for (auto& g : groups_) {
    if (g.empty()) throw std::invalid_argument("ItemPartition: empty group");
    std::sort(g.begin(), g.end());
  }
  std::sort(groups_.begin(), groups_.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  for (std::size_t d = 0; d < groups_.size(); ++d) {
    for (int item : groups_[d]) {
      if (item < 0 || static_cast<std::size_t>(item) >= n_items) {
        std::ostringstream msg;
        msg << "ItemPartition: item index " << item << " outside [0, " << n_items << ")";
        throw std::invalid_argument(msg.str());
      }
      if (item_to_group_[item] != static_cast<std::size_t>(-1)) {
        std::ostringstream msg;
        msg << "ItemPartition: item " << item << " appears in more than one group";
        throw std::invalid_argument(msg.str());
      }
      item_to_group_[item] = d;
    }
  }
  for (std::size_t j = 0; j < n_items; ++j) {
    if (item_to_group_[j] == static_cast<std::size_t>(-1)) {
      std::ostringstream msg;
      msg << "ItemPartition: item " << j << " is not covered by any group";
      throw std::invalid_argument(msg.str());
    }
  }
}

ItemPartition ItemPartition::singletons(std::size_t n_items) {
  std::vector<std::vector<int>> groups(n_items);
  for (std::size_t j = 0; j < n_items; ++j) groups[j] = {static_cast<int>(j)};
  return ItemPartition(std::move(groups), n_items);
}

ItemPartition ItemPartition::single_group(std::size_t n_items) {
  std::vector<int> all(n_items);
  std::iota(all.begin(), all.end(), 0);
  return ItemPartition({std::move(all)}, n_items);
}

std::size_t ItemPartition::dimension_of(std::size_t item) const {
  if (item >= item_to_group_.size())
    throw std::out_of_range("ItemPartition: item index out of range");
  return item_to_group_[item];
}

ItemPartition ItemPartition::merged(std::size_t a, std::size_t b) const {
  if (a >= groups_.size() || b >= groups_.size() || a == b)
    throw std::invalid_argument("ItemPartition::merged: invalid group pair");
  std::vector<std::vector<int>> next;
  next.reserve(groups_.size() - 1);
  const std::size_t lo = std::min(a, b);
  const std::size_t hi = std::max(a, b);
  for (std::size_t d = 0; d < groups_.size(); ++d) {
    if (d == hi) continue;
    if (d == lo) {
      std::vector<int> merged_group = groups_[lo];
      merged_group.insert(merged_group.end(), groups_[hi].begin(), groups_[hi].end());
      next.push_back(std::move(merged_group));
    } else {
      next.push_back(groups_[d]);
    }
  }
  return ItemPartition(std::move(next), n_items());
}

void ModelParameters::validate(const ItemPartition& partition) const {
  const std::size_t k = n_classes();
  const std::size_t s = n_dimensions();
  const std::size_t j = n_items();
  if (k == 0) throw std::invalid_argument("ModelParameters: needs at least one class");
  if (abilities.rows() != k)
    throw std::invalid_argument("ModelParameters: abilities row count != k");
  if (s != partition.n_groups())
    throw std::invalid_argument("ModelParameters: abilities column count != partition groups");
  if (j != partition.n_items() || discriminations.size() != j)
    throw std::invalid_argument("ModelParameters: item vector length mismatch");

  double total = 0.0;
  for (double w : class_weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("ModelParameters: negative class weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw std::invalid_argument("ModelParameters: class weights must sum to 1 within 1e-12");

  for (std::size_t d = 0; d < s; ++d) {
    if (abilities(0, d) != 0.0)
      throw std::invalid_argument("ModelParameters: theta_{1d} must be 0 (anchored class)");
    const int ref = partition.reference_item(d);
    if (discriminations[ref] != 1.0)
      throw std::invalid_argument(
          "ModelParameters: reference item of each dimension must have discrimination 1");
  }
  for (double g : discriminations) {
    if (!std::isfinite(g) || g <= 0.0)
      throw std::invalid_argument("ModelParameters: discriminations must be finite and positive");
  }
}

void FitResult::validate(std::size_t n_respondents) const {
  if (log_likelihood > 0.0)
    throw std::logic_error("FitResult: log-likelihood of discrete data must be <= 0");
  const double expect_bic = dimscale::bic(log_likelihood, n_parameters, n_respondents);
  const double expect_aic = dimscale::aic(log_likelihood, n_parameters);
  if (std::abs(bic - expect_bic) > 1e-9 * std::max(1.0, std::abs(expect_bic)) ||
      std::abs(aic - expect_aic) > 1e-9 * std::max(1.0, std::abs(expect_aic)))
    throw std::logic_error("FitResult: BIC/AIC inconsistent with log-likelihood");
}

}  // namespace dimscale
