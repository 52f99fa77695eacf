#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "dimscale/clustering.hpp"
#include "dimscale/data_io.hpp"
#include "dimscale/selection.hpp"
#include "dimscale/simulate.hpp"
#include "dimscale/types.hpp"

namespace dimscale {

// Shortest decimal form that round-trips the exact double (std::to_chars).
std::string format_double(double value);

nlohmann::json parameters_to_json(const ModelParameters& params);
ModelParameters parameters_from_json(const nlohmann::json& j);

nlohmann::json partition_to_json(const ItemPartition& partition,
                                 const std::vector<std::string>& item_ids);
ItemPartition partition_from_json(const nlohmann::json& j,
                                  const std::vector<std::string>& item_ids);

nlohmann::json fit_result_to_json(const FitResult& fit, const std::vector<std::string>& item_ids,
                                  std::size_t n_respondents);
// Reads back parameters, partition and headline statistics (enough for
// summarize and for tests); item ids are restored from the payload.
struct LoadedFit {
  FitResult fit;
  std::vector<std::string> item_ids;
  std::size_t n_respondents = 0;
};
LoadedFit fit_result_from_json(const nlohmann::json& j);

nlohmann::json path_to_json(const ClusteringPath& path, const std::vector<std::string>& item_ids,
                            std::size_t k, std::size_t n_respondents);

nlohmann::json dendrogram_to_json(const Dendrogram& tree, const std::vector<std::string>& item_ids,
                                  const ClusteringPath& path);

// Graphviz rendering with per-merge deviance heights; the BIC cut level is
// annotated on the graph label.
std::string dendrogram_to_dot(const Dendrogram& tree, const std::vector<std::string>& item_ids,
                              const ClusteringPath& path);

// Text table with columns step/BIC/s, one row per clustering step, the
// minimum-BIC row marked. BIC values are printed in round-trip form so the
// column re-parses to the exact path values.
std::string criterion_table_text(const CriterionReport& report);

// "Dimension 1 -- 5 items: a, b, c, d, e" listing of the selected partition,
// dimensions ordered by first appearance in the dendrogram leaf order.
std::string selected_partition_text(const ItemPartition& partition,
                                    const std::vector<std::string>& item_ids,
                                    const Dendrogram& tree);

// Dimension-frequency table, one row per dimension, sorted descending.
std::string dimension_frequency_text(const ItemPartition& partition,
                                     const std::vector<std::string>& item_ids,
                                     const std::vector<double>& frequencies);

nlohmann::json simulation_spec_to_json(const SimulationSpec& spec);
SimulationSpec simulation_spec_from_json(const nlohmann::json& j);

nlohmann::json preprocess_report_to_json(const PreprocessReport& report);

std::string matrix_to_csv(const ResponseMatrix& matrix);

}  // namespace dimscale
