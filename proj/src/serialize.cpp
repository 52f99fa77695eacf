#include "dimscale/serialize.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "dimscale/model.hpp"

namespace dimscale {

namespace {

using nlohmann::json;

json matrix_to_rows(const Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix rows_to_matrix(const json& rows) {
  if (!rows.is_array() || rows.empty()) throw std::runtime_error("expected non-empty matrix");
  Matrix m(rows.size(), rows[0].size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != m.cols()) throw std::runtime_error("ragged matrix in JSON");
    for (std::size_t c = 0; c < m.cols(); ++c) m(r, c) = rows[r][c].get<double>();
  }
  return m;
}

std::string join_ids(const std::vector<int>& items, const std::vector<std::string>& item_ids) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += ", ";
    out += item_ids[items[i]];
  }
  return out;
}

}  // namespace

std::string format_double(double value) {
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

json parameters_to_json(const ModelParameters& params) {
  return json{{"class_weights", params.class_weights},
              {"abilities", matrix_to_rows(params.abilities)},
              {"difficulties", params.difficulties},
              {"discriminations", params.discriminations}};
}

ModelParameters parameters_from_json(const json& j) {
  ModelParameters params;
  params.class_weights = j.at("class_weights").get<std::vector<double>>();
  params.abilities = rows_to_matrix(j.at("abilities"));
  params.difficulties = j.at("difficulties").get<std::vector<double>>();
  params.discriminations = j.at("discriminations").get<std::vector<double>>();
  return params;
}

json partition_to_json(const ItemPartition& partition, const std::vector<std::string>& item_ids) {
  json groups = json::array();
  for (const auto& group : partition.groups()) {
    json ids = json::array();
    for (int item : group) ids.push_back(item_ids[item]);
    groups.push_back(std::move(ids));
  }
  return groups;
}

ItemPartition partition_from_json(const json& j, const std::vector<std::string>& item_ids) {
  std::vector<std::vector<int>> groups;
  for (const auto& group : j) {
    std::vector<int> indices;
    for (const auto& id : group) {
      const auto it = std::find(item_ids.begin(), item_ids.end(), id.get<std::string>());
      if (it == item_ids.end())
        throw std::runtime_error("partition references unknown item id '" +
                                 id.get<std::string>() + "'");
      indices.push_back(static_cast<int>(it - item_ids.begin()));
    }
    groups.push_back(std::move(indices));
  }
  return ItemPartition(std::move(groups), item_ids.size());
}

json fit_result_to_json(const FitResult& fit, const std::vector<std::string>& item_ids,
                        std::size_t n_respondents) {
  return json{{"item_ids", item_ids},
              {"n_respondents", n_respondents},
              {"n_classes", fit.parameters.n_classes()},
              {"n_dimensions", fit.partition.n_groups()},
              {"partition", partition_to_json(fit.partition, item_ids)},
              {"parameters", parameters_to_json(fit.parameters)},
              {"log_likelihood", fit.log_likelihood},
              {"n_parameters", fit.n_parameters},
              {"bic", fit.bic},
              {"aic", fit.aic},
              {"n_em_iterations", fit.n_em_iterations},
              {"converged", fit.converged},
              {"start_index", fit.start_index},
              {"diagnostics",
               json{{"newton_fallbacks", fit.diagnostics.newton_fallbacks},
                    {"max_loglik_decrease", fit.diagnostics.max_loglik_decrease},
                    {"k_exceeds_patterns", fit.diagnostics.k_exceeds_patterns}}}};
}

LoadedFit fit_result_from_json(const json& j) {
  LoadedFit loaded;
  loaded.item_ids = j.at("item_ids").get<std::vector<std::string>>();
  loaded.n_respondents = j.at("n_respondents").get<std::size_t>();
  FitResult fit{
      parameters_from_json(j.at("parameters")),
      partition_from_json(j.at("partition"), loaded.item_ids),
      j.at("log_likelihood").get<double>(),
      j.at("n_parameters").get<std::size_t>(),
      j.at("bic").get<double>(),
      j.at("aic").get<double>(),
      j.at("n_em_iterations").get<std::size_t>(),
      j.at("converged").get<bool>(),
      j.at("start_index").get<std::size_t>(),
      {}};
  loaded.fit = std::move(fit);
  return loaded;
}

json path_to_json(const ClusteringPath& path, const std::vector<std::string>& item_ids,
                  std::size_t k, std::size_t n_respondents) {
  json steps = json::array();
  for (const auto& step : path.steps) {
    steps.push_back(json{{"step", step.step_index},
                         {"s", step.partition.n_groups()},
                         {"merged_pair", json::array({step.merged_pair.first, step.merged_pair.second})},
                         {"partition", partition_to_json(step.partition, item_ids)},
                         {"log_likelihood", step.fit.log_likelihood},
                         {"n_parameters", step.fit.n_parameters},
                         {"bic", step.fit.bic},
                         {"aic", step.fit.aic},
                         {"deviance_from_initial", step.deviance_from_initial},
                         {"converged", step.fit.converged},
                         {"start_index", step.fit.start_index}});
  }
  json out{{"item_ids", item_ids},
           {"n_classes", k},
           {"n_respondents", n_respondents},
           {"initial",
            json{{"s", path.initial_fit.partition.n_groups()},
                 {"log_likelihood", path.initial_fit.log_likelihood},
                 {"n_parameters", path.initial_fit.n_parameters},
                 {"bic", path.initial_fit.bic},
                 {"aic", path.initial_fit.aic},
                 {"converged", path.initial_fit.converged}}},
           {"steps", std::move(steps)}};
  if (path.selected_step) {
    out["selected_step"] = *path.selected_step + 1;  // 1-based like the step field
    out["selected_s"] = path.steps[*path.selected_step].partition.n_groups();
  } else {
    out["selected_step"] = nullptr;
    out["selected_s"] = nullptr;
  }
  return out;
}

json dendrogram_to_json(const Dendrogram& tree, const std::vector<std::string>& item_ids,
                        const ClusteringPath& path) {
  json nodes = json::array();
  for (std::size_t id = 0; id < tree.nodes.size(); ++id) {
    if (tree.is_leaf(static_cast<int>(id))) {
      nodes.push_back(json{{"id", id}, {"item", item_ids[id]}});
    } else {
      const auto& node = tree.nodes[id];
      nodes.push_back(json{{"id", id},
                           {"left", node.left},
                           {"right", node.right},
                           {"raw_height", node.raw_height},
                           {"height", node.height}});
    }
  }
  json leaf_order = json::array();
  for (int leaf : tree.leaf_order) leaf_order.push_back(item_ids[leaf]);
  json out{{"n_leaves", tree.n_leaves},
           {"nodes", std::move(nodes)},
           {"leaf_order", std::move(leaf_order)},
           {"raw_monotonicity_violations", tree.raw_monotonicity_violations}};
  if (path.selected_step) {
    const auto& step = path.steps[*path.selected_step];
    out["cut"] = json{{"selected_s", step.partition.n_groups()},
                      {"step", step.step_index},
                      {"height", step.deviance_from_initial}};
  } else {
    out["cut"] = nullptr;
  }
  return out;
}

std::string dendrogram_to_dot(const Dendrogram& tree, const std::vector<std::string>& item_ids,
                              const ClusteringPath& path) {
  std::ostringstream dot;
  dot << "graph dendrogram {\n";
  dot << "  node [shape=box];\n";
  if (path.selected_step) {
    const auto& step = path.steps[*path.selected_step];
    dot << "  label=\"cut: s=" << step.partition.n_groups() << " after step " << step.step_index
        << " (deviance " << format_double(step.deviance_from_initial) << ")\";\n";
  }
  for (int leaf : tree.leaf_order) {
    dot << "  n" << leaf << " [label=\"" << item_ids[leaf] << "\", shape=plaintext];\n";
  }
  for (std::size_t id = tree.n_leaves; id < tree.nodes.size(); ++id) {
    const auto& node = tree.nodes[id];
    dot << "  n" << id << " [label=\"" << format_double(node.height) << "\"];\n";
    dot << "  n" << id << " -- n" << node.left << ";\n";
    dot << "  n" << id << " -- n" << node.right << ";\n";
  }
  dot << "}\n";
  return dot.str();
}

std::string criterion_table_text(const CriterionReport& report) {
  // One row per clustering step (the initial model is shown as a comment),
  // minimum-BIC row marked. Round-trip BIC formatting.
  std::ostringstream out;
  const auto& initial = report.rows.front();
  out << "# initial model: s=" << initial.s << " BIC=" << format_double(initial.bic) << "\n";
  out << "step\tBIC\ts\n";
  for (const auto& row : report.rows) {
    if (row.step == 0) continue;
    out << row.step << "\t" << format_double(row.bic) << "\t" << row.s;
    if (row.s == report.selected_s) out << "\t*";
    out << "\n";
  }
  return out.str();
}

std::string selected_partition_text(const ItemPartition& partition,
                                    const std::vector<std::string>& item_ids,
                                    const Dendrogram& tree) {
  // Dimensions in order of first appearance in the dendrogram leaf order.
  std::vector<std::size_t> order;
  std::vector<bool> seen(partition.n_groups(), false);
  for (int leaf : tree.leaf_order) {
    const std::size_t d = partition.dimension_of(leaf);
    if (!seen[d]) {
      seen[d] = true;
      order.push_back(d);
    }
  }
  std::ostringstream out;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const auto& group = partition.group(order[rank]);
    out << "Dimension " << rank + 1 << " -- " << group.size()
        << (group.size() == 1 ? " item: " : " items: ") << join_ids(group, item_ids) << "\n";
  }
  return out.str();
}

std::string dimension_frequency_text(const ItemPartition& partition,
                                     const std::vector<std::string>& item_ids,
                                     const std::vector<double>& frequencies) {
  std::vector<std::size_t> order(partition.n_groups());
  for (std::size_t d = 0; d < order.size(); ++d) order[d] = d;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return frequencies[a] > frequencies[b];
  });
  std::ostringstream out;
  out << "dimension\titems\tfrequency\n";
  for (std::size_t d : order) {
    char value[32];
    std::snprintf(value, sizeof(value), "%.3f", frequencies[d]);
    out << d + 1 << "\t" << join_ids(partition.group(d), item_ids) << "\t" << value << "\n";
  }
  return out.str();
}

json simulation_spec_to_json(const SimulationSpec& spec) {
  const auto ids = spec.item_ids;
  return json{{"n_respondents", spec.n_respondents},
              {"seed", spec.seed},
              {"item_ids", ids},
              {"partition", partition_to_json(spec.true_partition, ids)},
              {"parameters", parameters_to_json(spec.true_parameters)}};
}

SimulationSpec simulation_spec_from_json(const json& j) {
  SimulationSpec spec;
  spec.n_respondents = j.at("n_respondents").get<std::size_t>();
  spec.seed = j.at("seed").get<std::uint64_t>();
  spec.item_ids = j.at("item_ids").get<std::vector<std::string>>();
  spec.true_partition = partition_from_json(j.at("partition"), spec.item_ids);
  spec.true_parameters = parameters_from_json(j.at("parameters"));
  spec.validate();
  return spec;
}

json preprocess_report_to_json(const PreprocessReport& report) {
  json missing = json::object();
  for (const auto& [id, count] : report.missing_per_item) missing[id] = count;
  return json{{"n_rows", report.n_rows},
              {"missing_per_item", std::move(missing)},
              {"total_missing", report.total_missing()},
              {"degenerate_items", report.degenerate_items},
              {"dropped_items", report.dropped_items}};
}

std::string matrix_to_csv(const ResponseMatrix& matrix) {
  std::ostringstream out;
  const auto& ids = matrix.item_ids();
  for (std::size_t j = 0; j < ids.size(); ++j) {
    if (j > 0) out << ',';
    out << ids[j];
  }
  out << '\n';
  for (std::size_t r = 0; r < matrix.n_respondents(); ++r) {
    for (std::size_t j = 0; j < ids.size(); ++j) {
      if (j > 0) out << ',';
      out << static_cast<int>(matrix(r, j));
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace dimscale
