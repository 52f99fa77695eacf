#include "dimscale/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "dimscale/model.hpp"
#include "dimscale/parallel.hpp"
#include "dimscale/rng.hpp"
#include "dimscale/selection.hpp"

namespace dimscale {

namespace {

// Boundary boxes; keep Heywood-style divergence off separable items.
constexpr double kLocBound = 20.0;    // |theta|, |beta|
constexpr double kGammaMin = 1e-3;
constexpr double kGammaMax = 1e3;
constexpr int kMaxHalvings = 40;
constexpr double kMaxNewtonStep = 5.0;

// Item mean clamped so that beta = -logit(mean) stays inside the box.
double clamped_mean(double m) {
  const double lo = numeric::logistic(-kLocBound);
  return std::clamp(m, lo, 1.0 - lo);
}

// Per-class evaluation tables: pattern log-likelihood for class c is
// log_pi[c] + base[c] + sum over answered-1 items of delta[c*J + j].
struct Tables {
  std::vector<double> log_pi;
  std::vector<double> base;
  std::vector<double> delta;
};

void build_tables(const ModelParameters& params, const ItemPartition& partition, Tables& t) {
  const std::size_t k = params.n_classes();
  const std::size_t j_count = params.n_items();
  t.log_pi.assign(k, 0.0);
  t.base.assign(k, 0.0);
  t.delta.assign(k * j_count, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    const double pi = params.class_weights[c];
    t.log_pi[c] = pi > 0.0 ? std::log(pi) : -std::numeric_limits<double>::infinity();
    double base = 0.0;
    for (std::size_t j = 0; j < j_count; ++j) {
      const double lambda = success_probability(params, partition, j, c);
      const double log_l = std::log(lambda);
      const double log_1ml = std::log1p(-lambda);
      base += log_1ml;
      t.delta[c * j_count + j] = log_l - log_1ml;
    }
    t.base[c] = base;
  }
}

// E-step over aggregated patterns; fills posteriors (n_patterns x k,
// row-major) and returns the observed-data log-likelihood.
double e_step(const PatternData& data, const Tables& t, std::size_t k,
              std::vector<double>& posteriors) {
  const std::size_t p_count = data.n_patterns();
  const std::size_t j_count = data.n_items;
  posteriors.assign(p_count * k, 0.0);
  double loglik = 0.0;
  std::vector<double> logp(k);
  for (std::size_t p = 0; p < p_count; ++p) {
    for (std::size_t c = 0; c < k; ++c) {
      double acc = t.log_pi[c] + t.base[c];
      const double* delta_c = t.delta.data() + c * j_count;
      for (int j : data.ones[p]) acc += delta_c[j];
      logp[c] = acc;
    }
    const double lse = numeric::log_sum_exp(logp);
    loglik += data.weights[p] * lse;
    double* z = posteriors.data() + p * k;
    if (std::isfinite(lse)) {
      double total = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        z[c] = std::exp(logp[c] - lse);
        total += z[c];
      }
      for (std::size_t c = 0; c < k; ++c) z[c] /= total;
    } else {
      for (std::size_t c = 0; c < k; ++c) z[c] = 1.0 / static_cast<double>(k);
    }
  }
  return loglik;
}

// Expected sufficient statistics: class_totals[c] = sum_p w_p z_pc and
// ones_totals[c*J + j] = sum_p w_p z_pc x_pj.
void m_stats(const PatternData& data, const std::vector<double>& posteriors, std::size_t k,
             std::vector<double>& class_totals, std::vector<double>& ones_totals) {
  const std::size_t j_count = data.n_items;
  class_totals.assign(k, 0.0);
  ones_totals.assign(k * j_count, 0.0);
  for (std::size_t p = 0; p < data.n_patterns(); ++p) {
    const double* z = posteriors.data() + p * k;
    const double w = data.weights[p];
    for (std::size_t c = 0; c < k; ++c) {
      const double wz = w * z[c];
      class_totals[c] += wz;
      double* ones_c = ones_totals.data() + c * j_count;
      for (int j : data.ones[p]) ones_c[j] += wz;
    }
  }
}

// Expected complete-data log-likelihood contribution of one item:
// sum_c [ S_c * eta_c - n_c * softplus(eta_c) ], eta_c = gamma (theta_c - beta).
double q_item(double beta, double gamma, std::span<const double> theta,
              std::span<const double> s_ones, std::span<const double> n_class) {
  double q = 0.0;
  for (std::size_t c = 0; c < theta.size(); ++c) {
    const double eta = gamma * (theta[c] - beta);
    q += s_ones[c] * eta - n_class[c] * numeric::softplus(eta);
  }
  return q;
}

double q_theta(double theta, std::span<const int> items, std::size_t c, std::size_t j_count,
               const ModelParameters& params, const std::vector<double>& ones_totals,
               const std::vector<double>& class_totals) {
  double q = 0.0;
  for (int j : items) {
    const double eta = params.discriminations[j] * (theta - params.difficulties[j]);
    q += ones_totals[c * j_count + j] * eta - class_totals[c] * numeric::softplus(eta);
  }
  return q;
}

struct NewtonOutcome {
  bool moved = false;
  bool fallback = false;
};

// Maximizes the item block (beta_j, gamma_j) -- or beta_j alone for the
// reference item of a dimension -- by damped Newton-Raphson with
// step-halving; a rejected Newton direction falls back to one
// bisection-damped gradient step.
NewtonOutcome update_item_block(std::size_t item, bool gamma_free, const ItemPartition& partition,
                                ModelParameters& params, const std::vector<double>& class_totals,
                                const std::vector<double>& ones_totals, const EmConfig& config,
                                double n_total) {
  const std::size_t k = params.n_classes();
  const std::size_t j_count = params.n_items();
  const std::size_t d = partition.dimension_of(item);
  std::vector<double> theta(k), s_ones(k);
  for (std::size_t c = 0; c < k; ++c) {
    theta[c] = params.abilities(c, d);
    s_ones[c] = ones_totals[c * j_count + item];
  }
  double beta = params.difficulties[item];
  double gamma = params.discriminations[item];
  const double grad_tol = config.m_step_tolerance * std::max(1.0, n_total);

  NewtonOutcome outcome;
  double q_cur = q_item(beta, gamma, theta, s_ones, class_totals);
  bool done = false;
  for (std::size_t it = 0; it < config.m_step_max_newton && !done; ++it) {
    double g_beta = 0.0, g_gamma = 0.0;
    double h_bb = 0.0, h_gg = 0.0, h_bg = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      const double t = theta[c] - beta;
      const double lambda = numeric::logistic(gamma * t);
      const double resid = s_ones[c] - class_totals[c] * lambda;
      const double w = class_totals[c] * lambda * (1.0 - lambda);
      g_beta += -gamma * resid;
      g_gamma += resid * t;
      h_bb += -gamma * gamma * w;
      h_gg += -w * t * t;
      h_bg += gamma * w * t - resid;
    }
    const double g_norm = gamma_free ? std::max(std::abs(g_beta), std::abs(g_gamma))
                                     : std::abs(g_beta);
    if (g_norm <= grad_tol) break;

    double step_beta = 0.0, step_gamma = 0.0;
    bool newton_ok = false;
    if (gamma_free) {
      const double det = h_bb * h_gg - h_bg * h_bg;
      if (h_bb < 0.0 && det > 0.0) {
        step_beta = -(h_gg * g_beta - h_bg * g_gamma) / det;
        step_gamma = -(-h_bg * g_beta + h_bb * g_gamma) / det;
        newton_ok = true;
      }
    } else if (h_bb < 0.0) {
      step_beta = -g_beta / h_bb;
      newton_ok = true;
    }
    if (!newton_ok) {
      const double scale = std::max({std::abs(h_bb), std::abs(h_gg), 1.0});
      step_beta = g_beta / scale;
      step_gamma = gamma_free ? g_gamma / scale : 0.0;
      outcome.fallback = true;
    }
    step_beta = std::clamp(step_beta, -kMaxNewtonStep, kMaxNewtonStep);
    step_gamma = std::clamp(step_gamma, -kMaxNewtonStep, kMaxNewtonStep);

    bool accepted = false;
    for (int attempt = 0; attempt <= 1 && !accepted; ++attempt) {
      if (attempt == 1) {
        // Newton step never reached an ascent point: one damped gradient try.
        if (!newton_ok) break;
        const double scale = std::max({std::abs(h_bb), std::abs(h_gg), 1.0});
        step_beta = std::clamp(g_beta / scale, -kMaxNewtonStep, kMaxNewtonStep);
        step_gamma = gamma_free
                         ? std::clamp(g_gamma / scale, -kMaxNewtonStep, kMaxNewtonStep)
                         : 0.0;
        outcome.fallback = true;
      }
      double t_step = 1.0;
      for (int h = 0; h < kMaxHalvings; ++h, t_step *= 0.5) {
        const double beta_try = std::clamp(beta + t_step * step_beta, -kLocBound, kLocBound);
        const double gamma_try =
            gamma_free ? std::clamp(gamma + t_step * step_gamma, kGammaMin, kGammaMax) : gamma;
        const double q_try = q_item(beta_try, gamma_try, theta, s_ones, class_totals);
        if (q_try >= q_cur) {
          const double gain = q_try - q_cur;
          beta = beta_try;
          gamma = gamma_try;
          q_cur = q_try;
          outcome.moved = true;
          accepted = true;
          done = gain <= config.m_step_tolerance * (1.0 + std::abs(q_cur));
          break;
        }
      }
    }
    if (!accepted) break;
  }
  params.difficulties[item] = beta;
  params.discriminations[item] = gamma;
  return outcome;
}

NewtonOutcome update_theta_block(std::size_t c, std::size_t d, const ItemPartition& partition,
                                 ModelParameters& params, const std::vector<double>& class_totals,
                                 const std::vector<double>& ones_totals, const EmConfig& config,
                                 double n_total) {
  const std::size_t j_count = params.n_items();
  const auto& items = partition.group(d);
  double theta = params.abilities(c, d);
  const double grad_tol = config.m_step_tolerance * std::max(1.0, n_total);

  NewtonOutcome outcome;
  double q_cur = q_theta(theta, items, c, j_count, params, ones_totals, class_totals);
  bool done = false;
  for (std::size_t it = 0; it < config.m_step_max_newton && !done; ++it) {
    double g = 0.0, h = 0.0;
    for (int j : items) {
      const double gamma = params.discriminations[j];
      const double lambda = numeric::logistic(gamma * (theta - params.difficulties[j]));
      g += gamma * (ones_totals[c * j_count + j] - class_totals[c] * lambda);
      h += -gamma * gamma * class_totals[c] * lambda * (1.0 - lambda);
    }
    if (std::abs(g) <= grad_tol) break;

    double step;
    if (h < 0.0) {
      step = -g / h;
    } else {
      step = g / std::max(std::abs(h), 1.0);
      outcome.fallback = true;
    }
    step = std::clamp(step, -kMaxNewtonStep, kMaxNewtonStep);

    bool accepted = false;
    for (int attempt = 0; attempt <= 1 && !accepted; ++attempt) {
      if (attempt == 1) {
        if (h >= 0.0) break;
        step = std::clamp(g / std::max(std::abs(h), 1.0), -kMaxNewtonStep, kMaxNewtonStep);
        outcome.fallback = true;
      }
      double t_step = 1.0;
      for (int hv = 0; hv < kMaxHalvings; ++hv, t_step *= 0.5) {
        const double theta_try = std::clamp(theta + t_step * step, -kLocBound, kLocBound);
        const double q_try =
            q_theta(theta_try, items, c, j_count, params, ones_totals, class_totals);
        if (q_try >= q_cur) {
          const double gain = q_try - q_cur;
          theta = theta_try;
          q_cur = q_try;
          outcome.moved = true;
          accepted = true;
          done = gain <= config.m_step_tolerance * (1.0 + std::abs(q_cur));
          break;
        }
      }
    }
    if (!accepted) break;
  }
  params.abilities(c, d) = theta;
  return outcome;
}

// One M-step over the blocks: class weights (closed form), then items, then
// free abilities. Every block conditions on the same E-step posteriors, so
// the expected complete-data log-likelihood never decreases.
std::size_t m_step(const PatternData& data, const ItemPartition& partition,
                   const std::vector<double>& class_totals, const std::vector<double>& ones_totals,
                   const EmConfig& config, ModelParameters& params) {
  const std::size_t k = params.n_classes();
  std::size_t fallbacks = 0;

  double total = 0.0;
  for (double n_c : class_totals) total += n_c;
  for (std::size_t c = 0; c < k; ++c) params.class_weights[c] = class_totals[c] / total;
  double simplex = 0.0;
  for (double w : params.class_weights) simplex += w;
  for (double& w : params.class_weights) w /= simplex;

  for (std::size_t j = 0; j < params.n_items(); ++j) {
    const bool gamma_free = !partition.is_reference(j);
    if (update_item_block(j, gamma_free, partition, params, class_totals, ones_totals, config,
                          data.n_total)
            .fallback)
      ++fallbacks;
  }
  for (std::size_t c = 1; c < k; ++c) {
    for (std::size_t d = 0; d < partition.n_groups(); ++d) {
      if (update_theta_block(c, d, partition, params, class_totals, ones_totals, config,
                             data.n_total)
              .fallback)
        ++fallbacks;
    }
  }
  return fallbacks;
}

struct ChainResult {
  ModelParameters params;
  double log_likelihood = -std::numeric_limits<double>::infinity();
  std::size_t iterations = 0;
  bool converged = false;
  std::size_t newton_fallbacks = 0;
  double max_decrease = 0.0;
};

// Independence model: with a single class the MLE is the (box-projected)
// per-item sample mean, so the chain is closed form.
ChainResult closed_form_k1(const PatternData& data, const ItemPartition& partition) {
  ChainResult result;
  const std::size_t j_count = data.n_items;
  ModelParameters params;
  params.class_weights = {1.0};
  params.abilities = Matrix(1, partition.n_groups(), 0.0);
  params.difficulties.resize(j_count);
  params.discriminations.assign(j_count, 1.0);
  for (std::size_t j = 0; j < j_count; ++j) {
    params.difficulties[j] =
        std::clamp(-numeric::logit(clamped_mean(data.item_means[j])), -kLocBound, kLocBound);
  }
  Tables tables;
  build_tables(params, partition, tables);
  std::vector<double> posteriors;
  result.log_likelihood = e_step(data, tables, 1, posteriors);
  result.params = std::move(params);
  result.iterations = 1;
  result.converged = true;
  return result;
}

ChainResult run_chain(const PatternData& data, const ItemPartition& partition,
                      ModelParameters params, const EmConfig& config) {
  const std::size_t k = params.n_classes();
  if (k == 1) return closed_form_k1(data, partition);

  ChainResult result;
  Tables tables;
  std::vector<double> posteriors, class_totals, ones_totals;
  double prev_ll = -std::numeric_limits<double>::infinity();
  std::size_t iter = 0;
  for (; iter < config.max_iterations; ++iter) {
    build_tables(params, partition, tables);
    const double ll = e_step(data, tables, k, posteriors);
    if (iter > 0) {
      result.max_decrease = std::max(result.max_decrease, prev_ll - ll);
      const double rel = std::abs(ll - prev_ll) / std::max(std::abs(prev_ll), 1e-12);
      if (rel < config.rel_tolerance) {
        result.converged = true;
        result.log_likelihood = ll;
        break;
      }
    }
    prev_ll = ll;
    m_stats(data, posteriors, k, class_totals, ones_totals);
    result.newton_fallbacks += m_step(data, partition, class_totals, ones_totals, config, params);
  }
  if (!result.converged) {
    // Ran out of iterations after a final M-step; report that point's value.
    build_tables(params, partition, tables);
    const double ll = e_step(data, tables, k, posteriors);
    result.max_decrease = std::max(result.max_decrease, prev_ll - ll);
    result.log_likelihood = ll;
  }
  result.iterations = std::min(iter + 1, config.max_iterations);
  result.params = std::move(params);
  return result;
}

}  // namespace

void EmConfig::validate() const {
  if (rel_tolerance <= 0.0 || m_step_tolerance <= 0.0)
    throw std::invalid_argument("EmConfig: tolerances must be > 0");
  if (n_starts < 1) throw std::invalid_argument("EmConfig: n_starts must be >= 1");
  if (max_iterations < 1) throw std::invalid_argument("EmConfig: max_iterations must be >= 1");
}

PatternData PatternData::from_matrix(const ResponseMatrix& matrix) {
  PatternData data;
  data.n_items = matrix.n_items();
  data.n_total = static_cast<double>(matrix.n_respondents());
  std::map<std::vector<std::uint8_t>, std::size_t> index;
  for (std::size_t r = 0; r < matrix.n_respondents(); ++r) {
    const auto row = matrix.row(r);
    std::vector<std::uint8_t> key(row.begin(), row.end());
    auto [it, inserted] = index.try_emplace(std::move(key), data.weights.size());
    if (inserted) {
      data.weights.push_back(0.0);
      std::vector<int> ones;
      for (std::size_t j = 0; j < data.n_items; ++j) {
        if (it->first[j]) ones.push_back(static_cast<int>(j));
      }
      data.ones.push_back(std::move(ones));
    }
    data.weights[it->second] += 1.0;
  }
  data.item_means.assign(data.n_items, 0.0);
  for (std::size_t p = 0; p < data.n_patterns(); ++p) {
    for (int j : data.ones[p]) data.item_means[j] += data.weights[p];
  }
  for (double& m : data.item_means) m /= data.n_total;
  return data;
}

namespace detail {

ModelParameters initialize_patterns(const PatternData& data, const ItemPartition& partition,
                                    std::size_t k, std::size_t start_index, std::uint64_t seed) {
  if (k < 1) throw std::invalid_argument("initialize: k must be >= 1");
  const std::size_t j_count = data.n_items;
  const std::size_t s = partition.n_groups();
  ModelParameters params;
  params.class_weights.assign(k, 1.0 / static_cast<double>(k));
  params.abilities = Matrix(k, s, 0.0);
  // Equally spaced ability grid across a 4-wide span, re-anchored so the
  // first class sits at 0.
  for (std::size_t c = 1; c < k; ++c) {
    const double level = 4.0 * static_cast<double>(c) / static_cast<double>(k - 1);
    for (std::size_t d = 0; d < s; ++d) params.abilities(c, d) = level;
  }
  params.difficulties.resize(j_count);
  params.discriminations.assign(j_count, 1.0);
  for (std::size_t j = 0; j < j_count; ++j) {
    params.difficulties[j] =
        std::clamp(-numeric::logit(clamped_mean(data.item_means[j])), -kLocBound, kLocBound);
  }
  if (start_index >= 1) {
    Rng rng(substream_seed(seed, start_index));
    for (std::size_t c = 1; c < k; ++c) {
      for (std::size_t d = 0; d < s; ++d) {
        params.abilities(c, d) =
            std::clamp(params.abilities(c, d) + rng.normal(0.0, 0.5), -kLocBound, kLocBound);
      }
    }
    for (std::size_t j = 0; j < j_count; ++j) {
      params.difficulties[j] =
          std::clamp(params.difficulties[j] + rng.normal(0.0, 0.2), -kLocBound, kLocBound);
    }
  }
  return params;
}

FitResult fit_patterns(const PatternData& data, const ItemPartition& partition, std::size_t k,
                       const EmConfig& config, const std::vector<ModelParameters>& warm_starts) {
  config.validate();
  if (k < 1) throw std::invalid_argument("fit: k must be >= 1");

  std::vector<ChainResult> chains;
  if (k == 1) {
    chains.push_back(closed_form_k1(data, partition));
  } else {
    const std::size_t n_chains = warm_starts.size() + config.n_starts;
    chains.resize(n_chains);
    parallel_for(n_chains, config.n_threads, [&](std::size_t i) {
      ModelParameters start =
          i < warm_starts.size()
              ? warm_starts[i]
              : initialize_patterns(data, partition, k, i - warm_starts.size(), config.seed);
      chains[i] = run_chain(data, partition, std::move(start), config);
    });
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i < chains.size(); ++i) {
    if (chains[i].log_likelihood > chains[best].log_likelihood) best = i;
  }

  FitResult fit;
  fit.parameters = chains[best].params;
  fit.partition = partition;
  fit.log_likelihood = chains[best].log_likelihood;
  fit.n_parameters = parameter_count(data.n_items, k, partition.n_groups());
  const auto n = static_cast<std::size_t>(data.n_total);
  fit.bic = bic(fit.log_likelihood, fit.n_parameters, n);
  fit.aic = aic(fit.log_likelihood, fit.n_parameters);
  fit.n_em_iterations = chains[best].iterations;
  fit.converged = chains[best].converged;
  fit.start_index = best;
  for (const auto& chain : chains) {
    fit.diagnostics.newton_fallbacks += chain.newton_fallbacks;
    fit.diagnostics.max_loglik_decrease =
        std::max(fit.diagnostics.max_loglik_decrease, chain.max_decrease);
  }
  fit.diagnostics.k_exceeds_patterns = k > data.n_patterns();
  return fit;
}

}  // namespace detail

ModelParameters initialize(const ResponseMatrix& matrix, const ItemPartition& partition,
                           std::size_t k, std::size_t start_index, std::uint64_t seed) {
  return detail::initialize_patterns(PatternData::from_matrix(matrix), partition, k, start_index,
                                     seed);
}

std::pair<ModelParameters, double> em_step(const ModelParameters& params,
                                           const ItemPartition& partition,
                                           const ResponseMatrix& matrix) {
  params.validate(partition);
  const auto data = PatternData::from_matrix(matrix);
  const std::size_t k = params.n_classes();
  EmConfig config;

  Tables tables;
  std::vector<double> posteriors, class_totals, ones_totals;
  build_tables(params, partition, tables);
  e_step(data, tables, k, posteriors);
  m_stats(data, posteriors, k, class_totals, ones_totals);
  ModelParameters updated = params;
  m_step(data, partition, class_totals, ones_totals, config, updated);

  build_tables(updated, partition, tables);
  const double ll = e_step(data, tables, k, posteriors);
  return {std::move(updated), ll};
}

FitResult fit(const ResponseMatrix& matrix, const ItemPartition& partition, std::size_t k,
              const EmConfig& config) {
  if (matrix.n_items() != partition.n_items())
    throw std::invalid_argument("fit: matrix and partition item counts differ");
  return detail::fit_patterns(PatternData::from_matrix(matrix), partition, k, config, {});
}

std::size_t parameter_count(std::size_t n_items, std::size_t n_classes,
                            std::size_t n_dimensions) {
  if (n_classes < 1 || n_dimensions < 1 || n_dimensions > n_items)
    throw std::invalid_argument("parameter_count: requires k >= 1 and 1 <= s <= J");
  return (n_classes - 1) + (n_classes - 1) * n_dimensions + n_items + (n_items - n_dimensions);
}

}  // namespace dimscale
