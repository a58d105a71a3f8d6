#include "pairsift/labelmodel.hpp"

#include "pairsift/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace pairsift {

using nlohmann::json;

namespace {

constexpr std::int8_t kKeepCell = 1;
constexpr std::int8_t kAbstainCell = -1;
constexpr double kAccuracyFloor = 0.05;
constexpr double kAccuracyCeil = 0.95;
constexpr double kPosteriorClamp = 1e-12;

double clamp_unit(double p) {
  return std::clamp(p, kPosteriorClamp, 1.0 - kPosteriorClamp);
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// P(Keep | row) from raw cells; abstains contribute no evidence.
double row_posterior(const LabelModelParams& params,
                     const std::int8_t* row, Eigen::Index stride,
                     Eigen::Index m) {
  double logit = std::log(params.prior) - std::log1p(-params.prior);
  for (Eigen::Index j = 0; j < m; ++j) {
    const std::int8_t cell = row[j * stride];
    if (cell == kAbstainCell) continue;
    const double a = params.accuracies(j);
    const double odds = std::log(a) - std::log1p(-a);
    logit += cell == kKeepCell ? odds : -odds;
  }
  return clamp_unit(logistic(logit));
}

}  // namespace

FitResult fit(const LabelMatrix& matrix, const FitConfig& config) {
  const Eigen::Index n = matrix.rows();
  const Eigen::Index m = matrix.cols();
  if (config.tolerance <= 0.0 || config.max_iterations < 1) {
    throw std::invalid_argument("fit: tolerance must be > 0 and max_iterations >= 1");
  }

  // Vote bookkeeping; the matrix must carry at least one vote somewhere.
  Eigen::VectorXi vote_counts = Eigen::VectorXi::Zero(m);
  std::int64_t total_votes = 0;
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < m; ++c) {
      if (matrix.cells(r, c) != kAbstainCell) {
        ++vote_counts(c);
        ++total_votes;
      }
    }
  }
  if (n == 0 || m == 0 || total_votes == 0) {
    throw std::runtime_error("fit: label matrix has no non-abstain votes");
  }

  LabelModelParams params;
  params.prior = config.init_prior;
  params.accuracies = Vector::Constant(m, config.init_accuracy);
  params.propensities = Vector(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    params.propensities(j) = static_cast<double>(vote_counts(j)) / n;
  }

  // Propensity is class-independent, so its likelihood term is a constant
  // offset; computed once and added to every per-iteration value.
  double propensity_ll = 0.0;
  for (Eigen::Index j = 0; j < m; ++j) {
    const double p = params.propensities(j);
    const double nv = static_cast<double>(vote_counts(j));
    if (p > 0.0) propensity_ll += nv * std::log(p);
    if (p < 1.0) propensity_ll += (static_cast<double>(n) - nv) * std::log1p(-p);
  }

  FitResult result;
  Vector posteriors(n);
  bool converged = false;
  int iterations = 0;

  for (int iter = 0; iter < config.max_iterations; ++iter) {
    ++iterations;

    // E-step plus the observed-data log-likelihood at the current params.
    double ll = propensity_ll;
    for (Eigen::Index r = 0; r < n; ++r) {
      double log_keep = std::log(params.prior);
      double log_drop = std::log1p(-params.prior);
      for (Eigen::Index c = 0; c < m; ++c) {
        const std::int8_t cell = matrix.cells(r, c);
        if (cell == kAbstainCell) continue;
        const double a = params.accuracies(c);
        if (cell == kKeepCell) {
          log_keep += std::log(a);
          log_drop += std::log1p(-a);
        } else {
          log_keep += std::log1p(-a);
          log_drop += std::log(a);
        }
      }
      // log-sum-exp of the two class terms.
      const double hi = std::max(log_keep, log_drop);
      ll += hi + std::log(std::exp(log_keep - hi) + std::exp(log_drop - hi));
      posteriors(r) = clamp_unit(logistic(log_keep - log_drop));
    }
    result.log_likelihood.push_back(ll);

    // M-step over the accuracies. The class prior stays anchored at
    // init_prior: quantile-derived LFs have asymmetric vote marginals that a
    // symmetric-accuracy model can only explain by running the prior to an
    // extreme, which inverts accuracies and destroys the posterior ranking.
    // Holding the balance fixed keeps EM in the informative basin; rankings
    // are invariant to the anchor anyway.
    Vector new_acc = params.accuracies;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (vote_counts(j) == 0) continue;  // never-voting LF keeps its init
      double matched = 0.0;
      for (Eigen::Index r = 0; r < n; ++r) {
        const std::int8_t cell = matrix.cells(r, j);
        if (cell == kAbstainCell) continue;
        matched += cell == kKeepCell ? posteriors(r) : 1.0 - posteriors(r);
      }
      new_acc(j) = std::clamp(matched / vote_counts(j), kAccuracyFloor,
                              kAccuracyCeil);
    }

    double delta = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      delta = std::max(delta, std::abs(new_acc(j) - params.accuracies(j)));
    }
    params.accuracies = std::move(new_acc);
    if (delta <= config.tolerance) {
      converged = true;
      break;
    }
  }

  // The generative model is symmetric under a global label swap; pick the
  // representative with mean accuracy >= 0.5.
  if (params.accuracies.mean() < 0.5) {
    params.accuracies = (1.0 - params.accuracies.array()).matrix();
    params.prior = 1.0 - params.prior;
  }

  result.params = std::move(params);
  result.converged = converged;
  result.iterations = iterations;
  return result;
}

double posterior(const LabelModelParams& params,
                 const Eigen::Ref<const LabelColumn>& row) {
  if (row.size() != params.lf_count()) {
    throw std::invalid_argument("posterior: row length does not match LF count");
  }
  return row_posterior(params, row.data(), row.innerStride(), row.size());
}

std::map<SampleId, double> score_all(const LabelModelParams& params,
                                     const LabelMatrix& matrix) {
  if (matrix.cols() != params.lf_count()) {
    throw std::invalid_argument("score_all: matrix width does not match LF count");
  }
  std::map<SampleId, double> scores;
  for (Eigen::Index r = 0; r < matrix.rows(); ++r) {
    LabelColumn row = matrix.cells.row(r).transpose();
    scores[matrix.sample_ids[static_cast<std::size_t>(r)]] =
        row_posterior(params, row.data(), 1, row.size());
  }
  return scores;
}

LfWeights lf_weights(const LabelModelParams& params) {
  LfWeights w;
  w.weights = params.accuracies;
  w.log_odds = (params.accuracies.array() / (1.0 - params.accuracies.array()))
                   .log()
                   .matrix();
  return w;
}

std::map<SampleId, double> majority_vote(const LabelMatrix& matrix) {
  if (matrix.rows() == 0) {
    throw std::invalid_argument("majority_vote: empty matrix");
  }
  std::map<SampleId, double> scores;
  for (Eigen::Index r = 0; r < matrix.rows(); ++r) {
    int keeps = 0, votes = 0;
    for (Eigen::Index c = 0; c < matrix.cols(); ++c) {
      const std::int8_t cell = matrix.cells(r, c);
      if (cell == kAbstainCell) continue;
      ++votes;
      if (cell == kKeepCell) ++keeps;
    }
    scores[matrix.sample_ids[static_cast<std::size_t>(r)]] =
        votes == 0 ? 0.5 : static_cast<double>(keeps) / votes;
  }
  return scores;
}

LabelModelParams random_params(int lf_count, std::uint64_t seed) {
  if (lf_count < 1) {
    throw std::invalid_argument("random_params: lf_count must be >= 1");
  }
  SplitMix64 rng(seed);
  LabelModelParams params;
  params.prior = 0.5;
  params.accuracies = Vector(lf_count);
  for (int j = 0; j < lf_count; ++j) {
    params.accuracies(j) =
        kAccuracyFloor + (kAccuracyCeil - kAccuracyFloor) * rng.uniform();
  }
  params.propensities = Vector::Ones(lf_count);
  return params;
}

void write_params_json(const FitResult& result, const std::filesystem::path& path) {
  json doc;
  doc["prior"] = result.params.prior;
  doc["accuracies"] = std::vector<double>(
      result.params.accuracies.data(),
      result.params.accuracies.data() + result.params.accuracies.size());
  doc["propensities"] = std::vector<double>(
      result.params.propensities.data(),
      result.params.propensities.data() + result.params.propensities.size());
  doc["converged"] = result.converged;
  doc["iterations"] = result.iterations;
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write file: " + path.string());
  }
  out << doc.dump(2) << '\n';
}

FitResult load_params_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open file: " + path.string());
  }
  json doc = json::parse(in);
  FitResult result;
  result.params.prior = doc.at("prior").get<double>();
  const auto acc = doc.at("accuracies").get<std::vector<double>>();
  const auto prop = doc.at("propensities").get<std::vector<double>>();
  if (acc.size() != prop.size()) {
    throw std::runtime_error(path.string() +
                             ": accuracies/propensities size mismatch");
  }
  result.params.accuracies =
      Eigen::Map<const Vector>(acc.data(), static_cast<Eigen::Index>(acc.size()));
  result.params.propensities =
      Eigen::Map<const Vector>(prop.data(), static_cast<Eigen::Index>(prop.size()));
  result.converged = doc.at("converged").get<bool>();
  result.iterations = doc.at("iterations").get<int>();
  return result;
}

}  // namespace pairsift
