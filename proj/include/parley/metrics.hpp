#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "parley/errors.hpp"
#include "parley/lexica.hpp"

namespace parley {

struct SummaryStats {
  double mean = 0.0;
  double stddev = 0.0;  // population
  std::size_t n = 0;
};

SummaryStats summarize(std::span<const double> values);

// Mean vector plus the centered sample matrix, so the covariance can stay in
// factored form: for topic vectors of dimension d, || Sigma_L - Sigma_C ||_F
// is computable from n x n Gram matrices without materializing d x d.
class VectorSummaryStats {
 public:
  static VectorSummaryStats from_samples(const std::vector<Eigen::VectorXd>& samples);

  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& centered() const { return centered_; }
  std::size_t count() const { return n_; }
  Eigen::Index dimension() const { return mean_.size(); }

  Eigen::MatrixXd covariance() const;          // materialized d x d, population
  double covariance_frobenius() const;         // ||Sigma||_F without d x d when n < d

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd centered_;  // n x d, row i = x_i - mean
  std::size_t n_ = 0;
};

// Pairs with zero reference (|c| = 0, or a zero reference vector) are
// excluded from the averages and counted through `excluded`.
double scalar_average_error(std::span<const std::pair<double, double>> pairs,
                            std::size_t* excluded = nullptr);
double scalar_error_of_average(const SummaryStats& c, const SummaryStats& l);
double scalar_error_of_dispersion(const SummaryStats& c, const SummaryStats& l);

double vector_average_error(std::span<const std::pair<Eigen::VectorXd, Eigen::VectorXd>> pairs,
                            std::size_t* excluded = nullptr);
double vector_error_of_average(const VectorSummaryStats& c, const VectorSummaryStats& l);

enum class DispersionMethod { automatic, materialized, factored };

double vector_error_of_dispersion(const VectorSummaryStats& c, const VectorSummaryStats& l,
                                  DispersionMethod method = DispersionMethod::automatic);

// Per-feature slice of a comparison between a reference (human) sample table
// and a generated one. Metrics that are undefined at the feature's level —
// turn-level units have no cross-corpus pairing, so only the error of
// average applies there — stay unset.
struct FeatureMetrics {
  std::string feature;
  Level level = Level::speaker;
  bool vector = false;

  std::optional<double> average_error;
  std::optional<double> error_of_average;
  std::optional<double> error_of_dispersion;

  SummaryStats reference;  // scalar features; for vector features mean/std carry
  SummaryStats generated;  // ||mean|| and ||Sigma||_F of each side

  std::size_t pairs_used = 0;
  std::size_t excluded_zero_reference = 0;
  std::size_t n_reference = 0;
  std::size_t n_generated = 0;
  std::string note;
};

struct MetricReport {
  std::string variant_key;
  std::vector<FeatureMetrics> features;

  const FeatureMetrics* find(const std::string& feature) const;

  std::string to_json() const;
  static MetricReport from_json_text(const std::string& text);
  std::string to_csv() const;  // feature,level,metric,value
};

// Joins scalar speaker-level and vector samples by unit id; turn-level
// features are compared through their summary statistics only.
MetricReport compare_tables(const SampleTable& reference, const SampleTable& generated);

}  // namespace parley
