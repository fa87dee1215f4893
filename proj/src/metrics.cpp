#include "parley/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "parley/util.hpp"

namespace parley {
namespace {

using ordered_json = nlohmann::ordered_json;

// Above this dimension the covariance difference is computed in factored
// form; 2000-topic lexica never materialize a 2000 x 2000 matrix.
constexpr Eigen::Index kFactoredDimensionThreshold = 256;

double frobenius_inner_product_of_covariances(const Eigen::MatrixXd& a_centered, std::size_t na,
                                              const Eigen::MatrixXd& b_centered, std::size_t nb) {
  // tr(Sigma_a Sigma_b) = ||A B^T||_F^2 / (na * nb) for centered A, B.
  const Eigen::MatrixXd cross = a_centered * b_centered.transpose();
  return cross.squaredNorm() / (static_cast<double>(na) * static_cast<double>(nb));
}

}  // namespace

SummaryStats summarize(std::span<const double> values) {
  if (values.empty()) {
    throw MetricError("summarize: empty sample set");
  }
  SummaryStats stats;
  stats.n = values.size();
  stats.mean = pairwise_sum(values) / static_cast<double>(values.size());
  std::vector<double> squared;
  squared.reserve(values.size());
  for (double v : values) {
    const double d = v - stats.mean;
    squared.push_back(d * d);
  }
  const double variance = pairwise_sum(squared) / static_cast<double>(values.size());
  stats.stddev = std::sqrt(std::max(variance, 0.0));
  return stats;
}

VectorSummaryStats VectorSummaryStats::from_samples(const std::vector<Eigen::VectorXd>& samples) {
  if (samples.empty()) {
    throw MetricError("VectorSummaryStats: empty sample set");
  }
  const Eigen::Index dim = samples.front().size();
  for (const auto& sample : samples) {
    if (sample.size() != dim) {
      throw MetricError("VectorSummaryStats: inconsistent sample dimensions");
    }
  }
  VectorSummaryStats stats;
  stats.n_ = samples.size();
  stats.mean_ = Eigen::VectorXd::Zero(dim);
  for (const auto& sample : samples) stats.mean_ += sample;
  stats.mean_ /= static_cast<double>(samples.size());
  stats.centered_.resize(static_cast<Eigen::Index>(samples.size()), dim);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    stats.centered_.row(static_cast<Eigen::Index>(i)) = (samples[i] - stats.mean_).transpose();
  }
  return stats;
}

Eigen::MatrixXd VectorSummaryStats::covariance() const {
  return centered_.transpose() * centered_ / static_cast<double>(n_);
}

double VectorSummaryStats::covariance_frobenius() const {
  // ||A^T A||_F == ||A A^T||_F; use whichever Gram matrix is smaller.
  if (centered_.rows() <= centered_.cols()) {
    return (centered_ * centered_.transpose()).norm() / static_cast<double>(n_);
  }
  return (centered_.transpose() * centered_).norm() / static_cast<double>(n_);
}

double scalar_average_error(std::span<const std::pair<double, double>> pairs,
                            std::size_t* excluded) {
  if (pairs.empty()) {
    throw MetricError("scalar_average_error: empty pair list");
  }
  std::vector<double> errors;
  errors.reserve(pairs.size());
  std::size_t skipped = 0;
  for (const auto& [c, l] : pairs) {
    if (c == 0.0) {
      ++skipped;
      continue;
    }
    errors.push_back(std::abs(c - l) / std::abs(c));
  }
  if (excluded != nullptr) *excluded = skipped;
  if (errors.empty()) {
    throw MetricError("scalar_average_error: all pairs have zero reference");
  }
  return pairwise_sum(errors) / static_cast<double>(errors.size());
}

double scalar_error_of_average(const SummaryStats& c, const SummaryStats& l) {
  if (c.mean == 0.0) {
    throw MetricError("scalar_error_of_average: zero reference mean");
  }
  return std::abs(c.mean - l.mean) / std::abs(c.mean);
}

double scalar_error_of_dispersion(const SummaryStats& c, const SummaryStats& l) {
  if (c.stddev <= 0.0) {
    throw MetricError("scalar_error_of_dispersion: zero reference standard deviation");
  }
  return std::abs(l.stddev - c.stddev) / c.stddev;
}

double vector_average_error(std::span<const std::pair<Eigen::VectorXd, Eigen::VectorXd>> pairs,
                            std::size_t* excluded) {
  if (pairs.empty()) {
    throw MetricError("vector_average_error: empty pair list");
  }
  std::vector<double> errors;
  errors.reserve(pairs.size());
  std::size_t skipped = 0;
  for (const auto& [c, l] : pairs) {
    if (c.size() != l.size()) {
      throw MetricError("vector_average_error: dimension mismatch");
    }
    const double ref_norm = c.norm();
    if (ref_norm == 0.0) {
      ++skipped;
      continue;
    }
    errors.push_back((c - l).norm() / ref_norm);
  }
  if (excluded != nullptr) *excluded = skipped;
  if (errors.empty()) {
    throw MetricError("vector_average_error: all pairs have zero reference vectors");
  }
  return pairwise_sum(errors) / static_cast<double>(errors.size());
}

double vector_error_of_average(const VectorSummaryStats& c, const VectorSummaryStats& l) {
  if (c.dimension() != l.dimension()) {
    throw MetricError("vector_error_of_average: dimension mismatch");
  }
  const double ref_norm = c.mean().norm();
  if (ref_norm == 0.0) {
    throw MetricError("vector_error_of_average: zero reference mean vector");
  }
  return (c.mean() - l.mean()).norm() / ref_norm;
}

double vector_error_of_dispersion(const VectorSummaryStats& c, const VectorSummaryStats& l,
                                  DispersionMethod method) {
  if (c.dimension() != l.dimension()) {
    throw MetricError("vector_error_of_dispersion: dimension mismatch");
  }
  const double ref_fro = c.covariance_frobenius();
  if (ref_fro == 0.0) {
    throw MetricError("vector_error_of_dispersion: zero reference covariance");
  }
  bool factored = method == DispersionMethod::factored;
  if (method == DispersionMethod::automatic) {
    factored = c.dimension() > kFactoredDimensionThreshold;
  }
  if (!factored) {
    return (l.covariance() - c.covariance()).norm() / ref_fro;
  }
  const double cc = ref_fro * ref_fro;
  const double ll_fro = l.covariance_frobenius();
  const double ll = ll_fro * ll_fro;
  const double cl = frobenius_inner_product_of_covariances(c.centered(), c.count(), l.centered(),
                                                           l.count());
  const double squared = std::max(cc + ll - 2.0 * cl, 0.0);
  return std::sqrt(squared) / ref_fro;
}

const FeatureMetrics* MetricReport::find(const std::string& feature) const {
  for (const auto& fm : features) {
    if (fm.feature == feature) return &fm;
  }
  return nullptr;
}

namespace {

ordered_json stats_to_json(const SummaryStats& stats) {
  ordered_json j;
  j["mean"] = stats.mean;
  j["stddev"] = stats.stddev;
  j["n"] = stats.n;
  return j;
}

SummaryStats stats_from_json(const ordered_json& j) {
  SummaryStats stats;
  stats.mean = j.at("mean").get<double>();
  stats.stddev = j.at("stddev").get<double>();
  stats.n = j.at("n").get<std::size_t>();
  return stats;
}

}  // namespace

std::string MetricReport::to_json() const {
  ordered_json j;
  j["variant_key"] = variant_key;
  j["features"] = ordered_json::array();
  for (const auto& fm : features) {
    ordered_json f;
    f["feature"] = fm.feature;
    f["level"] = to_string(fm.level);
    f["vector"] = fm.vector;
    if (fm.average_error) f["average_error"] = *fm.average_error;
    if (fm.error_of_average) f["error_of_average"] = *fm.error_of_average;
    if (fm.error_of_dispersion) f["error_of_dispersion"] = *fm.error_of_dispersion;
    f["reference"] = stats_to_json(fm.reference);
    f["generated"] = stats_to_json(fm.generated);
    f["pairs_used"] = fm.pairs_used;
    f["excluded_zero_reference"] = fm.excluded_zero_reference;
    f["n_reference"] = fm.n_reference;
    f["n_generated"] = fm.n_generated;
    if (!fm.note.empty()) f["note"] = fm.note;
    j["features"].push_back(std::move(f));
  }
  return j.dump(2);
}

MetricReport MetricReport::from_json_text(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw MetricError(std::string("malformed report JSON: ") + e.what());
  }
  MetricReport report;
  report.variant_key = j.value("variant_key", "");
  if (!j.contains("features") || !j["features"].is_array()) {
    throw MetricError("malformed report JSON: missing features array");
  }
  for (const auto& f : j["features"]) {
    FeatureMetrics fm;
    fm.feature = f.at("feature").get<std::string>();
    fm.level = f.value("level", "speaker") == "turn" ? Level::turn : Level::speaker;
    fm.vector = f.value("vector", false);
    if (f.contains("average_error")) fm.average_error = f["average_error"].get<double>();
    if (f.contains("error_of_average")) fm.error_of_average = f["error_of_average"].get<double>();
    if (f.contains("error_of_dispersion")) {
      fm.error_of_dispersion = f["error_of_dispersion"].get<double>();
    }
    if (f.contains("reference")) fm.reference = stats_from_json(f["reference"]);
    if (f.contains("generated")) fm.generated = stats_from_json(f["generated"]);
    fm.pairs_used = f.value("pairs_used", std::size_t{0});
    fm.excluded_zero_reference = f.value("excluded_zero_reference", std::size_t{0});
    fm.n_reference = f.value("n_reference", std::size_t{0});
    fm.n_generated = f.value("n_generated", std::size_t{0});
    fm.note = f.value("note", "");
    report.features.push_back(std::move(fm));
  }
  return report;
}

std::string MetricReport::to_csv() const {
  std::ostringstream out;
  out << "feature,level,metric,value\n";
  auto row = [&](const FeatureMetrics& fm, const char* metric, double value) {
    out << fm.feature << ',' << to_string(fm.level) << ',' << metric << ',' << value << '\n';
  };
  for (const auto& fm : features) {
    if (fm.average_error) row(fm, "average_error", *fm.average_error);
    if (fm.error_of_average) row(fm, "error_of_average", *fm.error_of_average);
    if (fm.error_of_dispersion) row(fm, "error_of_dispersion", *fm.error_of_dispersion);
    row(fm, "reference_mean", fm.reference.mean);
    row(fm, "generated_mean", fm.generated.mean);
    row(fm, "reference_stddev", fm.reference.stddev);
    row(fm, "generated_stddev", fm.generated.stddev);
  }
  return out.str();
}

namespace {

std::vector<double> scalar_values(const std::vector<FeatureSample>& samples) {
  std::vector<double> values;
  values.reserve(samples.size());
  for (const auto& s : samples) values.push_back(s.value);
  return values;
}

FeatureMetrics compare_scalar_feature(const std::string& feature,
                                      const std::vector<FeatureSample>& ref,
                                      const std::vector<FeatureSample>& gen) {
  FeatureMetrics fm;
  fm.feature = feature;
  fm.level = ref.front().level;
  fm.n_reference = ref.size();
  fm.n_generated = gen.size();
  fm.reference = summarize(scalar_values(ref));
  fm.generated = summarize(scalar_values(gen));

  try {
    fm.error_of_average = scalar_error_of_average(fm.reference, fm.generated);
  } catch (const MetricError& e) {
    fm.note = e.what();
  }

  if (fm.level == Level::speaker) {
    try {
      fm.error_of_dispersion = scalar_error_of_dispersion(fm.reference, fm.generated);
    } catch (const MetricError& e) {
      if (fm.note.empty()) fm.note = e.what();
    }
    std::map<std::string, double> gen_by_unit;
    for (const auto& s : gen) gen_by_unit[s.unit_id] = s.value;
    std::vector<std::pair<double, double>> pairs;
    for (const auto& s : ref) {
      auto it = gen_by_unit.find(s.unit_id);
      if (it != gen_by_unit.end()) pairs.emplace_back(s.value, it->second);
    }
    fm.pairs_used = pairs.size();
    if (!pairs.empty()) {
      try {
        fm.average_error = scalar_average_error(pairs, &fm.excluded_zero_reference);
      } catch (const MetricError& e) {
        if (fm.note.empty()) fm.note = e.what();
      }
    }
  }
  return fm;
}

FeatureMetrics compare_vector_feature(const std::string& feature,
                                      const std::vector<FeatureSample>& ref,
                                      const std::vector<FeatureSample>& gen) {
  FeatureMetrics fm;
  fm.feature = feature;
  fm.level = ref.front().level;
  fm.vector = true;
  fm.n_reference = ref.size();
  fm.n_generated = gen.size();

  std::vector<Eigen::VectorXd> ref_vecs;
  ref_vecs.reserve(ref.size());
  for (const auto& s : ref) ref_vecs.push_back(s.vec);
  std::vector<Eigen::VectorXd> gen_vecs;
  gen_vecs.reserve(gen.size());
  for (const auto& s : gen) gen_vecs.push_back(s.vec);

  const VectorSummaryStats ref_stats = VectorSummaryStats::from_samples(ref_vecs);
  const VectorSummaryStats gen_stats = VectorSummaryStats::from_samples(gen_vecs);
  fm.reference.mean = ref_stats.mean().norm();
  fm.reference.stddev = ref_stats.covariance_frobenius();
  fm.reference.n = ref_stats.count();
  fm.generated.mean = gen_stats.mean().norm();
  fm.generated.stddev = gen_stats.covariance_frobenius();
  fm.generated.n = gen_stats.count();

  try {
    fm.error_of_average = vector_error_of_average(ref_stats, gen_stats);
  } catch (const MetricError& e) {
    fm.note = e.what();
  }
  try {
    fm.error_of_dispersion = vector_error_of_dispersion(ref_stats, gen_stats);
  } catch (const MetricError& e) {
    if (fm.note.empty()) fm.note = e.what();
  }

  std::map<std::string, const FeatureSample*> gen_by_unit;
  for (const auto& s : gen) gen_by_unit[s.unit_id] = &s;
  std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> pairs;
  for (const auto& s : ref) {
    auto it = gen_by_unit.find(s.unit_id);
    if (it != gen_by_unit.end()) pairs.emplace_back(s.vec, it->second->vec);
  }
  fm.pairs_used = pairs.size();
  if (!pairs.empty()) {
    try {
      fm.average_error = vector_average_error(pairs, &fm.excluded_zero_reference);
    } catch (const MetricError& e) {
      if (fm.note.empty()) fm.note = e.what();
    }
  }
  return fm;
}

}  // namespace

MetricReport compare_tables(const SampleTable& reference, const SampleTable& generated) {
  MetricReport report;
  for (const auto& [feature, ref_samples] : reference.features) {
    const auto* gen_samples = generated.find(feature);
    if (gen_samples == nullptr || ref_samples.empty() || gen_samples->empty()) continue;
    if (ref_samples.front().is_vector()) {
      report.features.push_back(compare_vector_feature(feature, ref_samples, *gen_samples));
    } else {
      report.features.push_back(compare_scalar_feature(feature, ref_samples, *gen_samples));
    }
  }
  return report;
}

}  // namespace parley
