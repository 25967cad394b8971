#pragma once

// Language vectors, linear language-ID probes, rank correlation and TSV
// export for external projection tools.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lens/vectors.hpp"

namespace lens {

struct LanguageVector {
  std::string lang;
  std::vector<double> variance;  // per dimension, population variance of unit rows
  std::size_t count = 0;
};

/// Normalises each row to unit length, then takes the per-dimension
/// population variance. Needs >= 2 rows and no zero rows.
LanguageVector language_vector(const VectorSet& vectors, const std::string& lang);

struct ProbeOptions {
  double train_fraction = 0.01;
  std::uint64_t seed = 1;
  std::size_t iterations = 500;
  double l2 = 1e-4;
};

struct ProbeSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Stratified split: each class contributes round(fraction * n_c) training
/// rows, at least 1. Below fraction 1 a class with two or more rows keeps at
/// least one test row; fraction 1 trains on everything.
ProbeSplit probe_split(std::span<const std::size_t> labels, std::size_t classes, double fraction,
                       std::uint64_t seed);

/// Multinomial logistic regression on standardised features.
struct ProbeModel {
  std::vector<std::string> classes;
  std::size_t dim = 0;
  std::vector<double> mean, scale;  // feature standardisation
  std::vector<double> weights;      // C x D
  std::vector<double> bias;         // C

  std::size_t predict(std::span<const float> x) const;
};

struct ProbeReport {
  ProbeModel model;
  ProbeSplit split;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
};

/// Splits by `opts.seed`, fits on the training part with full-batch gradient
/// descent and reports accuracy on both parts.
ProbeReport probe_train(const VectorSet& vectors, std::span<const std::string> labels,
                        const ProbeOptions& opts = {});

/// Fraction of rows whose predicted class equals the label.
double probe_eval(const ProbeModel& model, const VectorSet& vectors, std::span<const std::string> labels);

/// Pearson correlation of tie-averaged ranks.
double spearman(std::span<const double> a, std::span<const double> b);
std::vector<double> average_ranks(std::span<const double> x);

struct LabeledRows {
  std::vector<std::string> labels;
  std::size_t dim = 0;
  std::vector<double> values;  // labels.size() x dim
};

LabeledRows labeled_rows(const VectorSet& vectors, std::span<const std::string> labels);
LabeledRows labeled_rows(std::span<const LanguageVector> langs);

/// TSV with header "label\td0\t...\td{D-1}" and one row per vector.
void export_projection(const LabeledRows& rows, const std::filesystem::path& path);
LabeledRows read_projection(const std::filesystem::path& path);

}  // namespace lens
