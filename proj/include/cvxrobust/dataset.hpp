#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace cvxrobust {

/// Per-feature z-score parameters fitted on training rows.
struct Standardization {
  std::vector<double> mean;    // one per retained feature
  std::vector<double> stddev;  // population stddev, > 0
  std::vector<Eigen::Index> kept_columns;  // indices into the input feature list
  std::vector<std::string> dropped;        // names of zero-variance features
};

/// Binary-labelled feature matrix. Immutable once constructed.
class Dataset {
 public:
  Dataset() = default;

  /// Validates labels (each exactly -1 or +1) and finiteness of X.
  Dataset(Eigen::MatrixXd X, Eigen::VectorXd y, std::vector<std::string> feature_names = {});

  const Eigen::MatrixXd& X() const noexcept { return X_; }
  const Eigen::VectorXd& y() const noexcept { return y_; }
  const std::vector<std::string>& feature_names() const noexcept { return names_; }
  Eigen::Index n() const noexcept { return X_.rows(); }
  Eigen::Index d() const noexcept { return X_.cols(); }

  Dataset rows(std::span<const Eigen::Index> index) const;
  Dataset columns(std::span<const Eigen::Index> index) const;

 private:
  Eigen::MatrixXd X_;
  Eigen::VectorXd y_;
  std::vector<std::string> names_;
};

struct LoadReport {
  std::size_t rows_read = 0;
  std::size_t rows_rejected = 0;  // rows with a missing cell
  std::string positive_label;
  std::string negative_label;
};

/// Reads an RFC-4180 CSV with a header row. `label_column` is a header name or
/// a 0-based column index. Rows with empty / NA / ? / NaN cells are rejected
/// and counted; any other non-numeric feature cell is a ParseError.
Dataset load_csv(const std::filesystem::path& path, const std::string& label_column,
                 const std::string& positive_label, LoadReport* report = nullptr);

/// Writes features with 17 significant digits plus a trailing `label` column
/// holding +1 / -1, so load_csv(path, "label", "1") reproduces the data exactly.
void save_csv(const Dataset& data, const std::filesystem::path& path);

struct Standardized {
  Dataset train;
  Dataset test;
  Standardization stats;
};

/// Z-scores both sets with statistics fitted on `train`. Zero-variance
/// training features are dropped from both and listed in stats.dropped.
Standardized standardize(const Dataset& train, const Dataset& test);

Dataset apply_standardization(const Dataset& data, const Standardization& stats);

struct Split {
  Dataset train;
  Dataset test;
  std::vector<Eigen::Index> train_index;  // rows of the input, ascending
  std::vector<Eigen::Index> test_index;
};

/// Class-stratified deterministic split. Total test size is
/// round(test_fraction * n), allocated across classes by largest remainder.
Split split(const Dataset& data, double test_fraction, std::uint64_t seed);

nlohmann::json to_json(const Standardization& stats);
Standardization standardization_from_json(const nlohmann::json& j);

}  // namespace cvxrobust
