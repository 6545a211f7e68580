#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace outpro {

// File and format problems; the CLI maps these to usage/IO exit code 2.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Dataset {
  Eigen::MatrixXd features;  // n x d
  Eigen::VectorXd response;  // length n
  std::vector<std::string> feature_names;

  Eigen::Index n() const { return features.rows(); }
  Eigen::Index d() const { return features.cols(); }
};

// Reads a comma separated file with a header row. Every cell must parse as
// a finite real; the response column is moved out of the feature matrix.
Dataset load_csv(const std::string& path, const std::string& response_column);

// Writes header + rows with 17 significant digits, so load_csv(write_csv(ds))
// reproduces the dataset exactly.
void write_csv(const Dataset& ds, const std::string& path,
               const std::string& response_name = "y");

// Feature matrix without a response (scoring inputs, anomaly batches).
Eigen::MatrixXd load_matrix_csv(const std::string& path,
                                std::vector<std::string>* names = nullptr);

// Same, but listed columns are skipped entirely (never parsed as numbers),
// so files with bookkeeping columns like mode/label/seed load cleanly.
Eigen::MatrixXd load_feature_matrix(const std::string& path,
                                    const std::vector<std::string>& drop_columns,
                                    std::vector<std::string>* names = nullptr);
void write_matrix_csv(const Eigen::MatrixXd& m,
                      const std::vector<std::string>& names,
                      const std::string& path);

// Per-column location/scale fitted on training data. Constant columns get
// sd = 1 so they standardize to identically zero.
struct Standardizer {
  Eigen::VectorXd means;
  Eigen::VectorXd sds;

  static Standardizer fit(const Eigen::MatrixXd& train);

  Eigen::MatrixXd transform(const Eigen::MatrixXd& x) const;
  Eigen::VectorXd transform_row(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd inverse(const Eigen::MatrixXd& z) const;
  Eigen::Index d() const { return means.size(); }
};

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
};

// Seeded random partition; |train| = round(train_fraction * n). Row order
// within each part follows the original dataset order.
std::pair<Dataset, Dataset> split(const Dataset& ds, const SplitSpec& spec);

// Index form of the same partition (both sorted ascending).
std::pair<std::vector<Eigen::Index>, std::vector<Eigen::Index>> split_indices(
    Eigen::Index n, const SplitSpec& spec);

Dataset take_rows(const Dataset& ds, const std::vector<Eigen::Index>& rows);

}  // namespace outpro
