#pragma once

#include <memory>
#include <string>

#include "outpro/config.hpp"
#include "outpro/dataset.hpp"
#include "outpro/scorer.hpp"

namespace outpro {

// Persisted fit: everything cmd_score needs, in one versioned binary file.
// The standardized training matrix is rebuilt from the embedded raw data on
// load, so save(load(x)) is byte-identical.
struct ModelBundle {
  static constexpr std::uint32_t kVersion = 1;

  std::string config_snapshot;  // INI text the fit ran with
  Dataset train;                // raw scale
  std::shared_ptr<const OodCore> core;
  MetricSpec metric;
  double alpha = 0.05;
  Eigen::VectorXd train_scores;
  double threshold = 0.0;

  OodModel model() const;

  void save(const std::string& path) const;
  static ModelBundle load(const std::string& path);
};

}  // namespace outpro
