#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "shiftcp/errors.hpp"
#include "shiftcp/splits.hpp"

namespace shiftcp::pipeline {

/// In-memory dataset: features plus optional labels, scaffold keys, and
/// fingerprints, all aligned by row.
struct Dataset {
  std::vector<std::string> ids;
  Eigen::MatrixXd features;
  std::vector<int> labels;                        // empty for unlabeled data
  std::vector<std::string> scaffolds;             // empty when absent
  std::vector<splits::Fingerprint> fingerprints;  // empty when absent
  int num_classes = 0;                            // 0 for unlabeled data

  Eigen::Index size() const { return features.rows(); }
  int dim() const { return static_cast<int>(features.cols()); }
  bool has_labels() const { return !labels.empty(); }
  bool has_scaffolds() const { return !scaffolds.empty(); }
  bool has_fingerprints() const { return !fingerprints.empty(); }

  Dataset subset(const std::vector<int>& indices) const;
};

struct IngestOptions {
  std::optional<int> num_classes;  // label range to enforce; inferred when absent
  std::optional<int> feature_dim;  // feature width to enforce
};

/// Reads the CSV schema `id[,label],f0,...,f{d-1}[,scaffold][,fp]`. The header
/// is mandatory; rows must be rectangular; features must be finite; `fp` is a
/// fixed-length 0/1 string. Parse failures carry the offending line number.
Dataset ingest_dataset(const std::string& path, const IngestOptions& options = {});
Dataset parse_dataset_csv(std::istream& input, const std::string& source_name,
                          const IngestOptions& options = {});

void write_dataset_csv(const Dataset& dataset, const std::string& path);

/// Reads the logits CSV `id,l0,...,l{K-1}` used to bypass the trainer.
Eigen::MatrixXd ingest_logits(const std::string& path, std::vector<std::string>* ids = nullptr);

/// Shortest round-trip decimal text for a double.
std::string format_double(double value);

}  // namespace shiftcp::pipeline
