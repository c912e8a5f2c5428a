#include "shiftcp/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace shiftcp::pipeline {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(current);
      current.clear();
    } else if (c != '\r') {
      current.push_back(c);
    }
  }
  fields.push_back(current);
  return fields;
}

[[noreturn]] void fail(const std::string& source, std::size_t line, const std::string& what) {
  throw InputError(source + ", line " + std::to_string(line) + ": " + what);
}

double parse_double(const std::string& source, std::size_t line, const std::string& field) {
  double value = 0;
  const auto* begin = field.data();
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) fail(source, line, "bad number '" + field + "'");
  if (!std::isfinite(value)) fail(source, line, "non-finite feature '" + field + "'");
  return value;
}

int parse_int(const std::string& source, std::size_t line, const std::string& field) {
  int value = 0;
  const auto* begin = field.data();
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) fail(source, line, "bad integer '" + field + "'");
  return value;
}

struct Header {
  bool has_label = false;
  bool has_scaffold = false;
  bool has_fp = false;
  int dim = 0;
};

Header parse_header(const std::string& source, const std::vector<std::string>& fields) {
  Header h;
  std::size_t pos = 0;
  if (fields.empty() || fields[0] != "id") fail(source, 1, "header must start with 'id'");
  ++pos;
  if (pos < fields.size() && fields[pos] == "label") {
    h.has_label = true;
    ++pos;
  }
  while (pos < fields.size() && fields[pos] == "f" + std::to_string(h.dim)) {
    ++h.dim;
    ++pos;
  }
  if (h.dim == 0) fail(source, 1, "header needs feature columns f0,f1,...");
  if (pos < fields.size() && fields[pos] == "scaffold") {
    h.has_scaffold = true;
    ++pos;
  }
  if (pos < fields.size() && fields[pos] == "fp") {
    h.has_fp = true;
    ++pos;
  }
  if (pos != fields.size()) fail(source, 1, "unexpected header column '" + fields[pos] + "'");
  return h;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

Dataset Dataset::subset(const std::vector<int>& indices) const {
  Dataset out;
  out.num_classes = num_classes;
  out.features.resize(static_cast<Eigen::Index>(indices.size()), features.cols());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const int i = indices[r];
    if (i < 0 || i >= size()) throw InputError("subset index out of range");
    out.features.row(static_cast<Eigen::Index>(r)) = features.row(i);
    out.ids.push_back(ids[static_cast<std::size_t>(i)]);
    if (has_labels()) out.labels.push_back(labels[static_cast<std::size_t>(i)]);
    if (has_scaffolds()) out.scaffolds.push_back(scaffolds[static_cast<std::size_t>(i)]);
    if (has_fingerprints()) out.fingerprints.push_back(fingerprints[static_cast<std::size_t>(i)]);
  }
  return out;
}

Dataset parse_dataset_csv(std::istream& input, const std::string& source_name,
                          const IngestOptions& options) {
  std::string line;
  if (!std::getline(input, line)) fail(source_name, 1, "missing header");
  const Header header = parse_header(source_name, split_csv_line(line));
  if (options.feature_dim && header.dim != *options.feature_dim) {
    fail(source_name, 1,
         "expected " + std::to_string(*options.feature_dim) + " feature columns, found " +
             std::to_string(header.dim));
  }

  const std::size_t expected_fields = 1 + (header.has_label ? 1 : 0) +
                                      static_cast<std::size_t>(header.dim) +
                                      (header.has_scaffold ? 1 : 0) + (header.has_fp ? 1 : 0);

  Dataset data;
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  std::size_t fp_len = 0;
  int max_label = -1;
  while (std::getline(input, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != expected_fields) {
      fail(source_name, line_no,
           "expected " + std::to_string(expected_fields) + " fields, found " +
               std::to_string(fields.size()));
    }
    std::size_t pos = 0;
    if (fields[pos].empty()) fail(source_name, line_no, "empty id");
    data.ids.push_back(fields[pos++]);
    if (header.has_label) {
      const int y = parse_int(source_name, line_no, fields[pos++]);
      if (y < 0) fail(source_name, line_no, "label " + std::to_string(y) + " is negative");
      if (options.num_classes && y >= *options.num_classes) {
        fail(source_name, line_no,
             "label " + std::to_string(y) + " outside {0.." +
                 std::to_string(*options.num_classes - 1) + "}");
      }
      max_label = std::max(max_label, y);
      data.labels.push_back(y);
    }
    std::vector<double> row;
    row.reserve(static_cast<std::size_t>(header.dim));
    for (int j = 0; j < header.dim; ++j) {
      row.push_back(parse_double(source_name, line_no, fields[pos++]));
    }
    rows.push_back(std::move(row));
    if (header.has_scaffold) {
      if (fields[pos].empty()) fail(source_name, line_no, "empty scaffold key");
      data.scaffolds.push_back(fields[pos++]);
    }
    if (header.has_fp) {
      const std::string& bits = fields[pos++];
      if (bits.empty()) fail(source_name, line_no, "empty fingerprint");
      if (fp_len == 0) fp_len = bits.size();
      if (bits.size() != fp_len) {
        fail(source_name, line_no, "fingerprint length " + std::to_string(bits.size()) +
                                       " differs from " + std::to_string(fp_len));
      }
      splits::Fingerprint fp;
      fp.reserve(bits.size());
      for (char c : bits) {
        if (c != '0' && c != '1') fail(source_name, line_no, "fingerprint must be 0/1");
        fp.push_back(static_cast<std::uint8_t>(c == '1'));
      }
      data.fingerprints.push_back(std::move(fp));
    }
  }
  if (rows.empty()) fail(source_name, line_no, "no data rows");

  data.features.resize(static_cast<Eigen::Index>(rows.size()), header.dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (int j = 0; j < header.dim; ++j) {
      data.features(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
    }
  }
  if (header.has_label) {
    data.num_classes = options.num_classes.value_or(std::max(2, max_label + 1));
  }
  return data;
}

Dataset ingest_dataset(const std::string& path, const IngestOptions& options) {
  std::ifstream file(path);
  if (!file) throw IoError("cannot open '" + path + "'");
  return parse_dataset_csv(file, path, options);
}

void write_dataset_csv(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << "id";
  if (dataset.has_labels()) out << ",label";
  for (int j = 0; j < dataset.dim(); ++j) out << ",f" << j;
  if (dataset.has_scaffolds()) out << ",scaffold";
  if (dataset.has_fingerprints()) out << ",fp";
  out << "\n";
  for (Eigen::Index i = 0; i < dataset.size(); ++i) {
    out << dataset.ids[static_cast<std::size_t>(i)];
    if (dataset.has_labels()) out << "," << dataset.labels[static_cast<std::size_t>(i)];
    for (int j = 0; j < dataset.dim(); ++j) {
      out << "," << format_double(dataset.features(i, j));
    }
    if (dataset.has_scaffolds()) out << "," << dataset.scaffolds[static_cast<std::size_t>(i)];
    if (dataset.has_fingerprints()) {
      out << ",";
      for (auto bit : dataset.fingerprints[static_cast<std::size_t>(i)]) {
        out << (bit ? '1' : '0');
      }
    }
    out << "\n";
  }
  if (!out) throw IoError("failed while writing '" + path + "'");
}

Eigen::MatrixXd ingest_logits(const std::string& path, std::vector<std::string>* ids) {
  std::ifstream file(path);
  if (!file) throw IoError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(file, line)) fail(path, 1, "missing header");
  const auto header = split_csv_line(line);
  if (header.empty() || header[0] != "id") fail(path, 1, "header must start with 'id'");
  int k = 0;
  for (std::size_t pos = 1; pos < header.size(); ++pos, ++k) {
    if (header[pos] != "l" + std::to_string(k)) {
      fail(path, 1, "unexpected header column '" + header[pos] + "'");
    }
  }
  if (k < 2) fail(path, 1, "logits file needs at least 2 classes");

  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(file, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != static_cast<std::size_t>(k) + 1) {
      fail(path, line_no, "expected " + std::to_string(k + 1) + " fields");
    }
    if (fields[0].empty()) fail(path, line_no, "empty id");
    if (ids) ids->push_back(fields[0]);
    std::vector<double> row;
    for (int j = 0; j < k; ++j) {
      row.push_back(parse_double(path, line_no, fields[static_cast<std::size_t>(j) + 1]));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) fail(path, line_no, "no data rows");
  Eigen::MatrixXd logits(static_cast<Eigen::Index>(rows.size()), k);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (int j = 0; j < k; ++j) {
      logits(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
    }
  }
  return logits;
}

}  // namespace shiftcp::pipeline
