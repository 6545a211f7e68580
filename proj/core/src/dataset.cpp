#include "outpro/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "outpro/rng.hpp"

namespace outpro {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

double parse_cell(const std::string& raw, std::size_t row, const std::string& col) {
  const std::string s = trim(raw);
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last || s.empty()) {
    throw IoError("non-numeric cell '" + raw + "' at data row " + std::to_string(row) +
                  ", column '" + col + "'");
  }
  if (!std::isfinite(v)) {
    throw IoError("non-finite cell '" + raw + "' at data row " + std::to_string(row) +
                  ", column '" + col + "'");
  }
  return v;
}

struct RawTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Numeric parse of the selected columns; keep[j] marks columns to read.
  Eigen::MatrixXd numeric(const std::vector<bool>& keep) const {
    Eigen::Index kept = 0;
    for (bool k : keep) kept += k ? 1 : 0;
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), kept);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      Eigen::Index c = 0;
      for (std::size_t j = 0; j < header.size(); ++j) {
        if (!keep[j]) continue;
        m(static_cast<Eigen::Index>(i), c++) = parse_cell(rows[i][j], i + 1, header[j]);
      }
    }
    return m;
  }
};

RawTable read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open file: " + path);
  RawTable t;
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty file: " + path);
  for (auto& h : split_line(line)) t.header.push_back(trim(h));
  std::size_t row_no = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    ++row_no;
    auto cells = split_line(line);
    if (cells.size() != t.header.size()) {
      throw IoError("row " + std::to_string(row_no) + " has " +
                    std::to_string(cells.size()) + " cells, expected " +
                    std::to_string(t.header.size()) + " in " + path);
    }
    t.rows.push_back(std::move(cells));
  }
  return t;
}

void format_value(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

}  // namespace

Dataset load_csv(const std::string& path, const std::string& response_column) {
  RawTable t = read_table(path);
  auto it = std::find(t.header.begin(), t.header.end(), response_column);
  if (it == t.header.end()) {
    throw IoError("response column '" + response_column + "' not found in " + path);
  }
  const std::size_t yc = static_cast<std::size_t>(it - t.header.begin());
  const Eigen::Index n = static_cast<Eigen::Index>(t.rows.size());
  const Eigen::Index d = static_cast<Eigen::Index>(t.header.size()) - 1;
  if (n < 2) throw IoError("dataset needs at least 2 rows: " + path);
  if (d < 1) throw IoError("dataset needs at least 1 feature column: " + path);

  std::vector<bool> keep_features(t.header.size(), true);
  keep_features[yc] = false;
  std::vector<bool> keep_response(t.header.size(), false);
  keep_response[yc] = true;

  Dataset ds;
  ds.features = t.numeric(keep_features);
  ds.response = t.numeric(keep_response).col(0);
  for (std::size_t j = 0; j < t.header.size(); ++j) {
    if (j != yc) ds.feature_names.push_back(t.header[j]);
  }
  return ds;
}

void write_csv(const Dataset& ds, const std::string& path, const std::string& response_name) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write file: " + path);
  std::string buf;
  for (Eigen::Index j = 0; j < ds.d(); ++j) {
    buf += ds.feature_names.empty() ? ("x" + std::to_string(j + 1)) : ds.feature_names[static_cast<std::size_t>(j)];
    buf += ',';
  }
  buf += response_name;
  buf += '\n';
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    for (Eigen::Index j = 0; j < ds.d(); ++j) {
      format_value(buf, ds.features(i, j));
      buf += ',';
    }
    format_value(buf, ds.response(i));
    buf += '\n';
  }
  out << buf;
}

Eigen::MatrixXd load_matrix_csv(const std::string& path, std::vector<std::string>* names) {
  RawTable t = read_table(path);
  if (names) *names = t.header;
  return t.numeric(std::vector<bool>(t.header.size(), true));
}

Eigen::MatrixXd load_feature_matrix(const std::string& path,
                                    const std::vector<std::string>& drop_columns,
                                    std::vector<std::string>* names) {
  RawTable t = read_table(path);
  std::vector<bool> keep(t.header.size(), true);
  for (std::size_t j = 0; j < t.header.size(); ++j) {
    for (const std::string& drop : drop_columns) {
      if (t.header[j] == drop) keep[j] = false;
    }
  }
  if (names) {
    names->clear();
    for (std::size_t j = 0; j < t.header.size(); ++j) {
      if (keep[j]) names->push_back(t.header[j]);
    }
  }
  return t.numeric(keep);
}

void write_matrix_csv(const Eigen::MatrixXd& m, const std::vector<std::string>& names,
                      const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write file: " + path);
  std::string buf;
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    if (j) buf += ',';
    buf += names[static_cast<std::size_t>(j)];
  }
  buf += '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) buf += ',';
      format_value(buf, m(i, j));
    }
    buf += '\n';
  }
  out << buf;
}

Standardizer Standardizer::fit(const Eigen::MatrixXd& train) {
  const Eigen::Index n = train.rows();
  if (n < 2) throw std::invalid_argument("Standardizer::fit: need n >= 2");
  Standardizer s;
  s.means = train.colwise().mean();
  s.sds.resize(train.cols());
  for (Eigen::Index j = 0; j < train.cols(); ++j) {
    const double var =
        (train.col(j).array() - s.means(j)).square().sum() / static_cast<double>(n - 1);
    const double sd = std::sqrt(var);
    s.sds(j) = sd > 0.0 ? sd : 1.0;  // constant column rule
  }
  return s;
}

Eigen::MatrixXd Standardizer::transform(const Eigen::MatrixXd& x) const {
  if (x.cols() != d()) throw std::invalid_argument("Standardizer: dimension mismatch");
  return (x.rowwise() - means.transpose()).array().rowwise() / sds.transpose().array();
}

Eigen::VectorXd Standardizer::transform_row(const Eigen::VectorXd& x) const {
  if (x.size() != d()) throw std::invalid_argument("Standardizer: dimension mismatch");
  return (x - means).cwiseQuotient(sds);
}

Eigen::MatrixXd Standardizer::inverse(const Eigen::MatrixXd& z) const {
  if (z.cols() != d()) throw std::invalid_argument("Standardizer: dimension mismatch");
  return (z.array().rowwise() * sds.transpose().array()).rowwise() + means.transpose().array();
}

std::pair<std::vector<Eigen::Index>, std::vector<Eigen::Index>> split_indices(
    Eigen::Index n, const SplitSpec& spec) {
  if (n < 5) throw std::invalid_argument("split: need n >= 5");
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw std::invalid_argument("split: train_fraction must be in (0,1)");
  }
  const Eigen::Index n_train =
      static_cast<Eigen::Index>(std::llround(spec.train_fraction * static_cast<double>(n)));
  if (n_train < 1 || n_train >= n) {
    throw std::invalid_argument("split: n too small to produce nonempty parts");
  }
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  Rng rng(spec.seed);
  rng.shuffle(idx);
  std::vector<Eigen::Index> train(idx.begin(), idx.begin() + n_train);
  std::vector<Eigen::Index> test(idx.begin() + n_train, idx.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {std::move(train), std::move(test)};
}

Dataset take_rows(const Dataset& ds, const std::vector<Eigen::Index>& rows) {
  Dataset out;
  out.feature_names = ds.feature_names;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), ds.d());
  out.response.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) = ds.features.row(rows[i]);
    out.response(static_cast<Eigen::Index>(i)) = ds.response(rows[i]);
  }
  return out;
}

std::pair<Dataset, Dataset> split(const Dataset& ds, const SplitSpec& spec) {
  auto [train_idx, test_idx] = split_indices(ds.n(), spec);
  return {take_rows(ds, train_idx), take_rows(ds, test_idx)};
}

}  // namespace outpro
