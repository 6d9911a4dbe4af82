#include "tsgp/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>

#include "tsgp/error.hpp"

namespace tsgp {

Dataset make_dataset(std::string name, std::vector<std::string> feature_names, const Matrix& x,
                     const Vector& y) {
  if (x.rows() != y.size()) throw Error(ErrorCode::kLengthMismatch, "x and y row counts differ");
  if (x.rows() < kMinRows) {
    throw Error(ErrorCode::kTooFewRows, std::to_string(x.rows()) + " rows, need " +
                                            std::to_string(kMinRows));
  }
  Matrix joint(x.rows(), x.cols() + 1);
  joint.leftCols(x.cols()) = x;
  joint.col(x.cols()) = y;
  Standardized s = standardize(joint);

  Dataset ds;
  ds.name = std::move(name);
  ds.feature_names = std::move(feature_names);
  ds.x = s.data.leftCols(x.cols());
  ds.y = s.data.col(x.cols());
  ds.params = std::move(s.params);
  return ds;
}

namespace {

std::vector<std::string> split_line(const std::string& line, char sep) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    cells.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  for (auto& c : cells) {
    const auto b = c.find_first_not_of(" \t\r\"");
    const auto e = c.find_last_not_of(" \t\r\"");
    c = b == std::string::npos ? std::string() : c.substr(b, e - b + 1);
  }
  return cells;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

Dataset load_csv(const std::string& path, const std::string& target_column,
                 const std::string& name) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kTooFewRows, path + " is empty");
  const char sep = line.find('\t') != std::string::npos ? '\t' : ',';
  const std::vector<std::string> header = split_line(line, sep);

  const auto it = std::find(header.begin(), header.end(), target_column);
  if (it == header.end()) {
    throw Error(ErrorCode::kMissingTarget, "no column '" + target_column + "' in " + path);
  }
  const int target = static_cast<int>(it - header.begin());
  std::vector<std::string> features;
  for (int c = 0; c < static_cast<int>(header.size()); ++c) {
    if (c != target) features.push_back(header[c]);
  }

  std::vector<double> values;
  int rows = 0;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::vector<std::string> cells = split_line(line, sep);
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::kNonNumericCell, path + ":" + std::to_string(line_no) + ": expected " +
                                                  std::to_string(header.size()) + " cells");
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double v = 0.0;
      if (!parse_double(cells[c], v)) {
        throw Error(ErrorCode::kNonNumericCell,
                    path + ":" + std::to_string(line_no) + ": '" + cells[c] + "'");
      }
      values.push_back(v);
    }
    ++rows;
  }
  if (rows < kMinRows) {
    throw Error(ErrorCode::kTooFewRows,
                path + ": " + std::to_string(rows) + " rows, need " + std::to_string(kMinRows));
  }

  const int cols = static_cast<int>(header.size());
  Matrix x(rows, cols - 1);
  Vector y(rows);
  for (int r = 0; r < rows; ++r) {
    int j = 0;
    for (int c = 0; c < cols; ++c) {
      const double v = values[static_cast<std::size_t>(r) * cols + c];
      if (c == target) {
        y(r) = v;
      } else {
        x(r, j++) = v;
      }
    }
  }
  std::string ds_name = name;
  if (ds_name.empty()) {
    ds_name = path.substr(path.find_last_of('/') + 1);
    ds_name = ds_name.substr(0, ds_name.find('.'));
  }
  return make_dataset(std::move(ds_name), std::move(features), x, y);
}

SplitIndices split_indices(int m, std::uint64_t seed) {
  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const int n_train = (m + 1) / 2;
  SplitIndices s;
  s.train.assign(order.begin(), order.begin() + n_train);
  s.test.assign(order.begin() + n_train, order.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

SplitData apply_split(const Dataset& ds, const SplitIndices& split) {
  SplitData out;
  out.x_train = ds.x(split.train, Eigen::all);
  out.y_train = ds.y(split.train);
  out.x_test = ds.x(split.test, Eigen::all);
  out.y_test = ds.y(split.test);
  return out;
}

}  // namespace tsgp
