#include "shapecox/survival_core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "shapecox/errors.hpp"

namespace shapecox {

namespace {

void check_finite(const Eigen::MatrixXd& m, const char* what) {
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i)
      if (!std::isfinite(m(i, j)))
        throw ValidationError(std::string(what) + " contains a non-finite value at row " +
                              std::to_string(i) + ", column " + std::to_string(j));
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cell));
      cell.clear();
    } else if (c != '\r') {
      cell += c;
    }
  }
  out.push_back(std::move(cell));
  return out;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

double parse_number(const std::string& cell, std::size_t row, const std::string& column) {
  const std::string t = trim(cell);
  double v = 0.0;
  const char* first = t.data();
  const char* last = t.data() + t.size();
  if (!t.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (t.empty() || ec != std::errc() || ptr != last)
    throw ParseError("cannot parse '" + t + "' as a number at row " + std::to_string(row) +
                     ", column '" + column + "'");
  return v;
}

}  // namespace

Dataset::Dataset(Eigen::VectorXd time, Eigen::VectorXi status, Eigen::MatrixXd x, Eigen::MatrixXd z)
    : time_(std::move(time)), status_(std::move(status)), x_(std::move(x)), z_(std::move(z)) {
  const Index n = time_.size();
  if (n < 1) throw ValidationError("dataset is empty");
  if (status_.size() != n || x_.rows() != n || z_.rows() != n)
    throw ValidationError("time, status, x and z must have the same number of rows");
  for (Index i = 0; i < n; ++i) {
    if (!std::isfinite(time_(i)) || time_(i) < 0.0)
      throw ValidationError("time at row " + std::to_string(i) + " must be finite and >= 0");
    if (status_(i) != 0 && status_(i) != 1)
      throw ValidationError("status not in {0,1} at row " + std::to_string(i));
  }
  check_finite(x_, "x");
  check_finite(z_, "z");
  num_events_ = status_.sum();
  if (num_events_ == 0) throw ValidationError("all observations are censored; at least one event is required");

  order_.resize(static_cast<std::size_t>(n));
  std::iota(order_.begin(), order_.end(), Index{0});
  std::stable_sort(order_.begin(), order_.end(), [&](Index a, Index b) { return time_(a) < time_(b); });

  tie_first_.resize(order_.size());
  tie_last_.resize(order_.size());
  for (std::size_t s = 0; s < order_.size(); ++s) {
    const bool same = s > 0 && time_(order_[s]) == time_(order_[s - 1]);
    tie_first_[s] = same ? tie_first_[s - 1] : static_cast<Index>(s);
  }
  for (std::size_t s = order_.size(); s-- > 0;) {
    const bool same = s + 1 < order_.size() && time_(order_[s]) == time_(order_[s + 1]);
    tie_last_[s] = same ? tie_last_[s + 1] : static_cast<Index>(s);
  }
  tau_ = time_.maxCoeff();
}

Dataset Dataset::from_observations(std::span<const Observation> rows) {
  if (rows.empty()) throw ValidationError("dataset is empty");
  const auto d = static_cast<Index>(rows.front().x.size());
  const auto p = static_cast<Index>(rows.front().z.size());
  const auto n = static_cast<Index>(rows.size());
  Eigen::VectorXd time(n);
  Eigen::VectorXi status(n);
  Eigen::MatrixXd x(n, d), z(n, p);
  for (Index i = 0; i < n; ++i) {
    const auto& o = rows[static_cast<std::size_t>(i)];
    if (static_cast<Index>(o.x.size()) != d || static_cast<Index>(o.z.size()) != p)
      throw ValidationError("observation " + std::to_string(i) + " has inconsistent covariate dimensions");
    time(i) = o.y;
    status(i) = o.delta;
    for (Index k = 0; k < d; ++k) x(i, k) = o.x[static_cast<std::size_t>(k)];
    for (Index k = 0; k < p; ++k) z(i, k) = o.z[static_cast<std::size_t>(k)];
  }
  return Dataset(std::move(time), std::move(status), std::move(x), std::move(z));
}

Observation Dataset::observation(Index i) const {
  Observation o;
  o.y = time_(i);
  o.delta = status_(i);
  o.x.resize(static_cast<std::size_t>(x_.cols()));
  for (Index k = 0; k < x_.cols(); ++k) o.x[static_cast<std::size_t>(k)] = x_(i, k);
  o.z.resize(static_cast<std::size_t>(z_.cols()));
  for (Index k = 0; k < z_.cols(); ++k) o.z[static_cast<std::size_t>(k)] = z_(i, k);
  return o;
}

Dataset Dataset::subset(std::span<const Index> rows) const {
  const auto m = static_cast<Index>(rows.size());
  Eigen::VectorXd time(m);
  Eigen::VectorXi status(m);
  Eigen::MatrixXd x(m, x_.cols()), z(m, z_.cols());
  for (Index k = 0; k < m; ++k) {
    const Index i = rows[static_cast<std::size_t>(k)];
    if (i < 0 || i >= size()) throw ValidationError("subset row index out of range");
    time(k) = time_(i);
    status(k) = status_(i);
    x.row(k) = x_.row(i);
    z.row(k) = z_.row(i);
  }
  return Dataset(std::move(time), std::move(status), std::move(x), std::move(z));
}

std::uint64_t Dataset::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  const std::int64_t dims[3] = {size(), num_linear(), num_additive()};
  mix(dims, sizeof dims);
  for (Index i = 0; i < size(); ++i) {
    mix(&time_(i), sizeof(double));
    const std::int32_t s = status_(i);
    mix(&s, sizeof s);
    for (Index k = 0; k < x_.cols(); ++k) mix(&x_(i, k), sizeof(double));
    for (Index k = 0; k < z_.cols(); ++k) mix(&z_(i, k), sizeof(double));
  }
  return h;
}

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("'" + path.string() + "' has no header row");
  if (line.size() >= 3 && std::memcmp(line.data(), "\xEF\xBB\xBF", 3) == 0) line.erase(0, 3);

  std::unordered_map<std::string, std::size_t> column_of;
  const auto header = split_csv_line(line);
  for (std::size_t c = 0; c < header.size(); ++c) column_of.emplace(trim(header[c]), c);
  auto locate = [&](const std::string& name) {
    const auto it = column_of.find(name);
    if (it == column_of.end()) throw SchemaError("column '" + name + "' not found in header");
    return it->second;
  };
  if (schema.time.empty()) throw SchemaError("time column required");
  if (schema.status.empty()) throw SchemaError("status column required");
  const std::size_t time_col = locate(schema.time);
  const std::size_t status_col = locate(schema.status);
  std::vector<std::size_t> x_cols, z_cols;
  for (const auto& name : schema.x) x_cols.push_back(locate(name));
  for (const auto& name : schema.z) z_cols.push_back(locate(name));

  std::vector<double> time, xs, zs;
  std::vector<int> status;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    auto cell = [&](std::size_t c, const std::string& name) {
      if (c >= cells.size())
        throw ParseError("row " + std::to_string(row) + " has no value for column '" + name + "'");
      return parse_number(cells[c], row, name);
    };
    time.push_back(cell(time_col, schema.time));
    const double s = cell(status_col, schema.status);
    if (s != 0.0 && s != 1.0)
      throw ValidationError("status not in {0,1} at row " + std::to_string(row));
    status.push_back(static_cast<int>(s));
    for (std::size_t k = 0; k < x_cols.size(); ++k) xs.push_back(cell(x_cols[k], schema.x[k]));
    for (std::size_t k = 0; k < z_cols.size(); ++k) zs.push_back(cell(z_cols[k], schema.z[k]));
  }

  const auto n = static_cast<Index>(time.size());
  const auto d = static_cast<Index>(x_cols.size());
  const auto p = static_cast<Index>(z_cols.size());
  Eigen::VectorXd t = Eigen::Map<Eigen::VectorXd>(time.data(), n);
  Eigen::VectorXi st = Eigen::Map<Eigen::VectorXi>(status.data(), n);
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::MatrixXd x = Eigen::Map<RowMajor>(xs.data(), n, d);
  Eigen::MatrixXd z = Eigen::Map<RowMajor>(zs.data(), n, p);
  return Dataset(std::move(t), std::move(st), std::move(x), std::move(z));
}

void save_csv(const Dataset& ds, const std::filesystem::path& path, const CsvSchema& schema) {
  if (static_cast<Index>(schema.x.size()) != ds.num_linear() ||
      static_cast<Index>(schema.z.size()) != ds.num_additive())
    throw SchemaError("schema column count does not match the dataset");
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << schema.time << ',' << schema.status;
  for (const auto& c : schema.x) out << ',' << c;
  for (const auto& c : schema.z) out << ',' << c;
  out << '\n';
  char buf[40];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << ',' << buf;
  };
  for (Index i = 0; i < ds.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", ds.time()(i));
    out << buf << ',' << ds.status()(i);
    for (Index k = 0; k < ds.num_linear(); ++k) put(ds.x()(i, k));
    for (Index k = 0; k < ds.num_additive(); ++k) put(ds.z()(i, k));
    out << '\n';
  }
  if (!out) throw Error("failed while writing '" + path.string() + "'");
}

std::vector<Index> risk_set_sizes(const Dataset& ds) {
  const Index n = ds.size();
  std::vector<Index> out(static_cast<std::size_t>(n));
  const auto order = ds.order();
  for (Index s = 0; s < n; ++s) out[static_cast<std::size_t>(order[static_cast<std::size_t>(s)])] = n - ds.tie_first(s);
  return out;
}

}  // namespace shapecox
