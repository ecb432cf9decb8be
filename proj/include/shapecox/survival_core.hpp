#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace shapecox {

using Index = Eigen::Index;

// One subject: follow-up time, event indicator, linear and additive covariates.
struct Observation {
  double y = 0.0;
  int delta = 0;
  std::vector<double> x;
  std::vector<double> z;
};

// Immutable right-censored sample. Rows keep their original index; order()
// lists rows by ascending time with ties broken by original index.
class Dataset {
 public:
  Dataset(Eigen::VectorXd time, Eigen::VectorXi status, Eigen::MatrixXd x, Eigen::MatrixXd z);

  static Dataset from_observations(std::span<const Observation> rows);

  Index size() const { return time_.size(); }
  Index num_linear() const { return x_.cols(); }
  Index num_additive() const { return z_.cols(); }
  Index num_events() const { return num_events_; }
  double tau() const { return tau_; }

  const Eigen::VectorXd& time() const { return time_; }
  const Eigen::VectorXi& status() const { return status_; }
  const Eigen::MatrixXd& x() const { return x_; }
  const Eigen::MatrixXd& z() const { return z_; }

  // Row indices sorted by ascending time.
  std::span<const Index> order() const { return order_; }
  // For sorted position s, the first / last sorted position sharing its time.
  Index tie_first(Index s) const { return tie_first_[static_cast<std::size_t>(s)]; }
  Index tie_last(Index s) const { return tie_last_[static_cast<std::size_t>(s)]; }

  Observation observation(Index i) const;

  // New dataset made of the given rows, in the given order.
  Dataset subset(std::span<const Index> rows) const;

  // FNV-1a over the bit patterns of every stored value; identifies the data
  // a saved model was fitted to.
  std::uint64_t checksum() const;

 private:
  Eigen::VectorXd time_;
  Eigen::VectorXi status_;
  Eigen::MatrixXd x_;
  Eigen::MatrixXd z_;
  std::vector<Index> order_;
  std::vector<Index> tie_first_;
  std::vector<Index> tie_last_;
  Index num_events_ = 0;
  double tau_ = 0.0;
};

// Column mapping for CSV input.
struct CsvSchema {
  std::string time;
  std::string status;
  std::vector<std::string> x;
  std::vector<std::string> z;
};

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema);

// Writes header + rows with 17 significant digits so load_csv reproduces
// every value exactly.
void save_csv(const Dataset& ds, const std::filesystem::path& path, const CsvSchema& schema);

// Entry i = #{j : Y_j >= Y_i}.
std::vector<Index> risk_set_sizes(const Dataset& ds);

}  // namespace shapecox
