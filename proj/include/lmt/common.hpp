#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace lmt {

/// Stacked per-agent variables: one row per agent, one column per coordinate.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

enum class ErrorKind {
  InvalidTopology,
  Validation,
  Domain,
  Dimension,
  Configuration,
  Parse,
  UnsupportedDataset,
  Parameter,
  UnavailableMetric,
  Io,
  Runtime,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require_same_shape(const Mat& a, const Mat& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    fail(ErrorKind::Dimension, std::string(what) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                                   std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                   std::to_string(b.cols()) + ")");
  }
}

/// Shortest-roundtrip-safe decimal ("%.17g"); "nan"/"inf" for non-finite values.
std::string format_double(double v);

/// Row average as a column vector (x̄ for stacked X).
inline Vec row_mean(const Mat& m) { return m.colwise().mean().transpose(); }

}  // namespace lmt
