#include "lmt/topology.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <fstream>
#include <sstream>

namespace lmt {

namespace {

void validate_weights(const Mat& w) {
  if (w.rows() == 0 || w.rows() != w.cols()) {
    fail(ErrorKind::Validation, "mixing matrix must be square and nonempty");
  }
  if (!w.allFinite()) fail(ErrorKind::Validation, "mixing matrix has non-finite entries");
  const Eigen::Index n = w.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (std::abs(w(i, j) - w(j, i)) > kSymmetryTol) {
        fail(ErrorKind::Validation, "mixing matrix not symmetric at (" + std::to_string(i) + "," +
                                        std::to_string(j) + ")");
      }
    }
  }
  if (w.minCoeff() < 0.0) fail(ErrorKind::Validation, "mixing matrix has negative weights");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(w.row(i).sum() - 1.0) > kRowSumTol) {
      fail(ErrorKind::Validation, "mixing matrix row " + std::to_string(i) + " does not sum to 1");
    }
  }
}

}  // namespace

SpectralInfo spectral_quantities(const Mat& weights) {
  validate_weights(weights);
  const Eigen::Index n = weights.rows();
  const Eigen::MatrixXd w = weights;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_w(w, Eigen::EigenvaluesOnly);
  if (eig_w.eigenvalues().minCoeff() < -kPsdTol) {
    fail(ErrorKind::Validation, "mixing matrix not positive semidefinite (min eigenvalue " +
                                    format_double(eig_w.eigenvalues().minCoeff()) + ")");
  }
  const Eigen::MatrixXd centred = w - Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_c(centred, Eigen::EigenvaluesOnly);
  SpectralInfo info;
  info.lambda = eig_c.eigenvalues().cwiseAbs().maxCoeff();
  info.spectral_gap = 1.0 - info.lambda;
  if (info.lambda >= 1.0 - kConnectivityTol) info.warnings.emplace_back("graph not connected");
  return info;
}

MixingMatrix MixingMatrix::from_weights(Mat weights) {
  const SpectralInfo info = spectral_quantities(weights);
  if (!info.warnings.empty()) fail(ErrorKind::Validation, "mixing matrix rejected: graph not connected");
  return MixingMatrix(std::move(weights), info.lambda);
}

MixingMatrix build_ring_mixing(int n) {
  if (n < 3) fail(ErrorKind::InvalidTopology, "ring needs at least 3 agents, got " + std::to_string(n));
  Mat w = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    w(i, i) += 0.5 + 0.5 / 3.0;
    w(i, (i + 1) % n) += 0.5 / 3.0;
    w(i, (i + n - 1) % n) += 0.5 / 3.0;
  }
  return MixingMatrix::from_weights(std::move(w));
}

MixingMatrix build_complete_mixing(int n) {
  if (n < 1) fail(ErrorKind::InvalidTopology, "complete graph needs at least 1 agent");
  return MixingMatrix::from_weights(Mat::Constant(n, n, 1.0 / static_cast<double>(n)));
}

LcaParams lca_params(double lambda) {
  if (!(lambda >= 0.0 && lambda < 1.0)) {
    fail(ErrorKind::Domain, "lca_params requires 0 <= lambda < 1, got " + format_double(lambda));
  }
  LcaParams p;
  p.eta_w = 1.0 / (1.0 + std::sqrt(1.0 - lambda * lambda));
  p.rho_w = std::sqrt(p.eta_w);
  p.c0 = 14;
  return p;
}

AugmentedPair apply_augmented(const MixingMatrix& w, double eta_w, const AugmentedPair& pair) {
  require_same_shape(pair.top, pair.bottom, "apply_augmented");
  if (pair.top.rows() != w.n()) {
    fail(ErrorKind::Dimension, "apply_augmented: pair has " + std::to_string(pair.top.rows()) +
                                   " rows, mixing matrix has n=" + std::to_string(w.n()));
  }
  AugmentedPair out;
  out.top = (1.0 + eta_w) * (w.weights() * pair.top) - eta_w * pair.bottom;
  out.bottom = pair.top;
  return out;
}

void write_mixing_csv(const std::filesystem::path& path, const Mat& weights) {
  std::ofstream os(path);
  if (!os) fail(ErrorKind::Io, "cannot write " + path.string());
  for (Eigen::Index i = 0; i < weights.rows(); ++i) {
    for (Eigen::Index j = 0; j < weights.cols(); ++j) {
      if (j) os << ',';
      os << format_double(weights(i, j));
    }
    os << '\n';
  }
}

MixingMatrix read_mixing_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorKind::Io, "cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        fail(ErrorKind::Parse, path.string() + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  const auto n = rows.size();
  if (n == 0) fail(ErrorKind::Parse, path.string() + ": empty matrix file");
  Mat w(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i].size() != n) {
      fail(ErrorKind::Parse, path.string() + ": row " + std::to_string(i + 1) + " has " +
                                 std::to_string(rows[i].size()) + " entries, expected " + std::to_string(n));
    }
    for (std::size_t j = 0; j < n; ++j) w(i, j) = rows[i][j];
  }
  return MixingMatrix::from_weights(std::move(w));
}

}  // namespace lmt
