#include "lmt/common.hpp"

#include <cmath>
#include <cstdio>

namespace lmt {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidTopology: return "invalid-topology";
    case ErrorKind::Validation: return "validation";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Dimension: return "dimension";
    case ErrorKind::Configuration: return "configuration";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::UnsupportedDataset: return "unsupported-dataset";
    case ErrorKind::Parameter: return "parameter";
    case ErrorKind::UnavailableMetric: return "unavailable-metric";
    case ErrorKind::Io: return "io";
    case ErrorKind::Runtime: return "runtime";
  }
  return "unknown";
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace lmt
