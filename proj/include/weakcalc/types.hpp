#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace weakcalc {

using Index = std::int64_t;
using Mask = std::vector<std::uint8_t>;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input or configuration problems (bad files, malformed parameters).
class InputError : public Error {
 public:
  using Error::Error;
};

class DegreeOverflow : public Error {
 public:
  using Error::Error;
};

class ChartMismatch : public Error {
 public:
  using Error::Error;
};

class SingularJacobian : public Error {
 public:
  using Error::Error;
};

class MetricNotSPD : public InputError {
 public:
  using InputError::InputError;
};

class MetricNotLipschitz : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class InsufficientOverlapSamples : public Error {
 public:
  using Error::Error;
};

class DisconnectedGraph : public Error {
 public:
  using Error::Error;
};

class GeodesicTooShort : public Error {
 public:
  using Error::Error;
};

class NoExtension : public Error {
 public:
  using Error::Error;
};

class SingularGram : public Error {
 public:
  using Error::Error;
};

class RankDeficientTangent : public Error {
 public:
  using Error::Error;
};

class EmptyBall : public Error {
 public:
  using Error::Error;
};

inline Mask all_set(Index n) { return Mask(static_cast<std::size_t>(n), 1); }

}  // namespace weakcalc
