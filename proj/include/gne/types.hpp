#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace gne {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

// Runtime failure of a numerical routine (non-finite values, solver budget
// exhausted, broken precondition).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input: dimension mismatch, invalid configuration field.
class ValidationError : public Error {
 public:
  using Error::Error;
};

inline bool all_finite(const Eigen::Ref<const Vec>& v) { return v.allFinite(); }

}  // namespace gne
