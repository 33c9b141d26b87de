#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <complex>
#include <stdexcept>
#include <string>

namespace tfha {

using Real = double;
using Index = Eigen::Index;
using Complex = std::complex<Real>;

using Vector = Eigen::VectorXd;
using RealMatrix = Eigen::MatrixXd;
using ComplexVector = Eigen::VectorXcd;
using ComplexMatrix = Eigen::MatrixXcd;
using SparseMatrix = Eigen::SparseMatrix<Real>;
using SparseComplex = Eigen::SparseMatrix<Complex>;
using Triplet = Eigen::Triplet<Real>;
using TripletC = Eigen::Triplet<Complex>;

inline constexpr Real kPi = 3.141592653589793238462643383279502884;

/// Base class for all errors thrown by the engine.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class ShapeMismatch : public Error {
public:
    using Error::Error;
};

class NonFiniteState : public Error {
public:
    using Error::Error;
};

} // namespace tfha
