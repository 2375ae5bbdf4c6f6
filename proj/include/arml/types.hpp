#ifndef ARML_TYPES_HPP
#define ARML_TYPES_HPP

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace arml {

using Index = Eigen::Index;

/// Row-major so that each instance (row) is contiguous.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using VectorRef = Eigen::Ref<const Vector>;

/// Raised for malformed input files; carries the 1-based line number when known.
class parse_error : public std::runtime_error {
public:
    parse_error(const std::string &what, std::size_t line)
        : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace arml

#endif  // ARML_TYPES_HPP
