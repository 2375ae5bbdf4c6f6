#include "arml/metric.hpp"

#include <fmt/format.h>

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace arml {

MetricFactor::MetricFactor(Matrix factor) : factor_(std::move(factor)) {
    if (factor_.rows() < 1 || factor_.cols() < 1) throw std::invalid_argument("metric factor must be non-empty");
    if (!factor_.allFinite()) throw std::invalid_argument("metric factor has non-finite entries");
    matrix_ = factor_.transpose() * factor_;
}

MetricFactor MetricFactor::identity(Index dim) { return MetricFactor(Matrix::Identity(dim, dim)); }

double mahalanobis_distance(const MetricFactor &metric, const VectorRef &x, const VectorRef &x_prime) {
    if (x.size() != metric.dim() || x_prime.size() != metric.dim()) {
        throw std::invalid_argument(
            fmt::format("dimension mismatch: metric {} vs {} and {}", metric.dim(), x.size(), x_prime.size()));
    }
    const Vector diff = x - x_prime;
    return std::max(0.0, diff.dot(metric.matrix() * diff));
}

void save_metric(std::ostream &out, const MetricFactor &metric) {
    const Matrix &g = metric.factor();
    out << g.rows() << ' ' << g.cols() << '\n';
    std::string line;
    for (Index r = 0; r < g.rows(); ++r) {
        line.clear();
        for (Index c = 0; c < g.cols(); ++c) {
            if (c > 0) line += ' ';
            line += fmt::format("{:.17g}", g(r, c));
        }
        line += '\n';
        out << line;
    }
}

void save_metric(const std::filesystem::path &path, const MetricFactor &metric) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    save_metric(out, metric);
}

MetricFactor load_metric(std::istream &in) {
    std::string line;
    std::size_t line_no = 0;
    auto next_line = [&]() -> bool {
        while (std::getline(in, line)) {
            ++line_no;
            if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
        }
        return false;
    };
    if (!next_line()) throw parse_error("empty metric file", 0);
    long long rows = 0, cols = 0;
    {
        std::istringstream header(line);
        std::string extra;
        if (!(header >> rows >> cols) || (header >> extra) || rows < 1 || cols < 1) {
            throw parse_error("metric header must be `rows cols`", line_no);
        }
    }
    Matrix g(rows, cols);
    for (long long r = 0; r < rows; ++r) {
        if (!next_line()) {
            throw parse_error(fmt::format("header declares {} rows but file has {}", rows, r), line_no);
        }
        std::istringstream row(line);
        for (long long c = 0; c < cols; ++c) {
            std::string token;
            if (!(row >> token)) throw parse_error(fmt::format("row has fewer than {} values", cols), line_no);
            try {
                std::size_t used = 0;
                g(r, c) = std::stod(token, &used);
                if (used != token.size()) throw std::invalid_argument(token);
            } catch (const std::exception &) {
                throw parse_error("non-numeric metric entry '" + token + "'", line_no);
            }
        }
        std::string extra;
        if (row >> extra) throw parse_error(fmt::format("row has more than {} values", cols), line_no);
    }
    if (next_line()) throw parse_error(fmt::format("header declares {} rows but file has more", rows), line_no);
    return MetricFactor(std::move(g));
}

MetricFactor load_metric(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    try {
        return load_metric(in);
    } catch (const parse_error &e) {
        throw parse_error(path.string() + ": " + e.what(), e.line());
    }
}

}  // namespace arml
