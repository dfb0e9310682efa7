#include "edl/risk_matrix.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "edl/errors.hpp"

namespace edl {

RiskMatrix::RiskMatrix(int k, std::vector<double> row_major)
    : k_(k), costs_(std::move(row_major)) {
    if (k_ < 2) throw ConfigError("RiskMatrix: need K >= 2, got " + std::to_string(k_));
    if (costs_.size() != static_cast<std::size_t>(k_) * static_cast<std::size_t>(k_)) {
        throw ConfigError("RiskMatrix: got " + std::to_string(costs_.size()) +
                          " entries for K=" + std::to_string(k_));
    }
    for (int r = 0; r < k_; ++r) {
        for (int c = 0; c < k_; ++c) {
            const double v = costs_[static_cast<std::size_t>(r * k_ + c)];
            if (!std::isfinite(v) || v < 0.0) {
                throw DataError("RiskMatrix: negative or non-finite cost at (" +
                                std::to_string(r) + "," + std::to_string(c) + ")");
            }
            if (r == c && v != 0.0) {
                throw DataError("RiskMatrix: non-zero diagonal at (" + std::to_string(r) + "," +
                                std::to_string(r) + ")");
            }
        }
    }
}

bool RiskMatrix::is_zero() const {
    for (double v : costs_) {
        if (v != 0.0) return false;
    }
    return true;
}

RiskMatrix RiskMatrix::zero(int k) {
    return RiskMatrix(k, std::vector<double>(static_cast<std::size_t>(k) * k, 0.0));
}

RiskMatrix RiskMatrix::load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("risk matrix: cannot open '" + path + "'");
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t pos = 0;
                const double v = std::stod(cell, &pos);
                while (pos < cell.size() && std::isspace(static_cast<unsigned char>(cell[pos]))) {
                    ++pos;
                }
                if (pos != cell.size()) throw std::invalid_argument(cell);
                row.push_back(v);
            } catch (const std::exception&) {
                throw DataError("risk matrix '" + path + "': cannot parse cell '" + cell + "'");
            }
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DataError("risk matrix '" + path + "': empty file");
    const std::size_t k = rows.size();
    std::vector<double> flat;
    flat.reserve(k * k);
    for (const auto& row : rows) {
        if (row.size() != k) {
            throw DataError("risk matrix '" + path + "': expected " + std::to_string(k) +
                            " columns, got " + std::to_string(row.size()));
        }
        flat.insert(flat.end(), row.begin(), row.end());
    }
    return RiskMatrix(static_cast<int>(k), std::move(flat));
}

}  // namespace edl
