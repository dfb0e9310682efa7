#pragma once

#include <string>
#include <vector>

namespace edl {

// K x K misclassification cost table. cost(k, i) is the cost of classifying
// a sample of true class k as class i; the diagonal is zero.
class RiskMatrix {
public:
    RiskMatrix(int k, std::vector<double> row_major);

    int k() const { return k_; }
    double cost(int true_class, int predicted) const {
        return costs_[static_cast<std::size_t>(true_class * k_ + predicted)];
    }
    const std::vector<double>& row_major() const { return costs_; }
    bool is_zero() const;

    // All-zero matrix (no-cost baseline).
    static RiskMatrix zero(int k);

    // K rows of K comma-separated non-negative decimals; rejects negative
    // entries and non-zero diagonals.
    static RiskMatrix load_csv(const std::string& path);

private:
    int k_;
    std::vector<double> costs_;
};

}  // namespace edl
