#pragma once

#include <complex>
#include <cstdint>

#include <Eigen/Dense>

namespace ces {

// All dense matrices in the library are column-major complex doubles.
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using Complex = std::complex<double>;

// Every numerical decision (rank cutoffs, equality of operators, Hermiticity)
// goes through one of these thresholds, and every randomized routine draws
// from the seed below. Threading one context through a computation makes runs
// reproducible and keeps tolerances out of individual call sites.
struct ToleranceContext {
    // Relative singular-value cutoff: sigma is treated as zero when
    // sigma <= rank_eps * sigma_max.
    double rank_eps = 1e-9;
    // Entrywise operator equality: A == B when max|A - B| <= eq_eps * scale,
    // where scale is max(1, norms of the operands).
    double eq_eps = 1e-9;
    // Hermiticity: max|M - M^dag| <= herm_eps.
    double herm_eps = 1e-8;
    // Seed for all randomized choices (generic algebra elements, retries).
    std::uint64_t seed = 0;

    bool valid() const {
        auto ok = [](double e) { return e > 0.0 && e < 1.0; };
        return ok(rank_eps) && ok(eq_eps) && ok(herm_eps);
    }
};

}  // namespace ces
