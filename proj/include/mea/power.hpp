#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

namespace mea {

// Inputs for the closed-form variance comparison between the weighted
// overlap estimator and a coordinated factorial design.
struct PowerParams {
    int k = 1;                      // number of experiments
    std::vector<int> ell;           // variants per experiment, each >= 2
    double trigger_rate = 1.0;      // uniform independent rate, in (0, 1]
    double sigma2 = 1.0;            // within-cell variance
    double n_plus = 1.0;            // triggered population size
    std::optional<std::map<std::uint32_t, double>> stratum_variances;

    void validate() const;  // throws ConfigError
    double ell_product() const;
};

// Var_fac = 2 * sigma^2 * prod(ell_j) / N_plus.
double factorial_variance(const PowerParams& p);

// Var = (2/N_plus) * sum_{s != 0} w_s * sigma_s^2 * prod_{j: s_j=1} ell_j.
// Uses stratum_variances where supplied, sigma2 elsewhere. Weights must
// cover nonzero strata and sum to 1 (WeightSumError otherwise).
double mea_variance(const PowerParams& p, const std::map<std::uint32_t, double>& weights);

// Weights of the nonzero strata under independent triggering at uniform
// rate r: w_s = r^d(s) (1-r)^(k-d(s)) / (1 - (1-r)^k).
std::map<std::uint32_t, double> independent_trigger_weights(int k, double r);

// Closed form for uniform ell and independent uniform trigger rate:
//   ((1+(ell-1)r)^k - (1-r)^k) / (ell^k (1 - (1-r)^k)).
// Evaluated in log space so k up to 64 stays finite.
double variance_ratio(int k, int ell, double r);

// Binary special case (ell = 2, r = 1/2): (3^k - 1) / (2^k (2^k - 1)).
double binary_ratio(int k);

}  // namespace mea
