#include "mea/power.hpp"

#include <cmath>

#include "mea/errors.hpp"

namespace mea {

void PowerParams::validate() const {
    if (k < 1) throw ConfigError("power: k must be >= 1");
    if (!ell.empty() && ell.size() != static_cast<std::size_t>(k)) {
        throw ConfigError("power: ell list must have one entry per experiment");
    }
    for (const int l : ell) {
        if (l < 2) throw ConfigError("power: each experiment needs at least 2 variants");
    }
    if (!(trigger_rate > 0.0 && trigger_rate <= 1.0)) {
        throw ConfigError("power: trigger rate must lie in (0,1]");
    }
    if (!(sigma2 >= 0.0)) throw ConfigError("power: sigma2 must be nonnegative");
    if (!(n_plus > 0.0)) throw ConfigError("power: N_plus must be positive");
}

double PowerParams::ell_product() const {
    double prod = 1.0;
    for (const int l : ell) prod *= static_cast<double>(l);
    return prod;
}

double factorial_variance(const PowerParams& p) {
    p.validate();
    if (p.ell.empty()) throw ConfigError("power: ell list required");
    return 2.0 * p.sigma2 * p.ell_product() / p.n_plus;
}

double mea_variance(const PowerParams& p, const std::map<std::uint32_t, double>& weights) {
    p.validate();
    if (p.ell.empty()) throw ConfigError("power: ell list required");
    const std::uint32_t full = (p.k >= 32) ? 0xFFFFFFFFu : ((1u << p.k) - 1u);

    double weight_total = 0.0;
    double acc = 0.0;
    for (const auto& [bits, w] : weights) {
        if (bits == 0 || (bits & ~full) != 0) {
            throw ConfigError("power: weight on an invalid stratum");
        }
        if (w < 0.0) throw WeightSumError("power: negative stratum weight");
        weight_total += w;
        double cells = 1.0;
        for (int j = 0; j < p.k; ++j) {
            if ((bits >> j) & 1u) cells *= static_cast<double>(p.ell[j]);
        }
        double sigma_s2 = p.sigma2;
        if (p.stratum_variances) {
            const auto it = p.stratum_variances->find(bits);
            if (it != p.stratum_variances->end()) sigma_s2 = it->second;
        }
        acc += w * sigma_s2 * cells;
    }
    if (std::fabs(weight_total - 1.0) > 1e-9) {
        throw WeightSumError("power: stratum weights must sum to 1");
    }
    return 2.0 * acc / p.n_plus;
}

std::map<std::uint32_t, double> independent_trigger_weights(int k, double r) {
    if (k < 1 || k > 30) throw ConfigError("power: k must lie in [1, 30] for enumeration");
    if (!(r > 0.0 && r <= 1.0)) throw ConfigError("power: trigger rate must lie in (0,1]");
    const double denom = 1.0 - std::pow(1.0 - r, k);
    std::map<std::uint32_t, double> weights;
    for (std::uint32_t bits = 1; bits < (1u << k); ++bits) {
        int d = 0;
        for (int j = 0; j < k; ++j) d += (bits >> j) & 1u;
        weights[bits] = std::pow(r, d) * std::pow(1.0 - r, k - d) / denom;
    }
    return weights;
}

double variance_ratio(int k, int ell, double r) {
    if (k < 1) throw ConfigError("power: k must be >= 1");
    if (ell < 2) throw ConfigError("power: ell must be >= 2");
    if (!(r > 0.0 && r <= 1.0)) throw ConfigError("power: trigger rate must lie in (0,1]");

    const double a = 1.0 + (ell - 1.0) * r;  // a <= ell always
    const double b = 1.0 - r;
    // ratio = (a^k - b^k) / (ell^k (1 - b^k)); ell^k can overflow for
    // large k, so fold it into exp(k (log a - log ell)).
    const double scale = std::exp(static_cast<double>(k) * (std::log(a) - std::log(ell)));
    const double bk = std::pow(b, k);
    const double b_over_a_k = std::pow(b / a, k);
    return scale * (1.0 - b_over_a_k) / (1.0 - bk);
}

double binary_ratio(int k) {
    if (k < 1) throw ConfigError("power: k must be >= 1");
    // (3^k - 1) / (2^k (2^k - 1)) in log space for large k
    const double log_num = static_cast<double>(k) * std::log(3.0) +
                           std::log1p(-std::pow(3.0, -k));
    const double log_den = static_cast<double>(k) * 2.0 * std::log(2.0) +
                           std::log1p(-std::pow(2.0, -k));
    return std::exp(log_num - log_den);
}

}  // namespace mea
