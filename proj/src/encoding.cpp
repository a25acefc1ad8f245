#include "ordinalenc/encoding.hpp"

#include <cmath>
#include <numbers>

#include "ordinalenc/errors.hpp"

namespace ordinalenc {
namespace {

void check_age(int age, const EncodingConfig& cfg) {
    if (age < 1 || age > cfg.max_age) {
        throw ContractError("age " + std::to_string(age) + " outside [1, " +
                            std::to_string(cfg.max_age) + "]");
    }
}

void check_family(const EncodingConfig& cfg, Family expected) {
    if (cfg.family != expected) {
        throw InvalidConfig("encoder called with a " + std::string(family_name(cfg.family)) +
                            " config");
    }
}

}  // namespace

std::string_view family_name(Family family) {
    switch (family) {
        case Family::LDL:
            return "ldl";
        case Family::HardRank:
            return "hard";
        case Family::SoftRank:
            return "soft";
    }
    return "unknown";
}

std::optional<Family> parse_family(std::string_view name) {
    if (name == "ldl") return Family::LDL;
    if (name == "hard" || name == "hard-rank" || name == "hardrank") return Family::HardRank;
    if (name == "soft" || name == "soft-rank" || name == "softrank") return Family::SoftRank;
    return std::nullopt;
}

void EncodingConfig::validate() const {
    if (max_age < 2) throw InvalidConfig("max age must be at least 2");
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
        throw InvalidConfig("sigma must be a finite non-negative number");
    }
    if (family == Family::LDL && sigma == 0.0) {
        throw InvalidConfig("LDL needs sigma > 0 (the Gaussian degenerates at 0)");
    }
}

std::size_t EncodingConfig::output_dim() const {
    const auto k = static_cast<std::size_t>(max_age);
    switch (family) {
        case Family::LDL:
            return k;
        case Family::HardRank:
            return 2 * (k - 1);
        case Family::SoftRank:
            return 2 * k;
    }
    return 0;
}

std::size_t EncodingConfig::target_length() const {
    const auto k = static_cast<std::size_t>(max_age);
    return family == Family::HardRank ? k - 1 : k;
}

double normal_cdf(double z) { return 0.5 * (1.0 + std::erf(z / std::numbers::sqrt2)); }

EncodedTarget ldl_encode(int age, const EncodingConfig& cfg) {
    check_family(cfg, Family::LDL);
    cfg.validate();
    check_age(age, cfg);

    // The 1/(sqrt(2 pi) sigma) prefactor cancels in the normalization.
    EncodedTarget target{Family::LDL, std::vector<double>(static_cast<std::size_t>(cfg.max_age))};
    double total = 0.0;
    for (int k = 1; k <= cfg.max_age; ++k) {
        const double d = (k - age) / cfg.sigma;
        const double density = std::exp(-0.5 * d * d);
        target.values[static_cast<std::size_t>(k - 1)] = density;
        total += density;
    }
    for (double& v : target.values) v /= total;
    return target;
}

EncodedTarget hard_rank_encode(int age, const EncodingConfig& cfg) {
    check_family(cfg, Family::HardRank);
    cfg.validate();
    check_age(age, cfg);

    EncodedTarget target{Family::HardRank, std::vector<double>(static_cast<std::size_t>(cfg.max_age - 1))};
    for (int k = 1; k < cfg.max_age; ++k) {
        target.values[static_cast<std::size_t>(k - 1)] = age > k ? 1.0 : 0.0;
    }
    return target;
}

EncodedTarget soft_rank_encode(int age, const EncodingConfig& cfg) {
    check_family(cfg, Family::SoftRank);
    cfg.validate();
    check_age(age, cfg);

    EncodedTarget target{Family::SoftRank, std::vector<double>(static_cast<std::size_t>(cfg.max_age))};
    for (int k = 1; k <= cfg.max_age; ++k) {
        double p;
        if (k == age) {
            p = 0.5;
        } else if (cfg.sigma == 0.0) {
            p = k < age ? 0.0 : 1.0;
        } else {
            p = normal_cdf((k - age) / cfg.sigma);
        }
        target.values[static_cast<std::size_t>(k - 1)] = p;
    }
    return target;
}

EncodedTarget encode(int age, const EncodingConfig& cfg) {
    switch (cfg.family) {
        case Family::LDL:
            return ldl_encode(age, cfg);
        case Family::HardRank:
            return hard_rank_encode(age, cfg);
        case Family::SoftRank:
            return soft_rank_encode(age, cfg);
    }
    throw InvalidConfig("unknown encoding family");
}

double decode_ldl(std::span<const double> probs) {
    if (probs.empty()) throw ContractError("decode_ldl: empty distribution");
    double total = 0.0;
    double expectation = 0.0;
    for (std::size_t k = 0; k < probs.size(); ++k) {
        if (!(probs[k] >= 0.0)) throw NormalizationError("decode_ldl: negative or NaN probability");
        total += probs[k];
        expectation += static_cast<double>(k + 1) * probs[k];
    }
    if (std::abs(total - 1.0) > 1e-6) {
        throw NormalizationError("decode_ldl: probabilities sum to " + std::to_string(total));
    }
    return expectation;
}

int decode_hard_rank(std::span<const int> bits) {
    int age = 1;
    for (int b : bits) {
        if (b != 0 && b != 1) throw ContractError("decode_hard_rank: non-binary element");
        age += b;
    }
    return age;
}

int decode_soft_rank(std::span<const PairProbs> pairs) {
    if (pairs.empty()) throw ContractError("decode_soft_rank: no classifiers");
    std::size_t best = 0;
    double best_gap = std::abs(pairs[0].first - pairs[0].second);
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const auto [p0, p1] = pairs[k];
        if (std::abs(p0 + p1 - 1.0) > 1e-6) {
            throw NormalizationError("decode_soft_rank: pair " + std::to_string(k + 1) +
                                     " does not sum to 1");
        }
        const double gap = std::abs(p0 - p1);
        if (gap < best_gap) {
            best_gap = gap;
            best = k;
        }
    }
    return static_cast<int>(best) + 1;
}

int round_age(double age) { return static_cast<int>(std::floor(age + 0.5)); }

}  // namespace ordinalenc
