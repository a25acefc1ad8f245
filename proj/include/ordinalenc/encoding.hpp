#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ordinalenc {

enum class Family { LDL, HardRank, SoftRank };

std::string_view family_name(Family family);

// Accepts "ldl", "hard", "soft" and the long forms "hard-rank"/"soft-rank".
std::optional<Family> parse_family(std::string_view name);

inline constexpr int kDefaultMaxAge = 101;

struct EncodingConfig {
    Family family = Family::SoftRank;
    int max_age = kDefaultMaxAge;  // K; ages live in [1, K]
    double sigma = 3.6;            // correlation width in years

    // Throws InvalidConfig when K < 2, sigma < 0, or sigma == 0 for LDL.
    void validate() const;

    // Number of logits a head needs for this family.
    std::size_t output_dim() const;
    // Length of the encoded target vector.
    std::size_t target_length() const;
};

struct EncodedTarget {
    Family family = Family::SoftRank;
    std::vector<double> values;
};

// Normalized Gaussian over k = 1..K centered at the age; mass outside [1, K]
// is dropped before normalizing.
EncodedTarget ldl_encode(int age, const EncodingConfig& cfg);

// K-1 indicators, element k-1 is 1 iff age > k.
EncodedTarget hard_rank_encode(int age, const EncodingConfig& cfg);

// K Gaussian CDF values, element k-1 is Phi((k - age) / sigma). sigma == 0
// gives the step limit with 0.5 at k == age.
EncodedTarget soft_rank_encode(int age, const EncodingConfig& cfg);

// Dispatches on cfg.family.
EncodedTarget encode(int age, const EncodingConfig& cfg);

// Expectation of the predicted distribution. Not rounded.
double decode_ldl(std::span<const double> probs);

int decode_hard_rank(std::span<const int> bits);

using PairProbs = std::pair<double, double>;

// Integer k whose pair is closest to a coin flip; smallest k on ties.
int decode_soft_rank(std::span<const PairProbs> pairs);

// Round half-up, for callers that need an integer age from decode_ldl.
int round_age(double age);

// Standard normal CDF.
double normal_cdf(double z);

}  // namespace ordinalenc
