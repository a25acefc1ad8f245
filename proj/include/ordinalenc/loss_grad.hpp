#pragma once

#include <span>
#include <vector>

#include "ordinalenc/encoding.hpp"

namespace ordinalenc {

// Floor applied inside log(p_hat) so dead softmax outputs give a finite loss.
inline constexpr double kLogFloor = 1e-12;

struct LossValue {
    double value = 0.0;
    std::vector<double> grad;  // d value / d logits
};

// Max-subtracted softmax. Throws NumericInputError on NaN/Inf.
std::vector<double> softmax(std::span<const double> logits);

// Per-sample KL(p || softmax(o)). grad = softmax(o) - p.
LossValue ldl_loss(std::span<const double> logits, const EncodedTarget& target);

// Mean over the K two-way classifiers of KL((p, 1-p) || pair softmax).
// Logit 2k is the "not older than k+1" side, 2k+1 the "older" side.
LossValue soft_rank_loss(std::span<const double> logits, const EncodedTarget& target);

// Mean over the K-1 two-way classifiers of -ln p_hat[target bit].
LossValue hard_rank_loss(std::span<const double> logits, const EncodedTarget& target);

// Dispatches on target.family.
LossValue loss_for(std::span<const double> logits, const EncodedTarget& target);

// Sum of t ln t over the target's (pair) entries; the constant part of the KL
// losses. Zero for HardRank.
double target_neg_entropy(const EncodedTarget& target);

// Overloads taking a precomputed target_neg_entropy(target).
LossValue ldl_loss(std::span<const double> logits, const EncodedTarget& target, double neg_entropy);
LossValue soft_rank_loss(std::span<const double> logits, const EncodedTarget& target, double neg_entropy);
LossValue loss_for(std::span<const double> logits, const EncodedTarget& target, double neg_entropy);

// Bit k is 1 iff the "older" logit of pair k is strictly larger.
std::vector<int> hard_rank_predict_bits(std::span<const double> logits);

// Per-pair softmax of a 2K logit block, as (p_hat_k0, p_hat_k1).
std::vector<PairProbs> pair_softmax(std::span<const double> logits);

// Decodes raw logits of the given family to an age. LDL returns the
// (unrounded) expectation; the ranking families return integers.
double predict_age(std::span<const double> logits, Family family);

}  // namespace ordinalenc
