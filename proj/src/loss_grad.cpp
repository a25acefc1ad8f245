#include "ordinalenc/loss_grad.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ordinalenc/errors.hpp"

namespace ordinalenc {
namespace {

const double kLogFloorLn = std::log(kLogFloor);

void check_finite(std::span<const double> logits) {
    for (double v : logits) {
        if (!std::isfinite(v)) throw NumericInputError("non-finite logit");
    }
}

void check_length(std::span<const double> logits, std::size_t expected, const char* what) {
    if (logits.size() != expected) {
        throw ContractError(std::string(what) + ": expected " + std::to_string(expected) +
                            " logits, got " + std::to_string(logits.size()));
    }
}

// log softmax of a two-logit group, stable for large gaps.
std::pair<double, double> pair_log_softmax(double a, double b) {
    // log q1 = -softplus(a - b), log q0 = -softplus(b - a)
    const double d = b - a;
    const double tail = std::log1p(std::exp(-std::abs(d)));
    return {-(std::max(d, 0.0) + tail), -(std::max(-d, 0.0) + tail)};
}

double floored(double log_p) { return std::max(log_p, kLogFloorLn); }

double xlogx(double p) { return p > 0.0 ? p * std::log(p) : 0.0; }

// Sum over pairs of KL((t, 1-t) || pair softmax); writes the unscaled
// gradient q - t into grad. `t` holds the class-0 targets.
double pairwise_kl(std::span<const double> logits, std::span<const double> class0_targets, double neg_entropy,
                   double scale, std::vector<double>& grad) {
    double cross = 0.0;
    for (std::size_t k = 0; k < class0_targets.size(); ++k) {
        const double a = logits[2 * k];
        const double b = logits[2 * k + 1];
        const double d = b - a;
        const double e = std::exp(-std::abs(d));
        const double tail = std::log1p(e);
        const double log_q0 = -(std::max(d, 0.0) + tail);
        const double log_q1 = -(std::max(-d, 0.0) + tail);
        // q1 = sigmoid(d) without a second exp.
        const double q1 = d >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
        const double q0 = 1.0 - q1;
        const double t0 = class0_targets[k];
        const double t1 = 1.0 - t0;
        if (t0 > 0.0) cross += t0 * floored(log_q0);
        if (t1 > 0.0) cross += t1 * floored(log_q1);
        grad[2 * k] = scale * (q0 - t0);
        grad[2 * k + 1] = scale * (q1 - t1);
    }
    return neg_entropy - cross;
}

}  // namespace

std::vector<double> softmax(std::span<const double> logits) {
    check_finite(logits);
    std::vector<double> out(logits.size());
    if (logits.empty()) return out;
    const double m = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - m);
        total += out[i];
    }
    for (double& v : out) v /= total;
    return out;
}

LossValue ldl_loss(std::span<const double> logits, const EncodedTarget& target) {
    return ldl_loss(logits, target, target_neg_entropy(target));
}

LossValue soft_rank_loss(std::span<const double> logits, const EncodedTarget& target) {
    return soft_rank_loss(logits, target, target_neg_entropy(target));
}

LossValue soft_rank_loss(std::span<const double> logits, const EncodedTarget& target, double neg_entropy) {
    if (target.family != Family::SoftRank) throw ContractError("soft_rank_loss: target is not SoftRank");
    const std::size_t pairs = target.values.size();
    check_length(logits, 2 * pairs, "soft_rank_loss");
    check_finite(logits);

    const double scale = 1.0 / static_cast<double>(pairs);
    LossValue out{0.0, std::vector<double>(logits.size())};
    out.value = scale * pairwise_kl(logits, target.values, neg_entropy, scale, out.grad);
    return out;
}

LossValue hard_rank_loss(std::span<const double> logits, const EncodedTarget& target) {
    if (target.family != Family::HardRank) throw ContractError("hard_rank_loss: target is not HardRank");
    const std::size_t pairs = target.values.size();
    check_length(logits, 2 * pairs, "hard_rank_loss");
    check_finite(logits);

    // "Older" is class 1, so the class-0 target is 1 - v.
    std::vector<double> class0(pairs);
    for (std::size_t k = 0; k < pairs; ++k) class0[k] = 1.0 - target.values[k];
    const double scale = 1.0 / static_cast<double>(pairs);
    LossValue out{0.0, std::vector<double>(logits.size())};
    out.value = scale * pairwise_kl(logits, class0, 0.0, scale, out.grad);
    return out;
}

double target_neg_entropy(const EncodedTarget& target) {
    double total = 0.0;
    for (double p : target.values) {
        total += xlogx(p);
        if (target.family == Family::SoftRank) total += xlogx(1.0 - p);
    }
    return target.family == Family::HardRank ? 0.0 : total;
}

LossValue ldl_loss(std::span<const double> logits, const EncodedTarget& target, double neg_entropy) {
    if (target.family != Family::LDL) throw ContractError("ldl_loss: target is not LDL");
    check_length(logits, target.values.size(), "ldl_loss");
    check_finite(logits);

    const double m = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    for (double o : logits) total += std::exp(o - m);
    const double lse = m + std::log(total);

    LossValue out{0.0, std::vector<double>(logits.size())};
    double cross = 0.0;
    for (std::size_t k = 0; k < logits.size(); ++k) {
        const double log_q = logits[k] - lse;
        const double p = target.values[k];
        if (p > 0.0) cross += p * floored(log_q);
        out.grad[k] = std::exp(log_q) - p;
    }
    out.value = neg_entropy - cross;
    return out;
}

LossValue loss_for(std::span<const double> logits, const EncodedTarget& target, double neg_entropy) {
    switch (target.family) {
        case Family::LDL:
            return ldl_loss(logits, target, neg_entropy);
        case Family::HardRank:
            return hard_rank_loss(logits, target);
        case Family::SoftRank:
            return soft_rank_loss(logits, target, neg_entropy);
    }
    throw ContractError("unknown family");
}

LossValue loss_for(std::span<const double> logits, const EncodedTarget& target) {
    switch (target.family) {
        case Family::LDL:
            return ldl_loss(logits, target);
        case Family::HardRank:
            return hard_rank_loss(logits, target);
        case Family::SoftRank:
            return soft_rank_loss(logits, target);
    }
    throw ContractError("unknown family");
}

std::vector<int> hard_rank_predict_bits(std::span<const double> logits) {
    if (logits.size() % 2 != 0) throw ContractError("hard_rank_predict_bits: odd logit count");
    std::vector<int> bits(logits.size() / 2);
    for (std::size_t k = 0; k < bits.size(); ++k) bits[k] = logits[2 * k + 1] > logits[2 * k] ? 1 : 0;
    return bits;
}

std::vector<PairProbs> pair_softmax(std::span<const double> logits) {
    if (logits.size() % 2 != 0) throw ContractError("pair_softmax: odd logit count");
    check_finite(logits);
    std::vector<PairProbs> out(logits.size() / 2);
    for (std::size_t k = 0; k < out.size(); ++k) {
        const auto [lq0, lq1] = pair_log_softmax(logits[2 * k], logits[2 * k + 1]);
        out[k] = {std::exp(lq0), std::exp(lq1)};
    }
    return out;
}

double predict_age(std::span<const double> logits, Family family) {
    switch (family) {
        case Family::LDL: {
            const auto probs = softmax(logits);
            return decode_ldl(probs);
        }
        case Family::HardRank: {
            const auto bits = hard_rank_predict_bits(logits);
            return decode_hard_rank(bits);
        }
        case Family::SoftRank: {
            const auto pairs = pair_softmax(logits);
            return decode_soft_rank(pairs);
        }
    }
    throw ContractError("unknown family");
}

}  // namespace ordinalenc
