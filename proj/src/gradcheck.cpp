#include "ordinalenc/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "ordinalenc/errors.hpp"
#include "ordinalenc/loss_grad.hpp"
#include "ordinalenc/model.hpp"
#include "ordinalenc/random.hpp"

namespace ordinalenc {
namespace {

EncodedTarget random_target(Family family, int max_age, Rng& rng) {
    EncodingConfig cfg{family, max_age, rng.uniform(0.4, 4.0)};
    return encode(static_cast<int>(rng.uniform_int(1, max_age)), cfg);
}

std::string suite_name(const char* prefix, Family family, bool aux) {
    std::string name = std::string(prefix) + "/" + std::string(family_name(family));
    if (aux) name += "+aux";
    return name;
}

struct BranchLoss {
    double value = 0.0;
    std::vector<std::vector<double>> logit_grads;
};

BranchLoss branch_losses(const ForwardTrace& trace, const EncodedTarget& target, double lambda) {
    BranchLoss out;
    for (std::size_t br = 0; br < trace.logits.size(); ++br) {
        auto loss = loss_for(trace.logits[br], target);
        const double weight = br == 0 ? 1.0 : lambda;
        out.value += weight * loss.value;
        for (double& g : loss.grad) g *= weight;
        out.logit_grads.push_back(std::move(loss.grad));
    }
    return out;
}

std::vector<bool> relu_pattern(const ForwardTrace& trace) {
    std::vector<bool> on(trace.pre_activation.size());
    for (std::size_t i = 0; i < on.size(); ++i) on[i] = trace.pre_activation[i] > 0.0;
    return on;
}

}  // namespace

double gradient_error(double analytic, double numeric, double absolute_floor) {
    const double scale = std::max(std::abs(analytic), std::abs(numeric));
    const double diff = std::abs(analytic - numeric);
    if (scale < absolute_floor) return diff <= absolute_floor ? 0.0 : diff / absolute_floor;
    return diff / scale;
}

GradCheckResult check_loss_gradients(Family family, const GradCheckOptions& options) {
    if (options.trials < 1) throw ContractError("gradcheck: trials must be positive");
    Rng rng(derive_seed(options.seed, 100 + static_cast<std::uint64_t>(family)));
    GradCheckResult result{suite_name("loss", family, false), options.trials};
    for (int t = 0; t < options.trials; ++t) {
        const int max_age = static_cast<int>(rng.uniform_int(2, 30));
        const auto target = random_target(family, max_age, rng);
        const EncodingConfig cfg{family, max_age, 1.0};
        std::vector<double> logits(cfg.output_dim());
        for (double& o : logits) o = 2.0 * rng.normal();

        auto analytic = loss_for(logits, target).grad;
        if (options.perturb) analytic[0] += 1e-3 + 0.01 * std::abs(analytic[0]);
        for (std::size_t i = 0; i < logits.size(); ++i) {
            const double saved = logits[i];
            logits[i] = saved + options.step;
            const double up = loss_for(logits, target).value;
            logits[i] = saved - options.step;
            const double down = loss_for(logits, target).value;
            logits[i] = saved;
            const double numeric = (up - down) / (2.0 * options.step);
            result.worst_error = std::max(result.worst_error, gradient_error(analytic[i], numeric, options.absolute_floor));
            ++result.compared;
        }
    }
    result.passed = result.worst_error <= options.threshold;
    return result;
}

GradCheckResult check_model_gradients(Family family, bool with_aux, const GradCheckOptions& options) {
    if (options.trials < 1) throw ContractError("gradcheck: trials must be positive");
    Rng rng(derive_seed(options.seed, 200 + 2 * static_cast<std::uint64_t>(family) + (with_aux ? 1 : 0)));
    GradCheckResult result{suite_name("model", family, with_aux), options.trials};
    for (int t = 0; t < options.trials; ++t) {
        const int max_age = static_cast<int>(rng.uniform_int(3, 10));
        const EncodingConfig cfg{family, max_age, 1.0};
        ModelDims dims;
        dims.in_channels = static_cast<int>(rng.uniform_int(1, 4));
        dims.feature_channels = static_cast<int>(rng.uniform_int(2, 5));
        dims.height = static_cast<int>(rng.uniform_int(4, 6));
        dims.width = static_cast<int>(rng.uniform_int(4, 6));
        dims.output_dim = static_cast<int>(cfg.output_dim());
        dims.head_count = kDefaultHeadCount;
        ModelParams params = init_params(rng.next_u64(), dims);
        // Random heads and biases so every branch differs.
        for (double& v : params.values()) v += 0.3 * rng.normal();

        FeatureMap input(dims.in_channels, dims.height, dims.width);
        for (double& v : input.data()) v = rng.normal();
        const auto masks = default_landmark_masks_with_side(dims.height, dims.width, 2);
        const auto target = random_target(family, max_age, rng);
        const double lambda = rng.uniform(0.1, 1.0);

        const auto trace = forward(params, input, masks, with_aux);
        const auto base = branch_losses(trace, target, lambda);
        ModelParams analytic = backward(params, trace, base.logit_grads);
        if (options.perturb) analytic.values()[0] += 1e-3 + 0.01 * std::abs(analytic.values()[0]);
        const auto pattern = relu_pattern(trace);

        auto values = params.values();
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double saved = values[i];
            values[i] = saved + options.step;
            const auto up_trace = forward(params, input, masks, with_aux);
            values[i] = saved - options.step;
            const auto down_trace = forward(params, input, masks, with_aux);
            values[i] = saved;
            if (relu_pattern(up_trace) != pattern || relu_pattern(down_trace) != pattern) {
                ++result.skipped;
                continue;
            }
            const double up = branch_losses(up_trace, target, lambda).value;
            const double down = branch_losses(down_trace, target, lambda).value;
            const double numeric = (up - down) / (2.0 * options.step);
            result.worst_error =
                std::max(result.worst_error, gradient_error(analytic.values()[i], numeric, options.absolute_floor));
            ++result.compared;
        }
    }
    result.passed = result.worst_error <= options.threshold;
    return result;
}

std::vector<GradCheckResult> run_gradcheck(const GradCheckOptions& options, std::optional<Family> only) {
    std::vector<GradCheckResult> results;
    for (Family f : {Family::LDL, Family::HardRank, Family::SoftRank}) {
        if (only && *only != f) continue;
        results.push_back(check_loss_gradients(f, options));
        results.push_back(check_model_gradients(f, false, options));
        results.push_back(check_model_gradients(f, true, options));
    }
    return results;
}

}  // namespace ordinalenc
