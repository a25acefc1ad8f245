#include "ordinalenc/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <limits>
#include <numeric>

#include "json.hpp"

#include "ordinalenc/errors.hpp"
#include "ordinalenc/loss_grad.hpp"
#include "ordinalenc/random.hpp"

namespace ordinalenc {
namespace {

constexpr int kReportVersion = 1;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

nlohmann::json nullable(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

void TrainConfig::validate() const {
    if (!(lr > 0.0)) throw InvalidConfig("lr must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidConfig("momentum must lie in [0, 1)");
    if (!(weight_decay >= 0.0)) throw InvalidConfig("weight decay must be non-negative");
    if (batch_size < 1) throw InvalidConfig("batch size must be positive");
    if (epochs < 0) throw InvalidConfig("epochs must be non-negative");
    if (!(lambda >= 0.0)) throw InvalidConfig("lambda must be non-negative");
    if (aux_start_epoch < 0) throw InvalidConfig("aux start epoch must be non-negative");
    if (mask_side < 1) throw InvalidConfig("mask side must be positive");
    if (feature_channels < 1) throw InvalidConfig("feature channels must be positive");
    for (std::size_t i = 0; i < lr_drops.size(); ++i) {
        if (lr_drops[i].epoch >= epochs && epochs > 0) throw InvalidConfig("lr drop epoch beyond the run");
        if (i > 0 && lr_drops[i].epoch <= lr_drops[i - 1].epoch) throw InvalidConfig("lr drop epochs must increase");
        if (!(lr_drops[i].factor > 0.0)) throw InvalidConfig("lr drop factor must be positive");
    }
    encoding.validate();
}

double TrainConfig::lr_at(int epoch) const {
    double rate = lr;
    for (const auto& drop : lr_drops) {
        if (epoch >= drop.epoch) rate *= drop.factor;
    }
    return rate;
}

void sgd_step(std::span<double> params, std::span<const double> grads, std::span<double> velocity, double lr,
              double momentum, double weight_decay, std::size_t active) {
    if (grads.size() != params.size() || velocity.size() != params.size()) {
        throw ContractError("sgd_step: params, grads and velocity must align");
    }
    const std::size_t n = std::min(active, params.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(grads[i])) {
            throw NumericInputError("sgd_step: non-finite gradient at parameter " + std::to_string(i));
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        velocity[i] = momentum * velocity[i] + grads[i] + weight_decay * params[i];
        params[i] -= lr * velocity[i];
    }
}

double combined_loss(double main, std::span<const double> aux, double lambda) {
    if (!(lambda >= 0.0)) throw ContractError("combined_loss: lambda must be non-negative");
    if (aux.empty()) return main;
    double total = 0.0;
    for (double a : aux) total += a;
    return main + lambda * total;
}

ModelDims model_dims_for(const Sample& example, const TrainConfig& cfg) {
    ModelDims dims;
    dims.in_channels = example.input.channels();
    dims.height = example.input.height();
    dims.width = example.input.width();
    dims.feature_channels = cfg.feature_channels;
    dims.output_dim = static_cast<int>(cfg.encoding.output_dim());
    dims.head_count = kDefaultHeadCount;
    return dims;
}

std::vector<Sample> gather(std::span<const Sample> samples, std::span<const std::size_t> indices) {
    std::vector<Sample> out;
    out.reserve(indices.size());
    for (std::size_t i : indices) {
        if (i >= samples.size()) throw ContractError("gather: index out of range");
        out.push_back(samples[i]);
    }
    return out;
}

EvalResult evaluate(const ModelParams& params, std::span<const Sample> samples, const EncodingConfig& encoding,
                    bool flip_average) {
    if (samples.empty()) throw ContractError("evaluate: empty split");
    if (static_cast<std::size_t>(params.dims().output_dim) != encoding.output_dim()) {
        throw ContractError("evaluate: model output size does not match the encoding family");
    }
    EvalResult result;
    result.predictions.reserve(samples.size());
    for (const auto& s : samples) {
        auto logits = predict_logits(params, s.input);
        if (flip_average) {
            const auto mirrored = predict_logits(params, s.input.flipped());
            for (std::size_t k = 0; k < logits.size(); ++k) logits[k] = 0.5 * (logits[k] + mirrored[k]);
        }
        result.predictions.push_back({predict_age(logits, encoding.family), s.age, s.sigma_n});
    }
    result.mae = mae(result.predictions);
    result.epsilon_error = epsilon_error(result.predictions);
    return result;
}

TrainResult train(const DataSplits& splits, const TrainConfig& cfg, const StepObserver& observer) {
    if (splits.train.empty()) throw ContractError("train: empty training split");
    cfg.validate();
    const ModelDims dims = model_dims_for(splits.train.front(), cfg);
    return train_from(init_params(derive_seed(cfg.seed, 1), dims), splits, cfg, observer);
}

TrainResult train_from(ModelParams initial, const DataSplits& splits, const TrainConfig& cfg,
                       const StepObserver& observer) {
    cfg.validate();
    if (splits.train.empty()) throw ContractError("train: empty training split");
    const ModelDims dims = initial.dims();
    if (static_cast<std::size_t>(dims.output_dim) != cfg.encoding.output_dim()) {
        throw ContractError("train: model output size does not match the encoding family");
    }
    const auto start = std::chrono::steady_clock::now();

    TrainResult result{std::move(initial), {}};
    ModelParams& params = result.params;
    TrainReport& report = result.report;
    report.config = cfg;
    report.dims = dims;
    report.test_mae = kNaN;
    report.test_epsilon_error = kNaN;

    const int aux_heads = dims.head_count - 1;
    const auto masks = default_landmark_masks_with_side(dims.height, dims.width, cfg.mask_side);
    const std::span<const Mask> mask_span(masks.data(), static_cast<std::size_t>(std::min(aux_heads, kLandmarkCount)));
    if (aux_heads > kLandmarkCount) throw ContractError("train: more auxiliary heads than landmark masks");

    std::vector<EncodedTarget> targets;
    targets.reserve(splits.train.size());
    std::vector<double> entropies;
    entropies.reserve(splits.train.size());
    for (const auto& s : splits.train) {
        targets.push_back(encode(s.age, cfg.encoding));
        entropies.push_back(target_neg_entropy(targets.back()));
    }

    std::vector<std::size_t> order(splits.train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(cfg.seed, 2));

    std::vector<double> velocity(params.values().size(), 0.0);
    ModelParams grads(dims);
    bool aux_active = false;
    std::vector<Eigen::MatrixXd> logit_grads;
    std::vector<const FeatureMap*> batch_inputs;
    BatchForward fwd;
    std::vector<Prediction> train_predictions;
    // Parameters before the most recent update; handed back on divergence.
    ModelParams last_good = params;
    auto diverged = [&](const std::string& why, int epoch, int step) {
        report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        return TrainingDiverged(why + " at epoch " + std::to_string(epoch) + " step " + std::to_string(step), last_good,
                                report);
    };

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (!aux_active && aux_heads > 0 && epoch >= cfg.aux_start_epoch) {
            for (int h = 1; h <= aux_heads; ++h) {
                clone_head(params, kMainHead, h);
                const std::size_t off = params.head_offset(h);
                std::fill(velocity.begin() + static_cast<std::ptrdiff_t>(off),
                          velocity.begin() + static_cast<std::ptrdiff_t>(off + params.head_size()), 0.0);
            }
            aux_active = true;
        }
        const std::size_t active = aux_active ? params.values().size() : params.head_offset(kMainHead) + params.head_size();
        const double lr = cfg.lr_at(epoch);
        shuffle_rng.shuffle(std::span<std::size_t>(order));

        EpochRecord record;
        record.epoch = epoch;
        record.lr = lr;
        record.aux_active = aux_active;
        train_predictions.clear();

        int step = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(cfg.batch_size), ++step) {
            const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
            const double inv_batch = 1.0 / static_cast<double>(end - begin);
            std::fill(grads.values().begin(), grads.values().end(), 0.0);
            StepRecord step_record{epoch, step, 0.0, 0.0, 0.0};

            batch_inputs.clear();
            for (std::size_t j = begin; j < end; ++j) batch_inputs.push_back(&splits.train[order[j]].input);
            forward_batch(params, batch_inputs, mask_span, aux_active, fwd);
            const int batch = fwd.batch;
            logit_grads.resize(fwd.logits.size());
            for (std::size_t br = 0; br < fwd.logits.size(); ++br) {
                logit_grads[br].resize(fwd.logits[br].rows(), batch);
            }
            try {
                for (int col = 0; col < batch; ++col) {
                    const std::size_t idx = order[begin + static_cast<std::size_t>(col)];
                    const EncodedTarget& target = targets[idx];
                    const double entropy = entropies[idx];
                    double aux_sum = 0.0;
                    for (std::size_t br = 0; br < fwd.logits.size(); ++br) {
                        const std::span<const double> logits(fwd.logits[br].col(col).data(),
                                                             static_cast<std::size_t>(fwd.logits[br].rows()));
                        const auto loss = loss_for(logits, target, entropy);
                        const double weight = (br == 0 ? 1.0 : cfg.lambda) * inv_batch;
                        auto g = logit_grads[br].col(col);
                        for (Eigen::Index k = 0; k < g.size(); ++k) g[k] = weight * loss.grad[static_cast<std::size_t>(k)];
                        if (br == 0) {
                            step_record.main_loss += loss.value * inv_batch;
                            train_predictions.push_back(
                                {predict_age(logits, cfg.encoding.family), splits.train[idx].age, splits.train[idx].sigma_n});
                        } else {
                            aux_sum += loss.value;
                        }
                    }
                    step_record.aux_loss += aux_sum * inv_batch;
                }
            } catch (const NumericInputError& err) {
                throw diverged(std::string("training diverged (") + err.what() + ")", epoch, step);
            }
            backward_batch(params, fwd, logit_grads, grads);
            step_record.combined_loss = step_record.main_loss + cfg.lambda * step_record.aux_loss;
            if (!aux_active) step_record.combined_loss = step_record.main_loss;

            if (!std::isfinite(step_record.combined_loss)) throw diverged("training diverged", epoch, step);
            last_good = params;
            try {
                sgd_step(params.values(), grads.values(), velocity, lr, cfg.momentum, cfg.weight_decay, active);
            } catch (const NumericInputError& err) {
                throw diverged(err.what(), epoch, step);
            }
            if (observer) observer(step_record);

            const double weight = static_cast<double>(end - begin) / static_cast<double>(order.size());
            record.main_loss += step_record.main_loss * weight;
            record.aux_loss += step_record.aux_loss * weight;
        }
        record.combined_loss = aux_active ? record.main_loss + cfg.lambda * record.aux_loss : record.main_loss;
        record.train_mae = mae(train_predictions);
        record.val_mae = splits.validation.empty()
                             ? kNaN
                             : evaluate(params, splits.validation, cfg.encoding, cfg.flip_average).mae;
        if (cfg.progress) {
            std::fprintf(stderr, "epoch=%d loss=%.6f main=%.6f aux=%.6f train_mae=%.4f val_mae=%.4f lr=%g\n", epoch + 1,
                         record.combined_loss, record.main_loss, record.aux_loss, record.train_mae, record.val_mae, lr);
        }
        report.epochs.push_back(record);
    }

    if (!splits.test.empty()) {
        const auto eval = evaluate(params, splits.test, cfg.encoding, cfg.flip_average);
        report.test_mae = eval.mae;
        report.test_epsilon_error = eval.epsilon_error;
    }
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

std::string report_to_json(const TrainReport& report) {
    const auto& c = report.config;
    nlohmann::json drops = nlohmann::json::array();
    for (const auto& d : c.lr_drops) drops.push_back({{"epoch", d.epoch}, {"factor", d.factor}});
    nlohmann::json epochs = nlohmann::json::array();
    for (const auto& e : report.epochs) {
        epochs.push_back({{"epoch", e.epoch},
                          {"lr", e.lr},
                          {"aux_active", e.aux_active},
                          {"main_loss", nullable(e.main_loss)},
                          {"aux_loss", nullable(e.aux_loss)},
                          {"combined_loss", nullable(e.combined_loss)},
                          {"train_mae", nullable(e.train_mae)},
                          {"val_mae", nullable(e.val_mae)}});
    }
    nlohmann::json doc = {
        {"format", "ordinalenc-train-report"},
        {"version", kReportVersion},
        {"seed", c.seed},
        {"config",
         {{"lr", c.lr},
          {"momentum", c.momentum},
          {"weight_decay", c.weight_decay},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"lr_drops", drops},
          {"lambda", c.lambda},
          {"aux_start_epoch", c.aux_start_epoch},
          {"mask_side", c.mask_side},
          {"feature_channels", c.feature_channels},
          {"flip_average", c.flip_average},
          {"encoding",
           {{"family", std::string(family_name(c.encoding.family))},
            {"max_age", c.encoding.max_age},
            {"sigma", c.encoding.sigma}}}}},
        {"dims",
         {{"in_channels", report.dims.in_channels},
          {"feature_channels", report.dims.feature_channels},
          {"height", report.dims.height},
          {"width", report.dims.width},
          {"output_dim", report.dims.output_dim},
          {"head_count", report.dims.head_count}}},
        {"epochs", epochs},
        {"test_mae", nullable(report.test_mae)},
        {"test_epsilon_error", nullable(report.test_epsilon_error)},
        {"seconds", report.seconds},
    };
    return doc.dump(2);
}

}  // namespace ordinalenc
