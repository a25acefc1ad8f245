#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ordinalenc/encoding.hpp"
#include "ordinalenc/metrics.hpp"
#include "ordinalenc/model.hpp"
#include "ordinalenc/synth_data.hpp"

namespace ordinalenc {

struct LrDrop {
    int epoch = 0;  // applied from the start of this (0-based) epoch on
    double factor = 0.1;
};

struct TrainConfig {
    double lr = 0.01;
    double momentum = 0.9;
    double weight_decay = 0.0002;
    int batch_size = 64;
    int epochs = 100;
    std::vector<LrDrop> lr_drops{{80, 0.1}, {90, 0.1}};
    double lambda = 0.3;
    int aux_start_epoch = 10;
    int mask_side = 4;
    int feature_channels = 32;
    std::uint64_t seed = 0;
    EncodingConfig encoding;
    bool flip_average = true;  // used for validation/test evaluation
    bool progress = false;     // one stderr line per epoch

    void validate() const;
    double lr_at(int epoch) const;
};

struct EpochRecord {
    int epoch = 0;
    double lr = 0.0;
    bool aux_active = false;
    double main_loss = 0.0;      // mean over samples
    double aux_loss = 0.0;       // mean over samples of the summed auxiliary losses
    double combined_loss = 0.0;  // main + lambda * aux
    double train_mae = 0.0;      // from the training forward passes of the epoch
    double val_mae = 0.0;        // NaN when no validation split
};

struct TrainReport {
    TrainConfig config;
    ModelDims dims;
    std::vector<EpochRecord> epochs;
    double test_mae = 0.0;            // NaN when no test split
    double test_epsilon_error = 0.0;  // NaN when no test split
    double seconds = 0.0;
};

// Serialized as a versioned JSON document.
std::string report_to_json(const TrainReport& report);

// Per-step values passed to an optional observer.
struct StepRecord {
    int epoch = 0;
    int step = 0;
    double main_loss = 0.0;
    double aux_loss = 0.0;
    double combined_loss = 0.0;
};

class TrainingDiverged : public std::runtime_error {
public:
    TrainingDiverged(const std::string& what, ModelParams last_good, TrainReport partial)
        : std::runtime_error(what), last_good_(std::move(last_good)), partial_(std::move(partial)) {}
    const ModelParams& last_good() const { return last_good_; }
    const TrainReport& partial_report() const { return partial_; }

private:
    ModelParams last_good_;
    TrainReport partial_;
};

// v = momentum * v + grad + weight_decay * param; param -= lr * v. Only the
// first `active` entries are touched (all when active == npos). Throws
// NumericInputError if a gradient is not finite.
void sgd_step(std::span<double> params, std::span<const double> grads, std::span<double> velocity, double lr,
              double momentum, double weight_decay, std::size_t active = static_cast<std::size_t>(-1));

double combined_loss(double main, std::span<const double> aux, double lambda);

struct DataSplits {
    std::span<const Sample> train;
    std::span<const Sample> validation;  // may be empty
    std::span<const Sample> test;        // may be empty
};

struct TrainResult {
    ModelParams params;
    TrainReport report;
};

using StepObserver = std::function<void(const StepRecord&)>;

// Derives the model dims from the data and config, then trains.
TrainResult train(const DataSplits& splits, const TrainConfig& cfg, const StepObserver& observer = {});

// Trains from given initial parameters.
TrainResult train_from(ModelParams initial, const DataSplits& splits, const TrainConfig& cfg,
                       const StepObserver& observer = {});

ModelDims model_dims_for(const Sample& example, const TrainConfig& cfg);

struct EvalResult {
    double mae = 0.0;
    double epsilon_error = 0.0;
    std::vector<Prediction> predictions;
};

// Main-branch predictions. With flip_average the logits of the input and its
// width-mirrored copy are averaged before decoding.
EvalResult evaluate(const ModelParams& params, std::span<const Sample> samples, const EncodingConfig& encoding,
                    bool flip_average);

// Gathers samples by index.
std::vector<Sample> gather(std::span<const Sample> samples, std::span<const std::size_t> indices);

}  // namespace ordinalenc
