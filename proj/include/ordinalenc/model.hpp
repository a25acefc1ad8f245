#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "ordinalenc/maskout.hpp"

namespace ordinalenc {

inline constexpr int kMainHead = 0;
inline constexpr int kDefaultHeadCount = 1 + kLandmarkCount;

struct ModelDims {
    int in_channels = 8;    // C_in of the raw input map
    int feature_channels = 32;  // C_out of the backbone
    int height = 7;
    int width = 7;
    int output_dim = 202;   // D, shared by all heads
    int head_count = kDefaultHeadCount;

    void validate() const;
    std::size_t parameter_count() const;
    bool operator==(const ModelDims&) const = default;
};

// All parameters in one flat buffer, laid out as: backbone weight (C_out x C_in,
// row-major), backbone bias (C_out), then for each head in index order its
// weight (D x C_out, row-major) followed by its bias (D). The same layout is
// used for gradients and for the checkpoint payload.
class ModelParams {
public:
    ModelParams() = default;
    explicit ModelParams(const ModelDims& dims);  // zero-filled

    const ModelDims& dims() const { return dims_; }

    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }

    std::span<double> backbone_weight();
    std::span<const double> backbone_weight() const;
    std::span<double> backbone_bias();
    std::span<const double> backbone_bias() const;
    std::span<double> head_weight(int head);
    std::span<const double> head_weight(int head) const;
    std::span<double> head_bias(int head);
    std::span<const double> head_bias(int head) const;

    // Offset and length of one head's (weight, bias) block in values().
    std::size_t head_offset(int head) const;
    std::size_t head_size() const;

    bool operator==(const ModelParams&) const = default;

private:
    void check_head(int head) const;

    ModelDims dims_;
    std::vector<double> values_;
};

// Glorot-style uniform(-a, a), a = sqrt(6 / (fan_in + fan_out)), on every
// weight matrix; biases start at zero. Deterministic per seed.
ModelParams init_params(std::uint64_t seed, const ModelDims& dims);

// Copies head `from` onto head `to`.
void clone_head(ModelParams& params, int from, int to);

struct ForwardTrace {
    FeatureMap input;
    std::vector<double> pre_activation;  // C_out x cells
    FeatureMap features;                 // ReLU(pre_activation)
    Eigen::MatrixXd branch_masks;        // branches x cells, row 0 all ones
    std::vector<std::vector<double>> pooled;       // per active branch, C_out
    std::vector<std::vector<double>> logits;       // per active branch, D
    bool aux_active = false;
};

// Backbone per cell with ReLU, then GAP and a linear head per branch. Branch 0
// sees the full map; branch i sees the map under masks[i-1]. Auxiliary branches
// run only when aux_active is set.
ForwardTrace forward(const ModelParams& params, const FeatureMap& input, std::span<const Mask> masks,
                     bool aux_active);

// Main-branch logits only.
std::vector<double> predict_logits(const ModelParams& params, const FeatureMap& input);

// Exact parameter gradients given per-branch logit gradients (one per entry in
// trace.logits). Backbone gradients accumulate over every active branch.
ModelParams backward(const ModelParams& params, const ForwardTrace& trace,
                     std::span<const std::vector<double>> logit_grads);

// Same, adding into `grads` (which must have the params' dims).
void backward_accumulate(const ModelParams& params, const ForwardTrace& trace,
                         std::span<const std::vector<double>> logit_grads, ModelParams& grads);

// Mini-batch form of forward/backward used by the trainer. Produces the same
// logits and gradients as the per-sample functions (up to summation order).
struct BatchForward {
    int batch = 0;
    int cells = 0;
    bool aux_active = false;
    Eigen::MatrixXd inputs;               // C_in x (batch * cells), sample-major
    Eigen::MatrixXd pre_activation;       // C_out x (batch * cells)
    Eigen::MatrixXd branch_masks;         // branches x cells, row 0 all ones
    std::vector<Eigen::MatrixXd> pooled;  // per branch, C_out x batch
    std::vector<Eigen::MatrixXd> logits;  // per branch, D x batch

    // Scratch reused across calls.
    Eigen::MatrixXd scaled_masks;
    Eigen::MatrixXd per_sample;
    Eigen::MatrixXd cell_grads;
    std::vector<Eigen::MatrixXd> pooled_grads;
};

// Fills `out`, reusing its storage when the shapes repeat.
void forward_batch(const ModelParams& params, std::span<const FeatureMap* const> inputs, std::span<const Mask> masks,
                   bool aux_active, BatchForward& out);

// logit_grads[br] is D x batch. Adds into `grads`; uses batch's scratch.
void backward_batch(const ModelParams& params, BatchForward& batch, std::span<const Eigen::MatrixXd> logit_grads,
                    ModelParams& grads);

// Checkpoint layout: "OENC1", six little-endian u32 (C_in, C_out, H, W, D,
// heads), then every parameter as a little-endian f64 in values() order.
void write_checkpoint(std::ostream& out, const ModelParams& params);
ModelParams read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_checkpoint(const std::filesystem::path& path);

// Little-endian f64 helpers shared with the dataset tensor files.
void write_f64_le(std::ostream& out, double value);
double read_f64_le(std::istream& in);
void write_u32_le(std::ostream& out, std::uint32_t value);
std::uint32_t read_u32_le(std::istream& in);

}  // namespace ordinalenc
