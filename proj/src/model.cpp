#include "ordinalenc/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "ordinalenc/errors.hpp"
#include "ordinalenc/random.hpp"

namespace ordinalenc {
namespace {

constexpr char kMagic[5] = {'O', 'E', 'N', 'C', '1'};

std::size_t to_size(int v) { return static_cast<std::size_t>(v); }

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMatrixMap = Eigen::Map<RowMatrix>;
using ConstRowMatrixMap = Eigen::Map<const RowMatrix>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

}  // namespace

void ModelDims::validate() const {
    if (in_channels < 1 || feature_channels < 1 || height < 1 || width < 1 || output_dim < 1 || head_count < 1) {
        throw ContractError("ModelDims: every dimension must be positive");
    }
}

std::size_t ModelDims::parameter_count() const {
    const std::size_t backbone = to_size(feature_channels) * to_size(in_channels) + to_size(feature_channels);
    const std::size_t head = to_size(output_dim) * to_size(feature_channels) + to_size(output_dim);
    return backbone + to_size(head_count) * head;
}

ModelParams::ModelParams(const ModelDims& dims) : dims_(dims) {
    dims_.validate();
    values_.assign(dims_.parameter_count(), 0.0);
}

std::span<double> ModelParams::backbone_weight() {
    return std::span<double>(values_).subspan(0, to_size(dims_.feature_channels) * to_size(dims_.in_channels));
}
std::span<const double> ModelParams::backbone_weight() const {
    return std::span<const double>(values_).subspan(0, to_size(dims_.feature_channels) * to_size(dims_.in_channels));
}
std::span<double> ModelParams::backbone_bias() {
    return std::span<double>(values_).subspan(to_size(dims_.feature_channels) * to_size(dims_.in_channels),
                                              to_size(dims_.feature_channels));
}
std::span<const double> ModelParams::backbone_bias() const {
    return std::span<const double>(values_).subspan(to_size(dims_.feature_channels) * to_size(dims_.in_channels),
                                                    to_size(dims_.feature_channels));
}

void ModelParams::check_head(int head) const {
    if (head < 0 || head >= dims_.head_count) {
        throw ContractError("head index " + std::to_string(head) + " out of range");
    }
}

std::size_t ModelParams::head_size() const {
    return to_size(dims_.output_dim) * to_size(dims_.feature_channels) + to_size(dims_.output_dim);
}

std::size_t ModelParams::head_offset(int head) const {
    check_head(head);
    const std::size_t backbone = to_size(dims_.feature_channels) * (to_size(dims_.in_channels) + 1);
    return backbone + to_size(head) * head_size();
}

std::span<double> ModelParams::head_weight(int head) {
    return std::span<double>(values_).subspan(head_offset(head), to_size(dims_.output_dim) * to_size(dims_.feature_channels));
}
std::span<const double> ModelParams::head_weight(int head) const {
    return std::span<const double>(values_).subspan(head_offset(head),
                                                    to_size(dims_.output_dim) * to_size(dims_.feature_channels));
}
std::span<double> ModelParams::head_bias(int head) {
    return std::span<double>(values_).subspan(
        head_offset(head) + to_size(dims_.output_dim) * to_size(dims_.feature_channels), to_size(dims_.output_dim));
}
std::span<const double> ModelParams::head_bias(int head) const {
    return std::span<const double>(values_).subspan(
        head_offset(head) + to_size(dims_.output_dim) * to_size(dims_.feature_channels), to_size(dims_.output_dim));
}

ModelParams init_params(std::uint64_t seed, const ModelDims& dims) {
    ModelParams params(dims);
    Rng rng(seed);
    const double backbone_limit = std::sqrt(6.0 / (dims.in_channels + dims.feature_channels));
    for (double& w : params.backbone_weight()) w = rng.uniform(-backbone_limit, backbone_limit);
    const double head_limit = std::sqrt(6.0 / (dims.feature_channels + dims.output_dim));
    for (int h = 0; h < dims.head_count; ++h) {
        for (double& w : params.head_weight(h)) w = rng.uniform(-head_limit, head_limit);
    }
    return params;
}

void clone_head(ModelParams& params, int from, int to) {
    const std::size_t src = params.head_offset(from);
    const std::size_t dst = params.head_offset(to);
    if (src == dst) return;
    auto values = params.values();
    std::memcpy(values.data() + dst, values.data() + src, params.head_size() * sizeof(double));
}

ForwardTrace forward(const ModelParams& params, const FeatureMap& input, std::span<const Mask> masks,
                     bool aux_active) {
    const ModelDims& d = params.dims();
    if (input.channels() != d.in_channels || input.height() != d.height || input.width() != d.width) {
        throw ContractError("forward: input shape does not match the model");
    }
    const int aux_branches = aux_active ? d.head_count - 1 : 0;
    if (aux_active && masks.size() < to_size(aux_branches)) {
        throw ContractError("forward: need one mask per auxiliary head");
    }
    const int cells = d.height * d.width;
    const int branches = 1 + aux_branches;

    ForwardTrace trace;
    trace.input = input;
    trace.aux_active = aux_active;
    // Row 0 is the unmasked main branch.
    trace.branch_masks.resize(branches, cells);
    trace.branch_masks.row(0).setOnes();
    for (int i = 0; i < aux_branches; ++i) {
        const Mask& m = masks[to_size(i)];
        if (m.height() != d.height || m.width() != d.width) {
            throw ContractError("forward: mask size does not match the feature map");
        }
        for (int cell = 0; cell < cells; ++cell) trace.branch_masks(i + 1, cell) = m.grid()[to_size(cell)];
    }

    const ConstRowMatrixMap x(input.data().data(), d.in_channels, cells);
    const ConstRowMatrixMap w(params.backbone_weight().data(), d.feature_channels, d.in_channels);
    const ConstVectorMap b(params.backbone_bias().data(), d.feature_channels);
    trace.pre_activation.resize(to_size(d.feature_channels) * to_size(cells));
    RowMatrixMap pre(trace.pre_activation.data(), d.feature_channels, cells);
    pre.noalias() = w * x;
    pre.colwise() += b;

    trace.features = FeatureMap(d.feature_channels, d.height, d.width);
    RowMatrixMap features(trace.features.data().data(), d.feature_channels, cells);
    features = pre.cwiseMax(0.0);

    // Column br holds the pooled feature of branch br.
    const Eigen::MatrixXd pooled = (features * trace.branch_masks.transpose()) / static_cast<double>(cells);
    trace.pooled.resize(to_size(branches));
    trace.logits.resize(to_size(branches));
    for (int br = 0; br < branches; ++br) {
        trace.pooled[to_size(br)].assign(pooled.col(br).data(), pooled.col(br).data() + d.feature_channels);
        const ConstRowMatrixMap hw(params.head_weight(br).data(), d.output_dim, d.feature_channels);
        const ConstVectorMap hb(params.head_bias(br).data(), d.output_dim);
        auto& logits = trace.logits[to_size(br)];
        logits.resize(to_size(d.output_dim));
        VectorMap out(logits.data(), d.output_dim);
        out.noalias() = hw * pooled.col(br);
        out += hb;
    }
    return trace;
}

std::vector<double> predict_logits(const ModelParams& params, const FeatureMap& input) {
    auto trace = forward(params, input, {}, false);
    return std::move(trace.logits[0]);
}

ModelParams backward(const ModelParams& params, const ForwardTrace& trace,
                     std::span<const std::vector<double>> logit_grads) {
    ModelParams grads(params.dims());
    backward_accumulate(params, trace, logit_grads, grads);
    return grads;
}

void backward_accumulate(const ModelParams& params, const ForwardTrace& trace,
                         std::span<const std::vector<double>> logit_grads, ModelParams& grads) {
    const ModelDims& d = params.dims();
    if (grads.dims() != d) throw ContractError("backward: gradient buffer has the wrong dims");
    if (logit_grads.size() != trace.logits.size()) {
        throw ContractError("backward: one logit gradient per active branch required");
    }
    if (trace.features.channels() != d.feature_channels || trace.input.channels() != d.in_channels ||
        trace.input.height() != d.height || trace.input.width() != d.width ||
        trace.branch_masks.rows() != static_cast<Eigen::Index>(trace.logits.size())) {
        throw ContractError("backward: trace does not match the parameters");
    }
    const int cells = d.height * d.width;
    const auto branches = static_cast<int>(logit_grads.size());

    // d loss / d pooled feature, one column per branch.
    Eigen::MatrixXd pooled_grads(d.feature_channels, branches);
    for (int br = 0; br < branches; ++br) {
        const auto& g = logit_grads[to_size(br)];
        if (g.size() != to_size(d.output_dim)) throw ContractError("backward: logit gradient has the wrong length");
        const ConstVectorMap gv(g.data(), d.output_dim);
        const ConstVectorMap f(trace.pooled[to_size(br)].data(), d.feature_channels);
        RowMatrixMap gw(grads.head_weight(br).data(), d.output_dim, d.feature_channels);
        VectorMap gb(grads.head_bias(br).data(), d.output_dim);
        gw.noalias() += gv * f.transpose();
        gb += gv;
        const ConstRowMatrixMap hw(params.head_weight(br).data(), d.output_dim, d.feature_channels);
        pooled_grads.col(br).noalias() = hw.transpose() * gv;
    }

    const ConstRowMatrixMap pre(trace.pre_activation.data(), d.feature_channels, cells);
    Eigen::MatrixXd cell_grads = (pooled_grads * trace.branch_masks) / static_cast<double>(cells);
    cell_grads = (pre.array() > 0.0).select(cell_grads, 0.0);

    const ConstRowMatrixMap x(trace.input.data().data(), d.in_channels, cells);
    RowMatrixMap gw(grads.backbone_weight().data(), d.feature_channels, d.in_channels);
    VectorMap gb(grads.backbone_bias().data(), d.feature_channels);
    gw.noalias() += cell_grads * x.transpose();
    gb += cell_grads.rowwise().sum();
}

namespace {

void fill_mask_matrix(const ModelDims& d, std::span<const Mask> masks, int aux_branches, Eigen::MatrixXd& m) {
    const int cells = d.height * d.width;
    m.resize(1 + aux_branches, cells);
    m.row(0).setOnes();
    for (int i = 0; i < aux_branches; ++i) {
        const Mask& mask = masks[to_size(i)];
        if (mask.height() != d.height || mask.width() != d.width) {
            throw ContractError("forward: mask size does not match the feature map");
        }
        for (int cell = 0; cell < cells; ++cell) m(i + 1, cell) = mask.grid()[to_size(cell)];
    }
}

}  // namespace

void forward_batch(const ModelParams& params, std::span<const FeatureMap* const> inputs, std::span<const Mask> masks,
                   bool aux_active, BatchForward& out) {
    const ModelDims& d = params.dims();
    const int aux_branches = aux_active ? d.head_count - 1 : 0;
    if (aux_active && masks.size() < to_size(aux_branches)) {
        throw ContractError("forward: need one mask per auxiliary head");
    }
    if (inputs.empty()) throw ContractError("forward_batch: empty batch");
    const int cells = d.height * d.width;
    const int batch = static_cast<int>(inputs.size());
    const int branches = 1 + aux_branches;

    out.batch = batch;
    out.cells = cells;
    out.aux_active = aux_active;
    fill_mask_matrix(d, masks, aux_branches, out.branch_masks);

    out.inputs.resize(d.in_channels, static_cast<Eigen::Index>(batch) * cells);
    for (int j = 0; j < batch; ++j) {
        const FeatureMap& in = *inputs[to_size(j)];
        if (in.channels() != d.in_channels || in.height() != d.height || in.width() != d.width) {
            throw ContractError("forward: input shape does not match the model");
        }
        out.inputs.middleCols(static_cast<Eigen::Index>(j) * cells, cells) =
            ConstRowMatrixMap(in.data().data(), d.in_channels, cells);
    }

    const ConstRowMatrixMap w(params.backbone_weight().data(), d.feature_channels, d.in_channels);
    const ConstVectorMap b(params.backbone_bias().data(), d.feature_channels);
    out.pre_activation.resize(d.feature_channels, out.inputs.cols());
    out.pre_activation.noalias() = w * out.inputs;
    out.pre_activation.colwise() += b;

    out.scaled_masks = out.branch_masks.transpose() / static_cast<double>(cells);
    out.pooled.resize(to_size(branches));
    for (auto& p : out.pooled) p.resize(d.feature_channels, batch);
    out.per_sample.resize(d.feature_channels, branches);
    for (int j = 0; j < batch; ++j) {
        const auto block = out.pre_activation.middleCols(static_cast<Eigen::Index>(j) * cells, cells);
        out.per_sample.noalias() = block.cwiseMax(0.0) * out.scaled_masks;
        for (int br = 0; br < branches; ++br) out.pooled[to_size(br)].col(j) = out.per_sample.col(br);
    }

    out.logits.resize(to_size(branches));
    for (int br = 0; br < branches; ++br) {
        const ConstRowMatrixMap hw(params.head_weight(br).data(), d.output_dim, d.feature_channels);
        const ConstVectorMap hb(params.head_bias(br).data(), d.output_dim);
        auto& logits = out.logits[to_size(br)];
        logits.resize(d.output_dim, batch);
        logits.noalias() = hw * out.pooled[to_size(br)];
        logits.colwise() += hb;
    }
}

void backward_batch(const ModelParams& params, BatchForward& batch, std::span<const Eigen::MatrixXd> logit_grads,
                    ModelParams& grads) {
    const ModelDims& d = params.dims();
    if (grads.dims() != d) throw ContractError("backward: gradient buffer has the wrong dims");
    if (logit_grads.size() != batch.logits.size()) {
        throw ContractError("backward: one logit gradient per active branch required");
    }
    const int branches = static_cast<int>(logit_grads.size());
    const int cells = batch.cells;

    batch.pooled_grads.resize(to_size(branches));
    for (int br = 0; br < branches; ++br) {
        const auto& g = logit_grads[to_size(br)];
        if (g.rows() != d.output_dim || g.cols() != batch.batch) {
            throw ContractError("backward: logit gradient has the wrong shape");
        }
        RowMatrixMap gw(grads.head_weight(br).data(), d.output_dim, d.feature_channels);
        VectorMap gb(grads.head_bias(br).data(), d.output_dim);
        gw.noalias() += g * batch.pooled[to_size(br)].transpose();
        gb += g.rowwise().sum();
        const ConstRowMatrixMap hw(params.head_weight(br).data(), d.output_dim, d.feature_channels);
        auto& pg = batch.pooled_grads[to_size(br)];
        pg.resize(d.feature_channels, batch.batch);
        pg.noalias() = hw.transpose() * g;
    }

    // scaled_masks is cells x branches; its transpose spreads pooled grads.
    batch.cell_grads.resize(d.feature_channels, static_cast<Eigen::Index>(batch.batch) * cells);
    batch.per_sample.resize(d.feature_channels, branches);
    for (int j = 0; j < batch.batch; ++j) {
        for (int br = 0; br < branches; ++br) batch.per_sample.col(br) = batch.pooled_grads[to_size(br)].col(j);
        batch.cell_grads.middleCols(static_cast<Eigen::Index>(j) * cells, cells).noalias() =
            batch.per_sample * batch.scaled_masks.transpose();
    }
    batch.cell_grads = (batch.pre_activation.array() > 0.0).select(batch.cell_grads, 0.0);

    RowMatrixMap gw(grads.backbone_weight().data(), d.feature_channels, d.in_channels);
    VectorMap gb(grads.backbone_bias().data(), d.feature_channels);
    gw.noalias() += batch.cell_grads * batch.inputs.transpose();
    gb += batch.cell_grads.rowwise().sum();
}

void write_u32_le(std::ostream& out, std::uint32_t value) {
    unsigned char bytes[4];
    for (int i = 0; i < 4; ++i) bytes[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(bytes), 4);
}

std::uint32_t read_u32_le(std::istream& in) {
    unsigned char bytes[4];
    if (!in.read(reinterpret_cast<char*>(bytes), 4)) throw FormatError("truncated u32");
    std::uint32_t value = 0;
    for (int i = 0; i < 4; ++i) value |= static_cast<std::uint32_t>(bytes[i]) << (8 * i);
    return value;
}

void write_f64_le(std::ostream& out, double value) {
    const auto bits = std::bit_cast<std::uint64_t>(value);
    unsigned char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(bytes), 8);
}

double read_f64_le(std::istream& in) {
    unsigned char bytes[8];
    if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw FormatError("truncated f64");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    return std::bit_cast<double>(bits);
}

void write_checkpoint(std::ostream& out, const ModelParams& params) {
    const ModelDims& d = params.dims();
    out.write(kMagic, sizeof kMagic);
    for (int v : {d.in_channels, d.feature_channels, d.height, d.width, d.output_dim, d.head_count}) {
        write_u32_le(out, static_cast<std::uint32_t>(v));
    }
    for (double v : params.values()) write_f64_le(out, v);
    if (!out) throw FormatError("checkpoint write failed");
}

ModelParams read_checkpoint(std::istream& in) {
    char magic[sizeof kMagic];
    if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
        throw FormatError("not an OENC1 checkpoint");
    }
    ModelDims d;
    d.in_channels = static_cast<int>(read_u32_le(in));
    d.feature_channels = static_cast<int>(read_u32_le(in));
    d.height = static_cast<int>(read_u32_le(in));
    d.width = static_cast<int>(read_u32_le(in));
    d.output_dim = static_cast<int>(read_u32_le(in));
    d.head_count = static_cast<int>(read_u32_le(in));
    ModelParams params(d);
    for (double& v : params.values()) v = read_f64_le(in);
    if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after checkpoint");
    return params;
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open " + path.string() + " for writing");
    write_checkpoint(out, params);
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    return read_checkpoint(in);
}

}  // namespace ordinalenc
