#include "doctest.h"

#include <cmath>
#include <sstream>

#include "oracles.hpp"
#include "ordinalenc/errors.hpp"
#include "ordinalenc/loss_grad.hpp"
#include "ordinalenc/model.hpp"
#include "ordinalenc/random.hpp"

using namespace ordinalenc;

namespace {

FeatureMap random_map(Rng& rng, int c, int h, int w, double shift = 0.0) {
    FeatureMap f(c, h, w);
    for (double& v : f.data()) v = rng.normal() + shift;
    return f;
}

ModelDims small_dims(int cin, int cout, int h, int w, int d, int heads = kDefaultHeadCount) {
    ModelDims dims;
    dims.in_channels = cin;
    dims.feature_channels = cout;
    dims.height = h;
    dims.width = w;
    dims.output_dim = d;
    dims.head_count = heads;
    return dims;
}

// Straight loops over the documented parameter layout.
std::vector<std::vector<double>> reference_logits(std::span<const double> v, const ModelDims& d,
                                                  const FeatureMap& x, std::span<const Mask> masks,
                                                  bool aux_active) {
    const int cells = d.height * d.width;
    const std::size_t bb = static_cast<std::size_t>(d.feature_channels) * d.in_channels;
    std::vector<double> feat(static_cast<std::size_t>(d.feature_channels) * cells);
    for (int o = 0; o < d.feature_channels; ++o) {
        for (int cell = 0; cell < cells; ++cell) {
            double s = v[bb + o];
            for (int i = 0; i < d.in_channels; ++i) {
                s += v[static_cast<std::size_t>(o) * d.in_channels + i] *
                     x.data()[static_cast<std::size_t>(i) * cells + cell];
            }
            feat[static_cast<std::size_t>(o) * cells + cell] = std::max(0.0, s);
        }
    }
    const std::size_t head0 = bb + d.feature_channels;
    const std::size_t head_size = static_cast<std::size_t>(d.output_dim) * (d.feature_channels + 1);
    const int branches = aux_active ? d.head_count : 1;
    std::vector<std::vector<double>> out;
    for (int br = 0; br < branches; ++br) {
        std::vector<double> pooled(static_cast<std::size_t>(d.feature_channels), 0.0);
        for (int o = 0; o < d.feature_channels; ++o) {
            for (int cell = 0; cell < cells; ++cell) {
                const double m = br == 0 ? 1.0 : masks[br - 1].grid()[cell];
                pooled[o] += m * feat[static_cast<std::size_t>(o) * cells + cell];
            }
            pooled[o] /= cells;
        }
        const std::size_t off = head0 + br * head_size;
        std::vector<double> logits(static_cast<std::size_t>(d.output_dim));
        for (int k = 0; k < d.output_dim; ++k) {
            double s = v[off + static_cast<std::size_t>(d.output_dim) * d.feature_channels + k];
            for (int o = 0; o < d.feature_channels; ++o) s += v[off + static_cast<std::size_t>(k) * d.feature_channels + o] * pooled[o];
            logits[k] = s;
        }
        out.push_back(std::move(logits));
    }
    return out;
}

}  // namespace

TEST_CASE("forward with a zero backbone returns the head biases") {
    const ModelDims d = small_dims(3, 4, 5, 5, 6);
    ModelParams p(d);
    Rng rng(1);
    for (int h = 0; h < d.head_count; ++h)
        for (double& b : p.head_bias(h)) b = rng.normal();
    const auto masks = default_landmark_masks(5, 5, 1);
    const auto trace = forward(p, random_map(rng, 3, 5, 5), masks, true);
    REQUIRE(trace.logits.size() == 6);
    for (int h = 0; h < 6; ++h) {
        const auto bias = p.head_bias(h);
        CHECK(std::vector<double>(bias.begin(), bias.end()) == trace.logits[h]);
    }
}

TEST_CASE("identity backbone pools to the input's GAP") {
    const ModelDims d = small_dims(4, 4, 6, 6, 3);
    ModelParams p(d);
    auto w = p.backbone_weight();
    for (int i = 0; i < 4; ++i) w[static_cast<std::size_t>(i) * 4 + i] = 1.0;
    Rng rng(2);
    FeatureMap x(4, 6, 6);
    for (double& v : x.data()) v = rng.uniform(0.1, 2.0);
    const auto trace = forward(p, x, {}, false);
    const auto gap = global_average_pool(x);
    for (int i = 0; i < 4; ++i) CHECK(trace.pooled[0][i] == doctest::Approx(gap[i]).epsilon(1e-15));
}

TEST_CASE("forward is deterministic and matches a loop implementation") {
    const ModelDims d = small_dims(5, 7, 7, 7, 9);
    Rng rng(3);
    const auto p = init_params(11, d);
    const auto masks = default_landmark_masks(7, 7, 2);
    for (int trial = 0; trial < 5; ++trial) {
        const auto x = random_map(rng, 5, 7, 7);
        const auto a = forward(p, x, masks, true);
        const auto b = forward(p, x, masks, true);
        CHECK(a.logits == b.logits);
        const auto ref = reference_logits(p.values(), d, x, masks, true);
        for (std::size_t br = 0; br < ref.size(); ++br)
            for (std::size_t k = 0; k < ref[br].size(); ++k) CHECK(std::abs(a.logits[br][k] - ref[br][k]) < 1e-12);
    }
}

TEST_CASE("forward rejects shape mismatches") {
    const auto p = init_params(1, small_dims(3, 4, 5, 5, 6));
    Rng rng(4);
    CHECK_THROWS_AS(forward(p, random_map(rng, 2, 5, 5), {}, false), ContractError);
    CHECK_THROWS_AS(forward(p, random_map(rng, 3, 4, 5), {}, false), ContractError);
    const auto wrong = default_landmark_masks(7, 7, 1);
    CHECK_THROWS_AS(forward(p, random_map(rng, 3, 5, 5), wrong, true), ContractError);
    CHECK_THROWS_AS(forward(p, random_map(rng, 3, 5, 5), {}, true), ContractError);
}

TEST_CASE("backward: zero upstream gives zero gradients") {
    const auto p = init_params(5, small_dims(3, 4, 5, 5, 6));
    Rng rng(5);
    const auto trace = forward(p, random_map(rng, 3, 5, 5), default_landmark_masks(5, 5, 1), true);
    std::vector<std::vector<double>> zeros(trace.logits.size(), std::vector<double>(6, 0.0));
    const auto grads = backward(p, trace, zeros);
    for (double g : grads.values()) CHECK(g == 0.0);
}

TEST_CASE("backward: single cell head gradient is an outer product") {
    const ModelDims d = small_dims(2, 3, 1, 1, 4, 1);
    const auto p = init_params(6, d);
    const FeatureMap x(2, 1, 1, std::vector<double>{0.7, -1.3});
    const auto trace = forward(p, x, {}, false);
    const std::vector<std::vector<double>> up{{0.5, -1.0, 2.0, 0.25}};
    const auto g = backward(p, trace, up);
    const auto gw = g.head_weight(0);
    for (int k = 0; k < 4; ++k)
        for (int o = 0; o < 3; ++o) CHECK(gw[k * 3 + o] == doctest::Approx(up[0][k] * trace.pooled[0][o]).epsilon(1e-15));
    const auto gb = g.head_bias(0);
    CHECK(std::vector<double>(gb.begin(), gb.end()) == up[0]);
}

TEST_CASE("backward rejects mismatched gradients") {
    const auto p = init_params(7, small_dims(3, 4, 5, 5, 6));
    Rng rng(7);
    const auto trace = forward(p, random_map(rng, 3, 5, 5), {}, false);
    CHECK_THROWS_AS(backward(p, trace, std::vector<std::vector<double>>{}), ContractError);
    CHECK_THROWS_AS(backward(p, trace, std::vector<std::vector<double>>{std::vector<double>(5, 0.0)}), ContractError);
    const auto other = init_params(7, small_dims(2, 4, 5, 5, 6));
    CHECK_THROWS_AS(backward(other, trace, std::vector<std::vector<double>>{std::vector<double>(6, 0.0)}),
                    ContractError);
}

TEST_CASE("parameter gradients match central differences of the loop model") {
    Rng rng(2025);
    int configs = 0;
    double worst = 0.0;
    std::size_t bad = 0;
    for (Family family : {Family::LDL, Family::HardRank, Family::SoftRank}) {
        for (bool aux : {false, true}) {
            for (int rep = 0; rep < 4; ++rep, ++configs) {
                EncodingConfig enc;
                enc.family = family;
                enc.max_age = static_cast<int>(rng.uniform_int(3, 8));
                enc.sigma = family == Family::HardRank ? 0.0 : rng.uniform(0.4, 4.0);
                const ModelDims d = small_dims(static_cast<int>(rng.uniform_int(2, 4)), static_cast<int>(rng.uniform_int(2, 5)),
                                               5, 5, static_cast<int>(enc.output_dim()));
                const auto p = init_params(rng.next_u64(), d);
                const auto x = random_map(rng, d.in_channels, 5, 5, 0.3);
                const auto masks = default_landmark_masks(5, 5, 1);
                const auto target = encode(static_cast<int>(rng.uniform_int(1, enc.max_age)), enc);
                const double lambda = 0.3;

                auto total_loss = [&](std::span<const double> v) {
                    const auto logits = reference_logits(v, d, x, masks, aux);
                    double total = 0.0;
                    for (std::size_t br = 0; br < logits.size(); ++br)
                        total += (br == 0 ? 1.0 : lambda) * loss_for(logits[br], target).value;
                    return total;
                };

                const auto trace = forward(p, x, masks, aux);
                std::vector<std::vector<double>> up;
                for (std::size_t br = 0; br < trace.logits.size(); ++br) {
                    auto g = loss_for(trace.logits[br], target).grad;
                    if (br > 0)
                        for (double& v : g) v *= lambda;
                    up.push_back(std::move(g));
                }
                const auto analytic = backward(p, trace, up);
                const std::vector<double> values(p.values().begin(), p.values().end());
                const auto numeric = oracle::central_diff<double>(total_loss, values, 1e-5);
                for (std::size_t i = 0; i < values.size(); ++i) {
                    const double a = analytic.values()[i];
                    if (!oracle::grad_close(a, numeric[i], 1e-4, 1e-8)) ++bad;
                    const double scale = std::max({std::abs(a), std::abs(numeric[i]), 1e-8});
                    worst = std::max(worst, std::abs(a - numeric[i]) / scale);
                }
            }
        }
    }
    INFO("worst relative error " << worst);
    CHECK(configs >= 20);
    CHECK(bad == 0);
}

TEST_CASE("dead ReLU cells contribute no backbone gradient") {
    const ModelDims d = small_dims(2, 2, 1, 2, 3, 1);
    ModelParams p = init_params(8, d);
    auto w = p.backbone_weight();
    w[0] = 1.0, w[1] = 0.0, w[2] = 0.0, w[3] = 1.0;
    // Cell 0 positive in both channels, cell 1 negative in both.
    const FeatureMap x(2, 1, 2, std::vector<double>{1.0, -1.0, 2.0, -3.0});
    const auto trace = forward(p, x, {}, false);
    const auto g = backward(p, trace, std::vector<std::vector<double>>{{1.0, -2.0, 0.5}});
    const auto gw = g.backbone_weight();
    // Only cell 0 feeds the gradient: d/dW[o][i] = pooled_grad[o] * x[i][0] / cells.
    const auto hw = p.head_weight(0);
    for (int o = 0; o < 2; ++o) {
        const double pg = hw[o] * 1.0 + hw[2 + o] * -2.0 + hw[4 + o] * 0.5;
        CHECK(gw[o * 2 + 0] == doctest::Approx(pg * 1.0 / 2).epsilon(1e-14));
        CHECK(gw[o * 2 + 1] == doctest::Approx(pg * 2.0 / 2).epsilon(1e-14));
    }
}

TEST_CASE("auxiliary heads are inert when inactive") {
    const ModelDims d = small_dims(3, 4, 7, 7, 5);
    auto p = init_params(9, d);
    Rng rng(9);
    const auto x = random_map(rng, 3, 7, 7);
    const auto before = forward(p, x, {}, false).logits;
    for (int h = 1; h < d.head_count; ++h)
        for (double& v : p.head_weight(h)) v = rng.normal() * 10.0;
    CHECK(forward(p, x, {}, false).logits == before);
    CHECK(predict_logits(p, x) == before[0]);
}

TEST_CASE("init_params shapes, bounds and determinism") {
    const ModelDims d = small_dims(4, 8, 7, 7, 10);
    const auto a = init_params(3, d);
    CHECK(a == init_params(3, d));
    CHECK_FALSE(a == init_params(4, d));
    CHECK(a.backbone_weight().size() == 32);
    CHECK(a.backbone_bias().size() == 8);
    for (int h = 0; h < d.head_count; ++h) {
        CHECK(a.head_weight(h).size() == 80);
        CHECK(a.head_bias(h).size() == 10);
        for (double v : a.head_weight(h)) CHECK(std::abs(v) <= std::sqrt(6.0 / 18.0));
    }
    for (double v : a.backbone_weight()) CHECK(std::abs(v) <= std::sqrt(6.0 / 12.0));
    CHECK(a.values().size() == d.parameter_count());
}

TEST_CASE("clone_head copies without aliasing") {
    const ModelDims d = small_dims(3, 4, 5, 5, 6);
    auto p = init_params(10, d);
    const auto untouched = p;
    clone_head(p, 0, 1);
    CHECK(std::equal(p.head_weight(0).begin(), p.head_weight(0).end(), p.head_weight(1).begin()));
    CHECK(std::equal(p.head_bias(0).begin(), p.head_bias(0).end(), p.head_bias(1).begin()));
    CHECK(std::equal(p.head_weight(2).begin(), p.head_weight(2).end(), untouched.head_weight(2).begin()));
    p.head_weight(1)[0] += 1.0;
    CHECK(p.head_weight(0)[0] == untouched.head_weight(0)[0]);
    for (int h = 2; h < d.head_count; ++h) clone_head(p, 0, h);
    clone_head(p, 0, 1);
    for (int h = 1; h < d.head_count; ++h)
        CHECK(std::equal(p.head_weight(0).begin(), p.head_weight(0).end(), p.head_weight(h).begin()));
    CHECK_THROWS_AS(clone_head(p, 0, 6), ContractError);
    CHECK_THROWS_AS(clone_head(p, -1, 2), ContractError);
}

TEST_CASE("checkpoint round trip is bit exact") {
    const ModelDims d = small_dims(3, 5, 7, 7, 202);
    const auto p = init_params(12, d);
    std::stringstream buf;
    write_checkpoint(buf, p);
    const std::string bytes = buf.str();
    CHECK(bytes.substr(0, 5) == "OENC1");
    CHECK(bytes.size() == 5 + 6 * 4 + 8 * d.parameter_count());
    // Dims header, little-endian: D sits in the fifth u32.
    CHECK(static_cast<unsigned char>(bytes[5 + 16]) == 202);
    const auto back = read_checkpoint(buf);
    CHECK(back == p);

    std::stringstream bad("OENC2xxxxxxxxxxxxxxxxxxxxxxxxxxx");
    CHECK_THROWS_AS(read_checkpoint(bad), FormatError);
    std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
    CHECK_THROWS_AS(read_checkpoint(truncated), FormatError);
}

TEST_CASE("batched forward/backward agree with the per-sample path") {
    const ModelDims d = small_dims(4, 6, 7, 7, 11);
    const auto p = init_params(13, d);
    Rng rng(13);
    const auto masks = default_landmark_masks(7, 7, 2);
    std::vector<FeatureMap> xs;
    for (int i = 0; i < 5; ++i) xs.push_back(random_map(rng, 4, 7, 7, 0.2));
    std::vector<const FeatureMap*> ptrs;
    for (const auto& x : xs) ptrs.push_back(&x);
    for (bool aux : {false, true}) {
        BatchForward batch;
        forward_batch(p, ptrs, masks, aux, batch);
        ModelParams expected(d);
        std::vector<Eigen::MatrixXd> ups(batch.logits.size(), Eigen::MatrixXd(11, 5));
        for (int s = 0; s < 5; ++s) {
            const auto trace = forward(p, xs[s], masks, aux);
            std::vector<std::vector<double>> up;
            for (std::size_t br = 0; br < trace.logits.size(); ++br) {
                std::vector<double> g(11);
                for (double& v : g) v = rng.normal();
                for (int k = 0; k < 11; ++k) {
                    CHECK(std::abs(batch.logits[br](k, s) - trace.logits[br][k]) < 1e-12);
                    ups[br](k, s) = g[k];
                }
                up.push_back(std::move(g));
            }
            backward_accumulate(p, trace, up, expected);
        }
        ModelParams got(d);
        backward_batch(p, batch, ups, got);
        for (std::size_t i = 0; i < got.values().size(); ++i)
            CHECK(std::abs(got.values()[i] - expected.values()[i]) < 1e-11);
    }
}
