#include "doctest.h"

#include <fstream>
#include <sstream>

#include "ordinalenc/errors.hpp"
#include "ordinalenc/maskout.hpp"
#include "ordinalenc/random.hpp"

using namespace ordinalenc;

namespace {

std::string read_golden(const std::string& name) {
    std::ifstream in(std::string(ORDINALENC_GOLDEN_DIR) + "/" + name);
    REQUIRE(in.good());
    std::ostringstream text;
    text << in.rdbuf();
    return text.str();
}

FeatureMap random_map(Rng& rng, int c, int h, int w) {
    FeatureMap f(c, h, w);
    for (double& v : f.data()) v = rng.normal();
    return f;
}

}  // namespace

TEST_CASE("make_mask 7x7 centered hole matches the golden grid") {
    const Mask m = make_mask({3, 3}, 2, 7, 7);
    CHECK(m.zero_count() == 16);
    CHECK(49 - m.zero_count() == 33);
    for (int x = 0; x < 7; ++x)
        for (int y = 0; y < 7; ++y) CHECK(m.at(x, y) == ((x >= 1 && x <= 4 && y >= 1 && y <= 4) ? 0 : 1));
    CHECK(mask_to_text(m) == read_golden("mask_7x7_center3_3_r2.txt"));
}

TEST_CASE("make_mask clips at the border") {
    const Mask m = make_mask({0, 0}, 2, 7, 7);
    CHECK(m.zero_count() == 4);
    for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y) CHECK(m.at(x, y) == 0);
}

TEST_CASE("make_mask covering the grid is flagged") {
    const Mask m = make_mask({3, 3}, 4, 7, 7);
    CHECK(m.covers_grid());
    CHECK(m.zero_count() == 49);
    CHECK_FALSE(make_mask({3, 3}, 2, 7, 7).covers_grid());
}

TEST_CASE("make_mask preconditions") {
    CHECK_THROWS_AS(make_mask({3, 3}, 0, 7, 7), ContractError);
    CHECK_THROWS_AS(make_mask({7, 3}, 1, 7, 7), ContractError);
    CHECK_THROWS_AS(make_mask({-1, 3}, 1, 7, 7), ContractError);
}

TEST_CASE("unclipped holes have (2r)^2 zeros; odd sides follow floor/ceil") {
    for (int r = 1; r <= 3; ++r) CHECK(make_mask({7, 7}, r, 14, 14).zero_count() == 4 * r * r);
    const Mask odd = make_mask_with_side({5, 5}, 3, 11, 11);
    CHECK(odd.zero_count() == 9);
    CHECK(odd.at(4, 4) == 0);
    CHECK(odd.at(6, 6) == 0);
    CHECK(odd.at(3, 5) == 1);
    CHECK(odd.at(7, 5) == 1);
    CHECK(make_mask_with_side({5, 5}, 4, 11, 11) == make_mask({5, 5}, 2, 11, 11));
}

TEST_CASE("apply_mask examples") {
    FeatureMap f(1, 2, 2, std::vector<double>{1, 2, 3, 4});
    Mask m(2, 2, {0, 0}, 1);  // zero at (0,0)
    CHECK(apply_mask(f, m).data()[0] == 0.0);

    // M = ((0,1),(1,0)) built from two single-cell holes.
    Mask a(2, 2, {0, 0}, 1), b(2, 2, {1, 1}, 1);
    const FeatureMap masked = apply_mask(apply_mask(f, a), b);
    CHECK(std::vector<double>(masked.data().begin(), masked.data().end()) == std::vector<double>{0, 2, 3, 0});
    CHECK(global_average_pool(masked)[0] == 1.25);

    const Mask ones = make_mask({0, 0}, 1, 4, 4);
    Rng rng(1);
    const FeatureMap r = random_map(rng, 3, 4, 4);
    const Mask all_zero = make_mask({2, 2}, 2, 4, 4);
    CHECK(all_zero.covers_grid());
    const FeatureMap blank = apply_mask(r, all_zero);
    for (double v : blank.data()) CHECK(v == 0.0);
    FeatureMap small(2, 3, 3, 1.0);
    CHECK_THROWS_AS(apply_mask(small, ones), ContractError);
}

TEST_CASE("apply_mask leaves cells outside the hole untouched") {
    Rng rng(2);
    const FeatureMap f = random_map(rng, 2, 5, 5);
    const Mask m = make_mask({0, 0}, 1, 5, 5);
    const FeatureMap g = apply_mask(f, m);
    for (int c = 0; c < 2; ++c)
        for (int x = 0; x < 5; ++x)
            for (int y = 0; y < 5; ++y) {
                if (x == 0 && y == 0) continue;
                CHECK(g.at(c, x, y) == f.at(c, x, y));
            }
}

TEST_CASE("global_average_pool examples") {
    CHECK(global_average_pool(FeatureMap(3, 4, 5, 2.5)) == std::vector<double>{2.5, 2.5, 2.5});
    CHECK(global_average_pool(FeatureMap(1, 2, 2, std::vector<double>{1, 2, 3, 4}))[0] == 2.5);
}

TEST_CASE("mask properties on random maps") {
    Rng rng(9);
    for (int trial = 0; trial < 50; ++trial) {
        const int h = static_cast<int>(rng.uniform_int(2, 9));
        const int w = static_cast<int>(rng.uniform_int(2, 9));
        const FeatureMap f1 = random_map(rng, 3, h, w);
        const FeatureMap f2 = random_map(rng, 3, h, w);
        const GridPoint c{static_cast<int>(rng.uniform_int(0, h - 1)), static_cast<int>(rng.uniform_int(0, w - 1))};
        const Mask m = make_mask_with_side(c, static_cast<int>(rng.uniform_int(1, 3)), h, w);

        const FeatureMap once = apply_mask(f1, m);
        CHECK(apply_mask(once, m) == once);

        const double alpha = rng.uniform(-3.0, 3.0);
        FeatureMap combo(3, h, w);
        for (std::size_t i = 0; i < combo.data().size(); ++i) combo.data()[i] = alpha * f1.data()[i] + f2.data()[i];
        const auto g = global_average_pool(combo);
        const auto g1 = global_average_pool(f1);
        const auto g2 = global_average_pool(f2);
        for (std::size_t i = 0; i < g.size(); ++i) CHECK(std::abs(g[i] - (alpha * g1[i] + g2[i])) <= 1e-12);

        FeatureMap absf = f1;
        for (double& v : absf.data()) v = std::abs(v);
        const auto bound = global_average_pool(absf);
        const auto masked = global_average_pool(once);
        for (std::size_t i = 0; i < masked.size(); ++i) CHECK(std::abs(masked[i]) <= bound[i] + 1e-15);
    }
}

TEST_CASE("default landmarks on a 7x7 grid") {
    const auto points = default_landmarks(7, 7);
    const LandmarkSet expected{{{2, 2}, {2, 5}, {4, 4}, {5, 2}, {5, 5}}};
    CHECK(points == expected);
    const auto masks = default_landmark_masks(7, 7, 2);
    for (const auto& m : masks) CHECK(m.side() == 4);
    CHECK(mask_set_to_text(masks) == read_golden("landmarks_7x7_side4.txt"));
}

TEST_CASE("default landmark masks on 14x14 have 16-cell holes") {
    for (const auto& m : default_landmark_masks(14, 14, 2)) CHECK(m.zero_count() == 16);
}

TEST_CASE("default landmark masks preconditions") {
    CHECK_THROWS_AS(default_landmark_masks(7, 7, 0), ContractError);
    CHECK_THROWS_AS(default_landmark_masks(3, 3, 2), ContractError);
}

TEST_CASE("flipped mirrors along the width") {
    FeatureMap f(1, 2, 3, std::vector<double>{1, 2, 3, 4, 5, 6});
    const FeatureMap g = f.flipped();
    CHECK(std::vector<double>(g.data().begin(), g.data().end()) == std::vector<double>{3, 2, 1, 6, 5, 4});
    CHECK(g.flipped() == f);
}
