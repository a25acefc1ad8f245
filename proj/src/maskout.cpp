#include "ordinalenc/maskout.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <sstream>

#include "ordinalenc/errors.hpp"

namespace ordinalenc {

FeatureMap::FeatureMap(int channels, int height, int width, double fill)
    : channels_(channels), height_(height), width_(width) {
    if (channels < 1 || height < 1 || width < 1) throw ContractError("FeatureMap: dimensions must be positive");
    data_.assign(static_cast<std::size_t>(channels) * height * width, fill);
}

FeatureMap::FeatureMap(int channels, int height, int width, std::vector<double> data)
    : channels_(channels), height_(height), width_(width), data_(std::move(data)) {
    if (channels < 1 || height < 1 || width < 1) throw ContractError("FeatureMap: dimensions must be positive");
    if (data_.size() != static_cast<std::size_t>(channels) * height * width) {
        throw ContractError("FeatureMap: data size does not match C*H*W");
    }
}

FeatureMap FeatureMap::flipped() const {
    FeatureMap out(channels_, height_, width_);
    for (int c = 0; c < channels_; ++c)
        for (int x = 0; x < height_; ++x)
            for (int y = 0; y < width_; ++y) out.at(c, x, width_ - 1 - y) = at(c, x, y);
    return out;
}

Mask::Mask(int height, int width, GridPoint center, int side)
    : height_(height), width_(width), center_(center), side_(side) {
    if (height < 1 || width < 1) throw ContractError("Mask: grid dimensions must be positive");
    if (side < 1) throw ContractError("Mask: hole side must be at least 1");
    if (center.x < 0 || center.x >= height || center.y < 0 || center.y >= width) {
        throw ContractError("Mask: center outside the grid");
    }
    grid_.assign(static_cast<std::size_t>(height) * width, 1);
    const int x0 = std::max(0, center.x - side / 2);
    const int x1 = std::min(height - 1, center.x + (side + 1) / 2 - 1);
    const int y0 = std::max(0, center.y - side / 2);
    const int y1 = std::min(width - 1, center.y + (side + 1) / 2 - 1);
    for (int x = x0; x <= x1; ++x)
        for (int y = y0; y <= y1; ++y) grid_[static_cast<std::size_t>(x) * width + y] = 0;
}

int Mask::zero_count() const {
    return static_cast<int>(std::count(grid_.begin(), grid_.end(), std::uint8_t{0}));
}

Mask make_mask_with_side(GridPoint center, int side, int height, int width) {
    Mask mask(height, width, center, side);
    if (mask.covers_grid()) {
        std::cerr << "warning: mask hole of side " << side << " at (" << center.x << "," << center.y
                  << ") covers the whole " << height << "x" << width << " grid\n";
    }
    return mask;
}

Mask make_mask(GridPoint center, int radius, int height, int width) {
    if (radius < 1) throw ContractError("make_mask: radius must be at least 1");
    return make_mask_with_side(center, 2 * radius, height, width);
}

FeatureMap apply_mask(const FeatureMap& features, const Mask& mask) {
    if (features.height() != mask.height() || features.width() != mask.width()) {
        throw ContractError("apply_mask: mask and feature map spatial sizes differ");
    }
    FeatureMap out = features;
    const auto grid = mask.grid();
    for (int c = 0; c < out.channels(); ++c) {
        auto plane = out.channel(c);
        for (std::size_t i = 0; i < plane.size(); ++i) plane[i] *= grid[i];
    }
    return out;
}

std::vector<double> global_average_pool(const FeatureMap& features) {
    std::vector<double> pooled(static_cast<std::size_t>(features.channels()));
    const double inv = 1.0 / features.cells();
    for (int c = 0; c < features.channels(); ++c) {
        double sum = 0.0;
        for (double v : features.channel(c)) sum += v;
        pooled[static_cast<std::size_t>(c)] = sum * inv;
    }
    return pooled;
}

LandmarkSet default_landmarks(int height, int width) {
    constexpr std::array<std::array<double, 2>, kLandmarkCount> kFractions{{
        {0.30, 0.30},  // left eye
        {0.30, 0.70},  // right eye
        {0.55, 0.50},  // nose tip
        {0.75, 0.35},  // left mouth corner
        {0.75, 0.65},  // right mouth corner
    }};
    LandmarkSet points;
    for (int i = 0; i < kLandmarkCount; ++i) {
        const auto& f = kFractions[static_cast<std::size_t>(i)];
        const int x = static_cast<int>(std::floor(f[0] * height + 0.5));
        const int y = static_cast<int>(std::floor(f[1] * width + 0.5));
        points[static_cast<std::size_t>(i)] = {std::min(x, height - 1), std::min(y, width - 1)};
    }
    return points;
}

std::array<Mask, kLandmarkCount> default_landmark_masks_with_side(int height, int width, int side) {
    if (side < 1) throw ContractError("default_landmark_masks: hole side must be at least 1");
    if (height < side || width < side) {
        throw ContractError("default_landmark_masks: grid smaller than the hole");
    }
    const auto points = default_landmarks(height, width);
    std::array<Mask, kLandmarkCount> masks;
    for (int i = 0; i < kLandmarkCount; ++i) {
        masks[static_cast<std::size_t>(i)] = make_mask_with_side(points[static_cast<std::size_t>(i)], side, height, width);
    }
    return masks;
}

std::array<Mask, kLandmarkCount> default_landmark_masks(int height, int width, int radius) {
    if (radius < 1) throw ContractError("default_landmark_masks: radius must be at least 1");
    return default_landmark_masks_with_side(height, width, 2 * radius);
}

std::string mask_to_text(const Mask& mask) {
    std::string text;
    text.reserve(static_cast<std::size_t>(mask.height()) * (mask.width() + 1));
    for (int x = 0; x < mask.height(); ++x) {
        for (int y = 0; y < mask.width(); ++y) text.push_back(mask.at(x, y) ? '1' : '0');
        text.push_back('\n');
    }
    return text;
}

std::string mask_set_to_text(std::span<const Mask> masks) {
    std::ostringstream out;
    for (std::size_t i = 0; i < masks.size(); ++i) {
        if (i > 0) out << '\n';
        out << "# mask " << i << " center=" << masks[i].center().x << ',' << masks[i].center().y
            << " side=" << masks[i].side() << '\n'
            << mask_to_text(masks[i]);
    }
    return out.str();
}

}  // namespace ordinalenc
