#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace ordinalenc {

// C x H x W tensor, channel-major, row-major within a channel.
class FeatureMap {
public:
    FeatureMap() = default;
    FeatureMap(int channels, int height, int width, double fill = 0.0);
    FeatureMap(int channels, int height, int width, std::vector<double> data);

    int channels() const { return channels_; }
    int height() const { return height_; }
    int width() const { return width_; }
    int cells() const { return height_ * width_; }

    double& at(int c, int x, int y) { return data_[index(c, x, y)]; }
    double at(int c, int x, int y) const { return data_[index(c, x, y)]; }

    std::span<double> channel(int c) {
        return {data_.data() + static_cast<std::size_t>(c) * cells(), static_cast<std::size_t>(cells())};
    }
    std::span<const double> channel(int c) const {
        return {data_.data() + static_cast<std::size_t>(c) * cells(), static_cast<std::size_t>(cells())};
    }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }

    // Mirror along the width axis.
    FeatureMap flipped() const;

    bool operator==(const FeatureMap&) const = default;

private:
    std::size_t index(int c, int x, int y) const {
        return (static_cast<std::size_t>(c) * height_ + x) * width_ + y;
    }

    int channels_ = 0;
    int height_ = 0;
    int width_ = 0;
    std::vector<double> data_;
};

// x indexes rows (height), y indexes columns, both 0-based.
struct GridPoint {
    int x = 0;
    int y = 0;
    bool operator==(const GridPoint&) const = default;
};

class Mask {
public:
    Mask() = default;
    Mask(int height, int width, GridPoint center, int side);

    int height() const { return height_; }
    int width() const { return width_; }
    GridPoint center() const { return center_; }
    int side() const { return side_; }

    std::uint8_t at(int x, int y) const { return grid_[static_cast<std::size_t>(x) * width_ + y]; }
    std::span<const std::uint8_t> grid() const { return grid_; }

    int zero_count() const;
    // The hole swallows every cell; an auxiliary branch would see nothing.
    bool covers_grid() const { return zero_count() == height_ * width_; }

    bool operator==(const Mask&) const = default;

private:
    int height_ = 0;
    int width_ = 0;
    GridPoint center_;
    int side_ = 0;
    std::vector<std::uint8_t> grid_;
};

// Zero rectangle cx-r..cx+r-1 by cy-r..cy+r-1 clipped to the grid, ones
// elsewhere. Emits a warning on stderr when the hole covers the grid.
Mask make_mask(GridPoint center, int radius, int height, int width);

// Generalized hole of side s: cx-floor(s/2)..cx+ceil(s/2)-1, so s = 2r matches
// make_mask and odd sides are representable.
Mask make_mask_with_side(GridPoint center, int side, int height, int width);

// F * M broadcast over channels.
FeatureMap apply_mask(const FeatureMap& features, const Mask& mask);

// Per-channel mean over all H*W cells, masked zeros included.
std::vector<double> global_average_pool(const FeatureMap& features);

inline constexpr int kLandmarkCount = 5;

// Left eye, right eye, nose tip, left and right mouth corners.
using LandmarkSet = std::array<GridPoint, kLandmarkCount>;

// Universal landmark positions scaled to an H x W grid, rounded half-up.
LandmarkSet default_landmarks(int height, int width);

// Five masks with hole side s centered on the default landmarks.
std::array<Mask, kLandmarkCount> default_landmark_masks_with_side(int height, int width, int side);

// Same with side 2r; requires r >= 1 and H, W >= 2r.
std::array<Mask, kLandmarkCount> default_landmark_masks(int height, int width, int radius);

// Rows of '0'/'1' characters, one line per row.
std::string mask_to_text(const Mask& mask);

// A header line "# mask <i> center=<x>,<y> side=<s>" before each grid, blank
// line between masks.
std::string mask_set_to_text(std::span<const Mask> masks);

}  // namespace ordinalenc
