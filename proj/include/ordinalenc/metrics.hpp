#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ordinalenc {

struct Prediction {
    double predicted = 0.0;  // years
    int age = 0;             // ground truth, years
    double sigma_n = 1.0;    // annotation spread; only used by epsilon_error
};

double mae(std::span<const Prediction> predictions);

// Mean of 1 - exp(-(y_hat - y)^2 / (2 sigma_n^2)).
double epsilon_error(std::span<const Prediction> predictions);

struct AgeBand {
    int lo = 1;  // inclusive
    int hi = 1;  // inclusive
    std::optional<double> mae;  // absent when no sample falls in the band
    std::size_t count = 0;
};

struct BandTable {
    std::vector<AgeBand> bands;
    double overall = 0.0;
    std::size_t count = 0;
};

// `edges` are the inclusive lower bounds of consecutive bands, the last band
// running to max_age. Bands are assigned by ground-truth age. edges must start
// at 1 and be strictly increasing.
BandTable mae_by_age_band(std::span<const Prediction> predictions, std::span<const int> edges, int max_age);

// One `metric,split,fold,value` row, no trailing newline.
std::string metric_csv_row(const std::string& metric, const std::string& split, int fold, double value);
inline constexpr const char* kMetricCsvHeader = "metric,split,fold,value";

}  // namespace ordinalenc
