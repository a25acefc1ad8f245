#include "ordinalenc/metrics.hpp"

#include <cmath>
#include <cstdio>

#include "ordinalenc/errors.hpp"

namespace ordinalenc {

double mae(std::span<const Prediction> predictions) {
    if (predictions.empty()) throw ContractError("mae: no predictions");
    double total = 0.0;
    for (const auto& p : predictions) total += std::abs(p.predicted - p.age);
    return total / static_cast<double>(predictions.size());
}

double epsilon_error(std::span<const Prediction> predictions) {
    if (predictions.empty()) throw ContractError("epsilon_error: no predictions");
    double total = 0.0;
    for (const auto& p : predictions) {
        if (!(p.sigma_n > 0.0)) throw ContractError("epsilon_error: sigma_n must be positive");
        const double d = p.predicted - p.age;
        total += 1.0 - std::exp(-(d * d) / (2.0 * p.sigma_n * p.sigma_n));
    }
    return total / static_cast<double>(predictions.size());
}

BandTable mae_by_age_band(std::span<const Prediction> predictions, std::span<const int> edges, int max_age) {
    if (edges.empty() || edges.front() != 1) throw ContractError("mae_by_age_band: bands must start at age 1");
    for (std::size_t i = 1; i < edges.size(); ++i) {
        if (edges[i] <= edges[i - 1]) throw ContractError("mae_by_age_band: edges must increase");
    }
    if (edges.back() > max_age) throw ContractError("mae_by_age_band: edge beyond max age");

    BandTable table;
    std::vector<double> sums(edges.size(), 0.0);
    for (std::size_t i = 0; i < edges.size(); ++i) {
        const int hi = i + 1 < edges.size() ? edges[i + 1] - 1 : max_age;
        table.bands.push_back({edges[i], hi, std::nullopt, 0});
    }
    for (const auto& p : predictions) {
        for (std::size_t i = 0; i < table.bands.size(); ++i) {
            if (p.age >= table.bands[i].lo && p.age <= table.bands[i].hi) {
                sums[i] += std::abs(p.predicted - p.age);
                ++table.bands[i].count;
                break;
            }
        }
    }
    for (std::size_t i = 0; i < table.bands.size(); ++i) {
        if (table.bands[i].count > 0) table.bands[i].mae = sums[i] / static_cast<double>(table.bands[i].count);
    }
    table.count = predictions.size();
    table.overall = mae(predictions);
    return table;
}

std::string metric_csv_row(const std::string& metric, const std::string& split, int fold, double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return metric + "," + split + "," + std::to_string(fold) + "," + buf;
}

}  // namespace ordinalenc
