#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ordinalenc/encoding.hpp"
#include "ordinalenc/synth_data.hpp"
#include "ordinalenc/trainer.hpp"

namespace ordinalenc {

enum class Suite { EncodingsSE, EncodingsRS, SigmaSweep, Maskout };

std::string suite_name(Suite suite);
std::optional<Suite> parse_suite(std::string_view name);

struct MaskoutSetting {
    double lambda = 0.0;
    int mask_side = 4;
};

// Everything a suite needs besides the seed count. The built-in standard
// spec is versioned; bump `version` whenever any field changes.
struct BenchmarkSpec {
    int version = 0;
    PopulationSpec population;
    double train_fraction = 0.8;
    int folds = 5;
    int fold = 0;  // the fold each run trains and tests on
    TrainConfig training;
    // Encoding suites: sigma per family and protocol.
    double soft_sigma_se = 3.6;
    double ldl_sigma_se = 3.6;
    double soft_sigma_rs = 0.4;
    double ldl_sigma_rs = 0.4;
    std::vector<double> sigma_grid;  // sigma-sweep, Soft-ranking and LDL
    double maskout_sigma = 3.6;      // Soft-ranking, SE
    std::vector<MaskoutSetting> maskout_settings;  // first entry is the baseline
    MaskoutSetting maskout_target;                 // compared against the baseline
};

const BenchmarkSpec& standard_benchmark_spec();

struct RunSpec {
    std::size_t index = 0;
    std::string method;  // e.g. "soft", "ldl", "hard", "maskout"
    Protocol protocol = Protocol::SubjectExclusive;
    Family family = Family::SoftRank;
    double sigma = 0.0;
    double lambda = 0.0;
    int mask_side = 0;
    int seed = 0;  // 0-based seed index
};

struct RunResult {
    RunSpec spec;
    bool failed = false;
    std::string error;
    double test_mae = 0.0;
    double test_epsilon_error = 0.0;
    double train_mae = 0.0;  // last epoch
};

struct MethodSummary {
    std::string method;
    Protocol protocol = Protocol::SubjectExclusive;
    double sigma = 0.0;
    double lambda = 0.0;
    int mask_side = 0;
    int runs = 0;
    int failed = 0;
    double mean_mae = 0.0;  // over successful runs
    double std_mae = 0.0;   // sample std; 0 with fewer than two runs
};

struct PredicateOutcome {
    std::string description;
    int seeds_total = 0;
    int seeds_passing = 0;
    int seeds_required = 0;
    bool holds = false;
    // Per seed: detail string such as "RS sigma=0.4 SE sigma=2.0".
    std::vector<std::string> per_seed;
};

struct BenchmarkResult {
    Suite suite = Suite::EncodingsSE;
    int seeds = 0;
    std::vector<RunResult> runs;  // in plan order
    std::vector<MethodSummary> summary;
    PredicateOutcome predicate;
    int failed_runs = 0;
    bool too_many_failures = false;  // more than 20% of runs failed
};

// Seed-majority: at least 4 of every 5 seeds, rounded up.
int required_seed_majority(int seeds);

std::vector<RunSpec> plan_suite(Suite suite, const BenchmarkSpec& spec, int seeds);

// Trains one planned run. Divergence and numeric failures are reported in
// the result, not thrown.
RunResult execute_run(const RunSpec& run, const BenchmarkSpec& spec);

using RunCallback = std::function<void(const RunResult&)>;

// Runs the plan on up to `threads` workers. Results and summaries come back
// in plan order whatever the scheduling.
BenchmarkResult run_benchmark(Suite suite, int seeds, const BenchmarkSpec& spec, int threads,
                              const RunCallback& on_done = {});

// ORDINALENC_THREADS if set and positive, else the hardware concurrency.
int benchmark_threads();

std::string runs_csv(const BenchmarkResult& result);
std::string summary_csv(const BenchmarkResult& result);
// One line per seed plus a verdict line.
std::string predicate_text(const BenchmarkResult& result);

}  // namespace ordinalenc
