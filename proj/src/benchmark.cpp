#include "ordinalenc/benchmark.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "ordinalenc/errors.hpp"
#include "ordinalenc/random.hpp"

namespace ordinalenc {
namespace {

constexpr std::uint64_t kDataSalt = 11;
constexpr std::uint64_t kSplitSalt = 12;
constexpr std::uint64_t kTrainSalt = 13;

BenchmarkSpec make_standard_spec() {
    BenchmarkSpec s;
    s.version = 2;

    s.population.subjects = 200;
    s.population.min_images = 3;
    s.population.max_images = 8;
    s.population.cluster_width = 3;
    s.population.max_age = 101;
    s.population.in_channels = 16;
    s.population.height = 7;
    s.population.width = 7;
    s.population.noise = 0.2;
    s.population.identity_scale = 0.6;
    s.population.embedding_seed = 7;

    s.train_fraction = 0.8;
    s.folds = 5;
    s.fold = 0;

    TrainConfig& t = s.training;
    t.lr = 0.2;
    t.momentum = 0.9;
    t.weight_decay = 0.0;
    t.batch_size = 64;
    t.epochs = 200;
    t.lr_drops = {{160, 0.1}, {180, 0.1}};
    t.lambda = 0.0;
    t.aux_start_epoch = 10;
    t.mask_side = 4;
    t.feature_channels = 64;
    t.flip_average = true;

    s.soft_sigma_se = 3.6;
    s.ldl_sigma_se = 3.6;
    s.soft_sigma_rs = 0.4;
    s.ldl_sigma_rs = 0.4;
    s.sigma_grid = {0.4, 1.2, 2.0, 2.8, 3.6};
    s.maskout_sigma = 3.6;
    s.maskout_settings = {{0.0, 4}, {0.3, 4}};
    s.maskout_target = {0.3, 4};
    return s;
}

double mean_of(const std::vector<double>& v) {
    double total = 0.0;
    for (double x : v) total += x;
    return v.empty() ? 0.0 : total / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string fmt_sigma(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

// Key identifying a method within a suite, independent of the seed.
std::string method_key(const RunSpec& r) {
    return r.method + "|" + protocol_name(r.protocol) + "|" + fmt_sigma(r.sigma) + "|" + fmt_sigma(r.lambda) + "|" +
           std::to_string(r.mask_side);
}

void add_run(std::vector<RunSpec>& plan, std::string method, Protocol protocol, Family family, double sigma,
             double lambda, int side, int seed) {
    RunSpec r;
    r.index = plan.size();
    r.method = std::move(method);
    r.protocol = protocol;
    r.family = family;
    r.sigma = sigma;
    r.lambda = lambda;
    r.mask_side = side;
    r.seed = seed;
    plan.push_back(std::move(r));
}

void add_encodings(std::vector<RunSpec>& plan, const BenchmarkSpec& spec, Protocol protocol, int seed) {
    const bool se = protocol == Protocol::SubjectExclusive;
    add_run(plan, "ldl", protocol, Family::LDL, se ? spec.ldl_sigma_se : spec.ldl_sigma_rs, 0.0, 0, seed);
    add_run(plan, "hard", protocol, Family::HardRank, 0.0, 0.0, 0, seed);
    add_run(plan, "soft", protocol, Family::SoftRank, se ? spec.soft_sigma_se : spec.soft_sigma_rs, 0.0, 0, seed);
}

// Successful test MAE of the run matching `pred` for one seed.
std::optional<double> find_mae(const std::vector<RunResult>& runs, int seed,
                               const std::function<bool(const RunSpec&)>& pred) {
    for (const auto& r : runs) {
        if (r.spec.seed == seed && !r.failed && pred(r.spec)) return r.test_mae;
    }
    return std::nullopt;
}

// Smallest-MAE sigma of one protocol's sweep for one seed; ties go to the
// smaller sigma.
std::optional<double> best_sigma(const std::vector<RunResult>& runs, int seed, Protocol protocol) {
    std::optional<double> best;
    double best_mae = 0.0;
    for (const auto& r : runs) {
        if (r.spec.seed != seed || r.failed || r.spec.protocol != protocol) continue;
        if (!best || r.test_mae < best_mae) {
            best = r.spec.sigma;
            best_mae = r.test_mae;
        }
    }
    return best;
}

PredicateOutcome evaluate_predicate(Suite suite, const BenchmarkSpec& spec, const std::vector<RunResult>& runs,
                                    int seeds) {
    PredicateOutcome out;
    out.seeds_total = seeds;
    out.seeds_required = required_seed_majority(seeds);
    auto by_method = [](const char* name, Protocol p) {
        return [name, p](const RunSpec& r) { return r.method == name && r.protocol == p; };
    };
    for (int seed = 0; seed < seeds; ++seed) {
        bool pass = false;
        std::ostringstream detail;
        detail << "seed=" << seed;
        switch (suite) {
            case Suite::EncodingsSE:
            case Suite::EncodingsRS: {
                const Protocol p = suite == Suite::EncodingsSE ? Protocol::SubjectExclusive : Protocol::RandomSplit;
                const auto ldl = find_mae(runs, seed, by_method("ldl", p));
                const auto hard = find_mae(runs, seed, by_method("hard", p));
                const auto soft = find_mae(runs, seed, by_method("soft", p));
                if (ldl && hard && soft) {
                    detail << " ldl=" << fmt(*ldl) << " hard=" << fmt(*hard) << " soft=" << fmt(*soft);
                    pass = suite == Suite::EncodingsSE ? (*soft <= *ldl && *soft <= *hard)
                                                       : (*hard <= *ldl && *hard <= *soft);
                } else {
                    detail << " incomplete";
                }
                break;
            }
            case Suite::SigmaSweep: {
                const auto rs = best_sigma(runs, seed, Protocol::RandomSplit);
                const auto se = best_sigma(runs, seed, Protocol::SubjectExclusive);
                if (rs && se) {
                    detail << " best_sigma_rs=" << fmt_sigma(*rs) << " best_sigma_se=" << fmt_sigma(*se);
                    pass = *rs < *se;
                } else {
                    detail << " incomplete";
                }
                break;
            }
            case Suite::Maskout: {
                const auto& base = spec.maskout_settings.front();
                const auto& target = spec.maskout_target;
                auto match = [](const MaskoutSetting& m) {
                    return [m](const RunSpec& r) { return r.lambda == m.lambda && r.mask_side == m.mask_side; };
                };
                const auto b = find_mae(runs, seed, match(base));
                const auto t = find_mae(runs, seed, match(target));
                if (b && t) {
                    detail << " baseline=" << fmt(*b) << " maskout=" << fmt(*t);
                    pass = *t < *b;
                } else {
                    detail << " incomplete";
                }
                break;
            }
        }
        detail << (pass ? " pass" : " fail");
        out.per_seed.push_back(detail.str());
        if (pass) ++out.seeds_passing;
    }
    switch (suite) {
        case Suite::EncodingsSE:
            out.description = "SE: soft MAE <= ldl and <= hard";
            break;
        case Suite::EncodingsRS:
            out.description = "RS: hard MAE <= ldl and <= soft";
            break;
        case Suite::SigmaSweep:
            out.description = "soft: best sigma under RS < best sigma under SE";
            break;
        case Suite::Maskout:
            out.description = "maskout lambda=" + fmt_sigma(spec.maskout_target.lambda) +
                              " side=" + std::to_string(spec.maskout_target.mask_side) + " MAE < baseline";
            break;
    }
    out.holds = seeds > 0 && out.seeds_passing >= out.seeds_required;
    return out;
}

std::vector<MethodSummary> summarize(const std::vector<RunResult>& runs) {
    std::vector<MethodSummary> summary;
    std::map<std::string, std::size_t> slot;
    std::vector<std::vector<double>> values;
    for (const auto& r : runs) {
        const std::string key = method_key(r.spec);
        auto it = slot.find(key);
        if (it == slot.end()) {
            it = slot.emplace(key, summary.size()).first;
            MethodSummary m;
            m.method = r.spec.method;
            m.protocol = r.spec.protocol;
            m.sigma = r.spec.sigma;
            m.lambda = r.spec.lambda;
            m.mask_side = r.spec.mask_side;
            summary.push_back(m);
            values.emplace_back();
        }
        auto& m = summary[it->second];
        ++m.runs;
        if (r.failed) {
            ++m.failed;
        } else {
            values[it->second].push_back(r.test_mae);
        }
    }
    for (std::size_t i = 0; i < summary.size(); ++i) {
        summary[i].mean_mae = mean_of(values[i]);
        summary[i].std_mae = sample_std(values[i]);
    }
    return summary;
}

}  // namespace

std::string suite_name(Suite suite) {
    switch (suite) {
        case Suite::EncodingsSE:
            return "encodings-se";
        case Suite::EncodingsRS:
            return "encodings-rs";
        case Suite::SigmaSweep:
            return "sigma-sweep";
        case Suite::Maskout:
            return "maskout";
    }
    return "";
}

std::optional<Suite> parse_suite(std::string_view name) {
    for (Suite s : {Suite::EncodingsSE, Suite::EncodingsRS, Suite::SigmaSweep, Suite::Maskout}) {
        if (suite_name(s) == name) return s;
    }
    return std::nullopt;
}

const BenchmarkSpec& standard_benchmark_spec() {
    static const BenchmarkSpec spec = make_standard_spec();
    return spec;
}

int required_seed_majority(int seeds) { return (4 * seeds + 4) / 5; }

std::vector<RunSpec> plan_suite(Suite suite, const BenchmarkSpec& spec, int seeds) {
    if (seeds < 1) throw ContractError("benchmark: need at least one seed");
    std::vector<RunSpec> plan;
    for (int seed = 0; seed < seeds; ++seed) {
        switch (suite) {
            case Suite::EncodingsSE:
                add_encodings(plan, spec, Protocol::SubjectExclusive, seed);
                break;
            case Suite::EncodingsRS:
                add_encodings(plan, spec, Protocol::RandomSplit, seed);
                break;
            case Suite::SigmaSweep:
                for (Protocol p : {Protocol::RandomSplit, Protocol::SubjectExclusive}) {
                    for (double sigma : spec.sigma_grid) add_run(plan, "soft", p, Family::SoftRank, sigma, 0.0, 0, seed);
                }
                break;
            case Suite::Maskout:
                for (const auto& m : spec.maskout_settings) {
                    add_run(plan, m.lambda > 0.0 ? "maskout" : "baseline", Protocol::SubjectExclusive,
                            Family::SoftRank, spec.maskout_sigma, m.lambda, m.mask_side, seed);
                }
                break;
        }
    }
    return plan;
}

RunResult execute_run(const RunSpec& run, const BenchmarkSpec& spec) {
    RunResult result;
    result.spec = run;
    try {
        const auto seed = static_cast<std::uint64_t>(run.seed);
        PopulationSpec population = spec.population;
        population.seed = derive_seed(seed, kDataSalt);
        const SyntheticDataset data = generate(population);

        SplitSpec split_spec;
        split_spec.protocol = run.protocol;
        split_spec.train_fraction = spec.train_fraction;
        split_spec.test_fraction = 1.0 - spec.train_fraction;
        split_spec.folds = spec.folds;
        split_spec.seed = derive_seed(seed, kSplitSalt);
        const auto folds = split(data, split_spec);
        const Fold& fold = folds.at(static_cast<std::size_t>(spec.fold));
        const auto train_set = gather(data.samples, fold.train);
        const auto test_set = gather(data.samples, fold.test);

        TrainConfig cfg = spec.training;
        cfg.seed = derive_seed(seed, kTrainSalt);
        cfg.encoding.family = run.family;
        cfg.encoding.max_age = population.max_age;
        if (run.family != Family::HardRank) cfg.encoding.sigma = run.sigma;
        cfg.lambda = run.lambda;
        if (run.lambda > 0.0) {
            cfg.mask_side = run.mask_side;
        } else {
            // No auxiliary work for baselines.
            cfg.aux_start_epoch = cfg.epochs + 1;
        }
        cfg.progress = false;

        const TrainResult trained = train(DataSplits{train_set, {}, test_set}, cfg);
        result.test_mae = trained.report.test_mae;
        result.test_epsilon_error = trained.report.test_epsilon_error;
        result.train_mae = trained.report.epochs.empty() ? 0.0 : trained.report.epochs.back().train_mae;
        if (!std::isfinite(result.test_mae)) {
            result.failed = true;
            result.error = "non-finite test MAE";
        }
    } catch (const TrainingDiverged& e) {
        result.failed = true;
        result.error = e.what();
    } catch (const NumericInputError& e) {
        result.failed = true;
        result.error = e.what();
    }
    return result;
}

BenchmarkResult run_benchmark(Suite suite, int seeds, const BenchmarkSpec& spec, int threads,
                              const RunCallback& on_done) {
    const auto plan = plan_suite(suite, spec, seeds);
    BenchmarkResult out;
    out.suite = suite;
    out.seeds = seeds;
    out.runs.resize(plan.size());

    std::atomic<std::size_t> next{0};
    std::mutex done_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < plan.size(); i = next++) {
            RunResult r = execute_run(plan[i], spec);
            std::lock_guard lock(done_mutex);
            out.runs[i] = std::move(r);
            if (on_done) on_done(out.runs[i]);
        }
    };
    const int workers = std::clamp(threads, 1, static_cast<int>(plan.size()));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
    }

    for (const auto& r : out.runs) out.failed_runs += r.failed ? 1 : 0;
    out.too_many_failures = out.failed_runs * 5 > static_cast<int>(out.runs.size());
    out.summary = summarize(out.runs);
    out.predicate = evaluate_predicate(suite, spec, out.runs, seeds);
    return out;
}

int benchmark_threads() {
    if (const char* env = std::getenv("ORDINALENC_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<int>(std::min(v, 1024L));
    }
    return std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
}

std::string runs_csv(const BenchmarkResult& result) {
    std::ostringstream out;
    out << "run,suite,method,protocol,family,sigma,lambda,mask_side,seed,status,test_mae,test_epsilon_error,train_mae\n";
    for (const auto& r : result.runs) {
        const auto& s = r.spec;
        out << s.index << ',' << suite_name(result.suite) << ',' << s.method << ',' << protocol_name(s.protocol) << ','
            << family_name(s.family) << ',' << fmt_sigma(s.sigma) << ',' << fmt_sigma(s.lambda) << ',' << s.mask_side
            << ',' << s.seed << ',' << (r.failed ? "failed" : "ok") << ',';
        if (r.failed) {
            out << ",,\n";
        } else {
            out << fmt(r.test_mae) << ',' << fmt(r.test_epsilon_error) << ',' << fmt(r.train_mae) << '\n';
        }
    }
    return out.str();
}

std::string summary_csv(const BenchmarkResult& result) {
    std::ostringstream out;
    out << "suite,method,protocol,sigma,lambda,mask_side,runs,failed,mean_mae,std_mae\n";
    for (const auto& m : result.summary) {
        out << suite_name(result.suite) << ',' << m.method << ',' << protocol_name(m.protocol) << ','
            << fmt_sigma(m.sigma) << ',' << fmt_sigma(m.lambda) << ',' << m.mask_side << ',' << m.runs << ','
            << m.failed << ',' << fmt(m.mean_mae) << ',' << fmt(m.std_mae) << '\n';
    }
    return out.str();
}

std::string predicate_text(const BenchmarkResult& result) {
    std::ostringstream out;
    for (const auto& line : result.predicate.per_seed) out << line << '\n';
    const auto& p = result.predicate;
    out << (p.holds ? "PREDICATE HOLDS: " : "PREDICATE FAILS: ") << p.description << " in " << p.seeds_passing << '/'
        << p.seeds_total << " seeds (need " << p.seeds_required << ")\n";
    return out.str();
}

}  // namespace ordinalenc
