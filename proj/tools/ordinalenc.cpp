// ordinalenc command-line tool.
//
// Exit codes: 0 success, 1 predicate failure / divergence / gradient breach,
// 2 usage error (bad flags, bad values, missing files).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "ordinalenc/benchmark.hpp"
#include "ordinalenc/encoding.hpp"
#include "ordinalenc/errors.hpp"
#include "ordinalenc/gradcheck.hpp"
#include "ordinalenc/maskout.hpp"
#include "ordinalenc/metrics.hpp"
#include "ordinalenc/model.hpp"
#include "ordinalenc/synth_data.hpp"
#include "ordinalenc/trainer.hpp"

namespace fs = std::filesystem;
using namespace ordinalenc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

Family family_or_throw(const std::string& name) {
    const auto f = parse_family(name);
    if (!f) throw UsageError("unknown family '" + name + "' (expected ldl, hard or soft)");
    return *f;
}

Protocol protocol_or_throw(const std::string& name) {
    if (name == "RS" || name == "rs") return Protocol::RandomSplit;
    if (name == "SE" || name == "se") return Protocol::SubjectExclusive;
    throw UsageError("unknown protocol '" + name + "' (expected RS or SE)");
}

// Reads key=value lines ('#' comments, blank lines ignored) and turns them
// into "--key=value" arguments placed before the command-line ones, so flags
// given explicitly win.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
    std::vector<std::string> out;
    std::vector<std::string> from_file;
    std::size_t insert_at = std::string::npos;
    for (std::size_t i = 0; i < args.size(); ++i) {
        std::string path;
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) throw UsageError("--config needs a path");
            path = args[++i];
        } else if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
        } else {
            out.push_back(args[i]);
            continue;
        }
        std::ifstream in(path);
        if (!in) throw UsageError("cannot read config file " + path);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const auto first = line.find_first_not_of(" \t\r");
            if (first == std::string::npos) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos) {
                throw UsageError(path + ":" + std::to_string(lineno) + ": expected key=value");
            }
            auto trim = [](std::string s) {
                const auto a = s.find_first_not_of(" \t\r");
                const auto b = s.find_last_not_of(" \t\r");
                return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
            };
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            if (key.empty()) throw UsageError(path + ":" + std::to_string(lineno) + ": empty key");
            from_file.push_back("--" + key + "=" + value);
        }
        // Subcommand name is out[0]; config values go right after it.
        insert_at = 1;
    }
    if (insert_at != std::string::npos && !out.empty()) {
        out.insert(out.begin() + static_cast<std::ptrdiff_t>(std::min(insert_at, out.size())), from_file.begin(),
                   from_file.end());
    }
    return out;
}

// ---- option groups shared by several commands ----

struct PopulationFlags {
    PopulationSpec spec;
    void add(CLI::App* cmd) {
        cmd->add_option("--subjects", spec.subjects, "Number of subjects")->capture_default_str();
        cmd->add_option("--min-images", spec.min_images, "Fewest images per subject")->capture_default_str();
        cmd->add_option("--max-images", spec.max_images, "Most images per subject")->capture_default_str();
        cmd->add_option("--cluster-width", spec.cluster_width, "Image ages spread +/- this around the base age")
            ->capture_default_str();
        cmd->add_option("--in-channels", spec.in_channels, "Input channels")->capture_default_str();
        cmd->add_option("--height", spec.height, "Input grid height")->capture_default_str();
        cmd->add_option("--width", spec.width, "Input grid width")->capture_default_str();
        cmd->add_option("--noise", spec.noise, "Per-image noise std")->capture_default_str();
        cmd->add_option("--identity-scale", spec.identity_scale, "Per-subject identity offset std")
            ->capture_default_str();
        cmd->add_option("--embedding-seed", spec.embedding_seed, "Seed of the fixed age embedding")
            ->capture_default_str();
    }
};

struct EncodingFlags {
    std::string family = "soft";
    double sigma = 3.6;
    int max_age = kDefaultMaxAge;
    void add(CLI::App* cmd, bool with_family = true) {
        if (with_family) cmd->add_option("--family", family, "ldl, hard or soft")->capture_default_str();
        cmd->add_option("--sigma", sigma, "Encoding sigma in years (LDL and soft)")->capture_default_str();
        cmd->add_option("--max-age", max_age, "Largest age K")->capture_default_str();
    }
    EncodingConfig config() const {
        EncodingConfig cfg;
        cfg.family = family_or_throw(family);
        cfg.sigma = sigma;
        cfg.max_age = max_age;
        return cfg;
    }
};

// ---- encode / decode ----

int run_encode(const EncodingFlags& enc, int age) {
    const EncodingConfig cfg = enc.config();
    const EncodedTarget target = encode(age, cfg);
    std::cout << "index,value\n";
    for (std::size_t i = 0; i < target.values.size(); ++i) {
        std::cout << (i + 1) << ',' << fmt17(target.values[i]) << '\n';
    }
    return kExitOk;
}

std::vector<double> read_value_column(std::istream& in) {
    std::vector<double> values;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (first && line == "index,value") {
            first = false;
            continue;
        }
        first = false;
        const auto comma = line.find(',');
        const std::string field = comma == std::string::npos ? line : line.substr(comma + 1);
        try {
            std::size_t used = 0;
            values.push_back(std::stod(field, &used));
            if (used != field.size()) throw std::invalid_argument(field);
        } catch (const std::exception&) {
            throw UsageError("not a number: '" + field + "'");
        }
    }
    return values;
}

int run_decode(const EncodingFlags& enc, const std::string& input) {
    const EncodingConfig cfg = enc.config();
    std::vector<double> values;
    if (input.empty() || input == "-") {
        values = read_value_column(std::cin);
    } else {
        std::ifstream in(input);
        if (!in) throw UsageError("cannot read " + input);
        values = read_value_column(in);
    }
    if (values.size() != cfg.target_length()) {
        throw UsageError("expected " + std::to_string(cfg.target_length()) + " values, got " +
                         std::to_string(values.size()));
    }
    std::cout << "family,age\n" << family_name(cfg.family) << ',';
    switch (cfg.family) {
        case Family::LDL:
            std::cout << fmt17(decode_ldl(values)) << '\n';
            break;
        case Family::HardRank: {
            std::vector<int> bits;
            for (double v : values) bits.push_back(v > 0.5 ? 1 : 0);
            std::cout << decode_hard_rank(bits) << '\n';
            break;
        }
        case Family::SoftRank: {
            // Encoded values are the "not older" probabilities.
            std::vector<PairProbs> pairs;
            for (double v : values) pairs.emplace_back(v, 1.0 - v);
            std::cout << decode_soft_rank(pairs) << '\n';
            break;
        }
    }
    return kExitOk;
}

// ---- gradcheck ----

int run_gradcheck_cmd(const std::string& family, std::uint64_t seed, int trials, bool perturb) {
    if (trials < 1) throw UsageError("--trials must be at least 1");
    GradCheckOptions opts;
    opts.seed = seed;
    opts.trials = trials;
    opts.perturb = perturb;
    std::optional<Family> only;
    if (!family.empty() && family != "all") only = family_or_throw(family);
    const auto results = run_gradcheck(opts, only);
    double worst = 0.0;
    bool ok = true;
    std::printf("suite,trials,compared,skipped,worst_rel_error,status\n");
    for (const auto& r : results) {
        std::printf("%s,%d,%zu,%zu,%.3e,%s\n", r.suite.c_str(), r.trials, r.compared, r.skipped, r.worst_error,
                    r.passed ? "pass" : "FAIL");
        worst = std::max(worst, r.worst_error);
        ok = ok && r.passed;
    }
    std::printf("worst relative error %.3e (threshold %.0e): %s\n", worst, opts.threshold, ok ? "PASS" : "FAIL");
    return ok ? kExitOk : kExitFail;
}

// ---- mask ----

int run_mask(int height, int width, int side) {
    if (height < 1 || width < 1) throw UsageError("grid dims must be positive");
    if (side < 1) throw UsageError("--side must be positive");
    const auto masks = default_landmark_masks_with_side(height, width, side);
    std::cout << mask_set_to_text(masks);
    return kExitOk;
}

// ---- gen-data ----

int run_gen_data(PopulationSpec population, std::uint64_t seed, const std::string& protocol, int folds,
                 double test_fraction, const std::string& out) {
    population.seed = seed;
    SplitSpec split_spec;
    split_spec.protocol = protocol_or_throw(protocol);
    split_spec.folds = folds;
    split_spec.test_fraction = test_fraction;
    split_spec.train_fraction = 1.0 - test_fraction;
    split_spec.seed = seed;
    const SyntheticDataset ds = generate(population);
    save_dataset(out, ds, split_spec);
    std::cerr << "wrote " << ds.samples.size() << " samples from " << ds.subjects.size() << " subjects to " << out
              << '\n';
    return kExitOk;
}

// ---- train / eval ----

struct FoldData {
    std::vector<Sample> train;
    std::vector<Sample> test;
};

FoldData load_fold(const std::string& dir, int fold) {
    if (!fs::is_directory(dir)) throw UsageError("dataset directory not found: " + dir);
    const LoadedDataset loaded = load_dataset(dir);
    if (fold < 0 || fold >= loaded.split_spec.folds) {
        throw UsageError("--fold must lie in [0, " + std::to_string(loaded.split_spec.folds) + ")");
    }
    FoldData out;
    for (std::size_t i = 0; i < loaded.dataset.samples.size(); ++i) {
        const int f = loaded.fold_of_sample[i];
        if (f == fold) {
            out.test.push_back(loaded.dataset.samples[i]);
        } else {
            out.train.push_back(loaded.dataset.samples[i]);
        }
    }
    return out;
}

struct TrainFlags {
    TrainConfig cfg;
    std::vector<std::string> drops;
    void add(CLI::App* cmd) {
        cmd->add_option("--lr", cfg.lr, "Initial learning rate")->capture_default_str();
        cmd->add_option("--momentum", cfg.momentum, "SGD momentum")->capture_default_str();
        cmd->add_option("--weight-decay", cfg.weight_decay, "L2 weight decay")->capture_default_str();
        cmd->add_option("--batch-size", cfg.batch_size, "Mini-batch size")->capture_default_str();
        cmd->add_option("--epochs", cfg.epochs, "Training epochs")->capture_default_str();
        cmd->add_option("--lr-drops", drops,
                        "Comma list of epoch:factor, or 'none' (default: x0.1 at 80% and 90% of the epochs)")
            ->delimiter(',')
            ->type_name("E:F,...");
        cmd->add_option("--lambda", cfg.lambda, "Auxiliary loss weight")->capture_default_str();
        cmd->add_option("--aux-start", cfg.aux_start_epoch, "0-based epoch the auxiliary heads switch on")
            ->capture_default_str();
        cmd->add_option("--mask-side", cfg.mask_side, "Side of the square Maskout hole")->capture_default_str();
        cmd->add_option("--feature-channels", cfg.feature_channels, "Backbone output channels")
            ->capture_default_str();
        cmd->add_flag("!--no-flip", cfg.flip_average, "Disable flip averaging at evaluation");
        cmd->add_flag("--progress", cfg.progress, "Print one line per epoch to stderr");
    }
};

std::vector<LrDrop> parse_drops(const std::vector<std::string>& items, int epochs) {
    if (items.empty()) {
        if (epochs < 10) return {};
        return {{epochs * 8 / 10, 0.1}, {epochs * 9 / 10, 0.1}};
    }
    std::vector<LrDrop> drops;
    for (const auto& item : items) {
        if (item == "none") continue;
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw UsageError("lr drop '" + item + "' is not epoch:factor");
        try {
            drops.push_back({std::stoi(item.substr(0, colon)), std::stod(item.substr(colon + 1))});
        } catch (const std::exception&) {
            throw UsageError("lr drop '" + item + "' is not epoch:factor");
        }
    }
    return drops;
}

int run_train(TrainConfig cfg, const EncodingFlags& enc, const std::string& data, int fold, std::uint64_t seed,
              const std::string& checkpoint, const std::string& report_path) {
    cfg.encoding = enc.config();
    cfg.seed = seed;
    cfg.validate();
    const FoldData fd = load_fold(data, fold);
    if (fd.train.empty()) throw UsageError("fold " + std::to_string(fold) + " leaves no training samples");
    try {
        TrainResult result = train(DataSplits{fd.train, {}, fd.test}, cfg);
        save_checkpoint(checkpoint, result.params);
        const std::string json = report_to_json(result.report);
        if (!report_path.empty()) {
            std::ofstream out(report_path);
            if (!out) throw UsageError("cannot write " + report_path);
            out << json << '\n';
        }
        std::cout << kMetricCsvHeader << '\n';
        if (!result.report.epochs.empty()) {
            std::cout << metric_csv_row("mae", "train", fold, result.report.epochs.back().train_mae) << '\n';
        }
        if (!fd.test.empty()) {
            std::cout << metric_csv_row("mae", "test", fold, result.report.test_mae) << '\n'
                      << metric_csv_row("epsilon_error", "test", fold, result.report.test_epsilon_error) << '\n';
        }
        return kExitOk;
    } catch (const TrainingDiverged& e) {
        std::cerr << "training diverged: " << e.what() << '\n';
        save_checkpoint(checkpoint, e.last_good());
        std::cerr << "last good parameters written to " << checkpoint << '\n';
        return kExitFail;
    }
}

int run_eval(const std::string& checkpoint, const std::string& family, int max_age, const std::string& data,
             int fold, const std::string& which, bool flip) {
    if (!fs::is_regular_file(checkpoint)) throw UsageError("checkpoint not found: " + checkpoint);
    const ModelParams params = load_checkpoint(checkpoint);
    const int d = params.dims().output_dim;
    EncodingConfig enc;
    enc.max_age = max_age;
    std::vector<Family> candidates;
    for (Family f : {Family::LDL, Family::HardRank, Family::SoftRank}) {
        enc.family = f;
        if (static_cast<int>(enc.output_dim()) == d) candidates.push_back(f);
    }
    if (!family.empty()) {
        enc.family = family_or_throw(family);
        if (static_cast<int>(enc.output_dim()) != d) {
            throw UsageError("checkpoint has " + std::to_string(d) + " outputs, which does not match family '" +
                             family + "' with max age " + std::to_string(max_age));
        }
    } else if (candidates.size() == 1) {
        enc.family = candidates.front();
    } else if (candidates.empty()) {
        throw UsageError("checkpoint output size " + std::to_string(d) + " fits no family for max age " +
                         std::to_string(max_age));
    } else {
        throw UsageError("checkpoint output size is ambiguous for this max age; pass --family");
    }
    if (enc.family == Family::LDL) enc.sigma = 1.0;  // only decoding happens here

    const FoldData fd = load_fold(data, fold);
    std::cout << kMetricCsvHeader << '\n';
    auto report = [&](const std::string& split_name, const std::vector<Sample>& samples) {
        if (samples.empty()) return;
        if (samples.front().input.channels() != params.dims().in_channels ||
            samples.front().input.height() != params.dims().height ||
            samples.front().input.width() != params.dims().width) {
            throw UsageError("dataset input dims do not match the checkpoint");
        }
        const EvalResult r = evaluate(params, samples, enc, flip);
        std::cout << metric_csv_row("mae", split_name, fold, r.mae) << '\n'
                  << metric_csv_row("epsilon_error", split_name, fold, r.epsilon_error) << '\n';
    };
    if (which == "train" || which == "all") report("train", fd.train);
    if (which == "test" || which == "all") report("test", fd.test);
    return kExitOk;
}

// ---- benchmark ----

int run_benchmark_cmd(const std::string& suite_name_arg, int seeds, const std::string& out_dir, bool quiet) {
    const auto suite = parse_suite(suite_name_arg);
    if (!suite) throw UsageError("unknown suite '" + suite_name_arg + "'");
    if (seeds < 1) throw UsageError("--seeds must be at least 1");
    const BenchmarkSpec& spec = standard_benchmark_spec();
    const int threads = benchmark_threads();
    if (!quiet) {
        std::cerr << "suite " << suite_name(*suite) << ", spec v" << spec.version << ", " << seeds << " seeds, "
                  << threads << " worker(s)\n";
    }
    const auto total = plan_suite(*suite, spec, seeds).size();
    std::size_t done = 0;
    const BenchmarkResult result = run_benchmark(*suite, seeds, spec, threads, [&](const RunResult& r) {
        ++done;
        if (quiet) return;
        std::fprintf(stderr, "[%zu/%zu] %s %s sigma=%g lambda=%g seed=%d: %s\n", done, total, r.spec.method.c_str(),
                     protocol_name(r.spec.protocol).c_str(), r.spec.sigma, r.spec.lambda, r.spec.seed,
                     r.failed ? ("failed: " + r.error).c_str() : ("mae=" + std::to_string(r.test_mae)).c_str());
    });
    const std::string runs = runs_csv(result);
    const std::string summary = summary_csv(result);
    const std::string verdict = predicate_text(result);
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        auto write = [&](const std::string& name, const std::string& text) {
            std::ofstream out(fs::path(out_dir) / name);
            if (!out) throw UsageError("cannot write into " + out_dir);
            out << text;
        };
        write("runs.csv", runs);
        write("summary.csv", summary);
        write("predicate.txt", verdict);
    }
    std::cout << summary << verdict;
    if (result.too_many_failures) {
        std::cout << result.failed_runs << " of " << result.runs.size() << " runs failed\n";
        return kExitFail;
    }
    return result.predicate.holds ? kExitOk : kExitFail;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Ordinal age encodings, Maskout and the synthetic benchmark"};
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.set_help_all_flag("--help-all", "Help for every command");
    const std::string config_help = "key=value file; keys are flag names without dashes, flags win";

    // encode
    auto* encode_cmd = app.add_subcommand("encode", "Print an age's encoding as index,value CSV");
    EncodingFlags encode_flags;
    int encode_age = 0;
    encode_flags.add(encode_cmd);
    encode_cmd->add_option("--age", encode_age, "Age in [1, max-age]")->required();
    encode_cmd->add_option("--config", config_help);

    // decode
    auto* decode_cmd = app.add_subcommand("decode", "Decode an index,value CSV (stdin or --input) to an age");
    EncodingFlags decode_flags;
    std::string decode_input;
    decode_flags.add(decode_cmd);
    decode_cmd->add_option("--input", decode_input, "CSV file, '-' for stdin");
    decode_cmd->add_option("--config", config_help);

    // gradcheck
    auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of losses and the model");
    std::string grad_family = "all";
    std::uint64_t grad_seed = 0;
    int grad_trials = 20;
    bool grad_perturb = false;
    grad_cmd->add_option("--family", grad_family, "ldl, hard, soft or all")->capture_default_str();
    grad_cmd->add_option("--seed", grad_seed, "Random seed")->capture_default_str();
    grad_cmd->add_option("--trials", grad_trials, "Random trials per suite")->capture_default_str();
    grad_cmd->add_flag("--perturb", grad_perturb)->group("");  // negative-control hook
    grad_cmd->add_option("--config", config_help);

    // mask
    auto* mask_cmd = app.add_subcommand("mask", "Print the five landmark masks as 0/1 grids");
    int mask_height = 7, mask_width = 7, mask_side = 4;
    mask_cmd->add_option("--height", mask_height, "Grid height")->capture_default_str();
    mask_cmd->add_option("--width", mask_width, "Grid width")->capture_default_str();
    mask_cmd->add_option("--side", mask_side, "Hole side length")->capture_default_str();
    mask_cmd->add_option("--config", config_help);

    // gen-data
    auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic dataset directory");
    PopulationFlags gen_pop;
    std::uint64_t gen_seed = 0;
    std::string gen_protocol = "SE", gen_out;
    int gen_folds = 5;
    double gen_test_fraction = 0.2;
    gen_pop.add(gen_cmd);
    gen_cmd->add_option("--max-age", gen_pop.spec.max_age, "Largest age K")->capture_default_str();
    gen_cmd->add_option("--seed", gen_seed, "Random seed")->capture_default_str();
    gen_cmd->add_option("--protocol", gen_protocol, "RS or SE")->capture_default_str();
    gen_cmd->add_option("--folds", gen_folds, "Number of folds")->capture_default_str();
    gen_cmd->add_option("--test-fraction", gen_test_fraction, "Test share per fold")->capture_default_str();
    gen_cmd->add_option("--out", gen_out, "Output directory")->required();
    gen_cmd->add_option("--config", config_help);

    // train
    auto* train_cmd = app.add_subcommand("train", "Train on one fold of a dataset directory");
    TrainFlags train_flags;
    EncodingFlags train_enc;
    std::string train_data, train_ckpt, train_report;
    int train_fold = 0;
    std::uint64_t train_seed = 0;
    train_flags.add(train_cmd);
    train_enc.add(train_cmd);
    train_cmd->add_option("--data", train_data, "Dataset directory from gen-data")->required();
    train_cmd->add_option("--fold", train_fold, "Held-out fold")->capture_default_str();
    train_cmd->add_option("--seed", train_seed, "Random seed")->capture_default_str();
    train_cmd->add_option("--checkpoint", train_ckpt, "Checkpoint output path")->required();
    train_cmd->add_option("--report", train_report, "JSON report output path");
    train_cmd->add_option("--config", config_help);

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset fold (metric CSV)");
    std::string eval_ckpt, eval_family, eval_data, eval_split = "test";
    int eval_max_age = kDefaultMaxAge, eval_fold = 0;
    bool eval_flip = true;
    eval_cmd->add_option("--checkpoint", eval_ckpt, "Checkpoint path")->required();
    eval_cmd->add_option("--family", eval_family, "Expected family; inferred from the checkpoint when omitted");
    eval_cmd->add_option("--max-age", eval_max_age, "Largest age K")->capture_default_str();
    eval_cmd->add_option("--data", eval_data, "Dataset directory")->required();
    eval_cmd->add_option("--fold", eval_fold, "Held-out fold")->capture_default_str();
    eval_cmd->add_option("--split", eval_split, "test, train or all")
        ->check(CLI::IsMember({"test", "train", "all"}))
        ->capture_default_str();
    eval_cmd->add_flag("!--no-flip", eval_flip, "Disable flip averaging");
    eval_cmd->add_option("--config", config_help);

    // benchmark
    auto* bench_cmd = app.add_subcommand("benchmark", "Run a benchmark suite on the standard synthetic spec");
    std::string bench_suite, bench_out;
    int bench_seeds = 5;
    bool bench_quiet = false;
    bench_cmd->add_option("--suite", bench_suite, "encodings-se, encodings-rs, sigma-sweep or maskout")->required();
    bench_cmd->add_option("--seeds", bench_seeds, "Number of seeds")->capture_default_str();
    bench_cmd->add_option("--out", bench_out, "Directory for runs.csv, summary.csv, predicate.txt");
    bench_cmd->add_flag("--quiet", bench_quiet, "No per-run progress on stderr");
    bench_cmd->add_option("--config", config_help);

    try {
        const auto args = expand_config(std::vector<std::string>(argv + 1, argv + argc));
        // CLI11 takes the argument vector in reverse.
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        if (*encode_cmd) return run_encode(encode_flags, encode_age);
        if (*decode_cmd) return run_decode(decode_flags, decode_input);
        if (*grad_cmd) return run_gradcheck_cmd(grad_family, grad_seed, grad_trials, grad_perturb);
        if (*mask_cmd) return run_mask(mask_height, mask_width, mask_side);
        if (*gen_cmd) {
            return run_gen_data(gen_pop.spec, gen_seed, gen_protocol, gen_folds, gen_test_fraction, gen_out);
        }
        if (*train_cmd) {
            TrainConfig cfg = train_flags.cfg;
            cfg.lr_drops = parse_drops(train_flags.drops, cfg.epochs);
            return run_train(cfg, train_enc, train_data, train_fold, train_seed, train_ckpt, train_report);
        }
        if (*eval_cmd) {
            return run_eval(eval_ckpt, eval_family, eval_max_age, eval_data, eval_fold, eval_split, eval_flip);
        }
        if (*bench_cmd) return run_benchmark_cmd(bench_suite, bench_seeds, bench_out, bench_quiet);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ContractError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const TrainingDiverged& e) {
        std::cerr << "training diverged: " << e.what() << '\n';
        return kExitFail;
    } catch (const NumericInputError& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return kExitFail;
    }
    return kExitUsage;
}
