// Acceptance gate: one PASS/FAIL line per criterion.
// Usage: acceptance [criterion numbers...]   (default: all)

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ordinalenc/benchmark.hpp"
#include "ordinalenc/encoding.hpp"
#include "ordinalenc/gradcheck.hpp"
#include "ordinalenc/loss_grad.hpp"
#include "ordinalenc/maskout.hpp"
#include "ordinalenc/metrics.hpp"
#include "ordinalenc/random.hpp"

using namespace ordinalenc;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fixed(double v, int digits = 3) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

EncodingConfig cfg(Family f, int k, double sigma) {
    EncodingConfig c;
    c.family = f;
    c.max_age = k;
    c.sigma = sigma;
    return c;
}

Outcome round_trip() {
    const auto t0 = std::chrono::steady_clock::now();
    int hard_bad = 0, soft_bad = 0, ldl_bad = 0;
    double ldl_worst = 0.0;
    std::string first_ldl_miss;
    for (double s : {0.4, 1.0, 2.0, 3.6}) {
        for (int y = 1; y <= 101; ++y) {
            const auto h = hard_rank_encode(y, cfg(Family::HardRank, 101, 0.0));
            std::vector<int> bits;
            for (double v : h.values) bits.push_back(static_cast<int>(v));
            hard_bad += decode_hard_rank(bits) != y;

            const auto soft = soft_rank_encode(y, cfg(Family::SoftRank, 101, s));
            std::vector<PairProbs> pairs;
            for (double p : soft.values) pairs.emplace_back(p, 1.0 - p);
            soft_bad += decode_soft_rank(pairs) != y;

            const double err = std::abs(decode_ldl(ldl_encode(y, cfg(Family::LDL, 101, s)).values) - y);
            ldl_worst = std::max(ldl_worst, err);
            if (err > 0.5) {
                if (first_ldl_miss.empty()) first_ldl_miss = "y=" + std::to_string(y) + " sigma=" + fixed(s, 1);
                ++ldl_bad;
            }
        }
    }
    const double secs = seconds_since(t0);
    Outcome o;
    o.pass = hard_bad == 0 && soft_bad == 0 && ldl_bad == 0 && secs < 1.0;
    o.detail = "hard misses " + std::to_string(hard_bad) + ", soft misses " + std::to_string(soft_bad) +
               ", ldl beyond 0.5: " + std::to_string(ldl_bad) + " of 404 (worst " + fixed(ldl_worst) +
               (first_ldl_miss.empty() ? "" : ", first " + first_ldl_miss) + "), " + fixed(secs) + " s";
    return o;
}

Outcome gradient_suite() {
    const auto t0 = std::chrono::steady_clock::now();
    GradCheckOptions options;
    options.seed = 0;
    options.trials = 20;
    const auto results = run_gradcheck(options);
    const double secs = seconds_since(t0);
    double worst = 0.0;
    bool all = true;
    int model_suites = 0;
    for (const auto& r : results) {
        worst = std::max(worst, r.worst_error);
        all = all && r.passed && r.trials >= 20;
        model_suites += r.suite.rfind("model/", 0) == 0;
    }
    Outcome o;
    o.pass = all && model_suites == 6 && worst <= 1e-4 && secs < 30.0;
    o.detail = std::to_string(results.size()) + " suites, worst relative error " + std::to_string(worst) + ", " +
               fixed(secs) + " s";
    return o;
}

Outcome sigma_zero() {
    Rng rng(20240601);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int k = static_cast<int>(rng.uniform_int(2, 101));
        const int y = static_cast<int>(rng.uniform_int(1, k));
        std::vector<double> logits(2 * static_cast<std::size_t>(k));
        for (double& v : logits) v = 3.0 * rng.normal();
        const double loss = soft_rank_loss(logits, soft_rank_encode(y, cfg(Family::SoftRank, k, 1e-6))).value;
        // Pairwise cross-entropy against the step target, 1/2 on the age pair.
        double ce = 0.0;
        for (int j = 1; j <= k; ++j) {
            const double a = logits[2 * static_cast<std::size_t>(j - 1)];
            const double b = logits[2 * static_cast<std::size_t>(j - 1) + 1];
            const double m = std::max(a, b);
            const double lse = m + std::log(std::exp(a - m) + std::exp(b - m));
            const double t0 = j < y ? 0.0 : (j == y ? 0.5 : 1.0);
            ce -= t0 * (a - lse) + (1.0 - t0) * (b - lse);
        }
        ce /= k;
        worst = std::max(worst, std::abs(loss + std::log(2.0) / k - ce));
    }
    return {worst <= 1e-4, "100 draws, worst |difference| " + std::to_string(worst)};
}

Outcome mask_geometry() {
    const Mask m = make_mask({3, 3}, 2, 7, 7);
    int zeros = 0, block = 0;
    for (int x = 0; x < 7; ++x)
        for (int y = 0; y < 7; ++y) {
            zeros += m.at(x, y) == 0;
            block += m.at(x, y) == 0 && x >= 1 && x <= 4 && y >= 1 && y <= 4;
        }
    std::ifstream in(std::string(ORDINALENC_GOLDEN_DIR) + "/mask_7x7_center3_3_r2.txt");
    std::ostringstream golden;
    golden << in.rdbuf();
    const bool match = golden.str() == mask_to_text(m);
    return {zeros == 16 && block == 16 && match,
            std::to_string(zeros) + " zeros, " + std::to_string(block) + " inside rows/cols 1..4, golden " +
                (match ? "match" : "mismatch")};
}

Outcome epsilon_spot() {
    const std::vector<Prediction> one{{43.5, 40, 3.5}};
    const double e = epsilon_error(one);
    const double expected = 1.0 - std::exp(-0.5);
    return {std::abs(e - expected) <= 1e-9, "epsilon " + std::to_string(e) + " vs " + std::to_string(expected)};
}

Outcome benchmark_suite(Suite suite, double budget_seconds) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto result = run_benchmark(suite, 5, standard_benchmark_spec(), benchmark_threads());
    const double secs = seconds_since(t0);
    std::printf("# %s\n%s", suite_name(suite).c_str(), summary_csv(result).c_str());
    for (const auto& line : result.predicate.per_seed) std::printf("#   %s\n", line.c_str());
    Outcome o;
    o.pass = result.predicate.holds && !result.too_many_failures && secs < budget_seconds;
    o.detail = result.predicate.description + ": " + std::to_string(result.predicate.seeds_passing) + "/" +
               std::to_string(result.predicate.seeds_total) + " seeds (need " +
               std::to_string(result.predicate.seeds_required) + "), " + std::to_string(result.failed_runs) +
               " failed runs, " + fixed(secs, 0) + " s";
    return o;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome determinism() {
    const std::filesystem::path root = std::filesystem::temp_directory_path() / "ordinalenc_acceptance_det";
    std::filesystem::remove_all(root);
    std::string contents[2];
    for (int run = 0; run < 2; ++run) {
        const auto dir = root / ("run" + std::to_string(run));
        const std::string cmd = std::string("\"") + ORDINALENC_CLI + "\" benchmark --suite encodings-se --seeds 2 --quiet --out \"" +
                                dir.string() + "\" > /dev/null 2>&1";
        const int rc = std::system(cmd.c_str());
        if (rc == -1 || !std::filesystem::exists(dir / "runs.csv")) return {false, "benchmark run failed to produce CSV"};
        contents[run] = slurp(dir / "runs.csv") + "\x1e" + slurp(dir / "summary.csv");
    }
    std::filesystem::remove_all(root);
    const bool same = contents[0] == contents[1] && !contents[0].empty();
    return {same, same ? "runs.csv and summary.csv byte-identical across two runs" : "CSV outputs differ"};
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"encoding round trip", round_trip},
        {"gradient suite", gradient_suite},
        {"sigma 0 degeneration", sigma_zero},
        {"mask geometry", mask_geometry},
        {"epsilon-error spot value", epsilon_spot},
        {"benchmark encodings-se", [] { return benchmark_suite(Suite::EncodingsSE, 20 * 60); }},
        {"benchmark sigma-sweep", [] { return benchmark_suite(Suite::SigmaSweep, 1e9); }},
        {"benchmark maskout", [] { return benchmark_suite(Suite::Maskout, 1e9); }},
        {"benchmark determinism", determinism},
    };

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int number = static_cast<int>(i) + 1;
        if (!only.empty() && !only.count(number)) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += !o.pass;
        std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", number, criteria[i].first.c_str(), o.detail.c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
