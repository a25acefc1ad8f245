#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ordinalenc/benchmark.hpp"
#include "ordinalenc/encoding.hpp"
#include "ordinalenc/errors.hpp"
#include "ordinalenc/gradcheck.hpp"
#include "ordinalenc/loss_grad.hpp"
#include "ordinalenc/maskout.hpp"
#include "ordinalenc/metrics.hpp"

namespace py = pybind11;
using namespace ordinalenc;

namespace {

Family family_arg(const std::string& name) {
    const auto f = parse_family(name);
    if (!f) throw py::value_error("unknown family '" + name + "' (expected ldl, hard or soft)");
    return *f;
}

EncodingConfig config(const std::string& family, int max_age, double sigma) {
    EncodingConfig c;
    c.family = family_arg(family);
    c.max_age = max_age;
    c.sigma = sigma;
    return c;
}

std::vector<std::vector<int>> mask_rows(const Mask& m) {
    std::vector<std::vector<int>> rows(static_cast<std::size_t>(m.height()));
    for (int x = 0; x < m.height(); ++x)
        for (int y = 0; y < m.width(); ++y) rows[static_cast<std::size_t>(x)].push_back(m.at(x, y));
    return rows;
}

std::vector<Prediction> predictions(const std::vector<double>& predicted, const std::vector<int>& ages,
                                    const std::vector<double>& sigma_n) {
    if (predicted.size() != ages.size() || (!sigma_n.empty() && sigma_n.size() != ages.size())) {
        throw py::value_error("predicted, ages and sigma_n must have equal lengths");
    }
    std::vector<Prediction> out;
    for (std::size_t i = 0; i < ages.size(); ++i)
        out.push_back({predicted[i], ages[i], sigma_n.empty() ? 1.0 : sigma_n[i]});
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Ordinal age encodings, losses, Maskout masks and the synthetic benchmark";

    py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
    py::register_exception<NumericInputError>(m, "NumericInputError", PyExc_ValueError);
    py::register_exception<FormatError>(m, "FormatError", PyExc_IOError);

    m.def(
        "encode",
        [](const std::string& family, int age, double sigma, int max_age) {
            return encode(age, config(family, max_age, sigma)).values;
        },
        "Target vector of an integer age: K values for ldl and soft, K-1 bits for hard.", py::arg("family"),
        py::arg("age"), py::arg("sigma") = 0.0, py::arg("max_age") = 101);

    m.def(
        "output_dim",
        [](const std::string& family, int max_age) { return config(family, max_age, 1.0).output_dim(); },
        py::arg("family"), py::arg("max_age") = 101);

    m.def(
        "decode_ldl", [](const std::vector<double>& probs) { return decode_ldl(probs); },
        "Expectation of a probability vector over ages 1..K.", py::arg("probs"));
    m.def(
        "decode_hard_rank", [](const std::vector<int>& bits) { return decode_hard_rank(bits); }, py::arg("bits"));
    m.def(
        "decode_soft_rank", [](const std::vector<PairProbs>& pairs) { return decode_soft_rank(pairs); },
        "Smallest k minimising |p0 - p1| over (p0, p1) pairs.", py::arg("pairs"));

    m.def(
        "softmax", [](const std::vector<double>& logits) { return softmax(logits); }, py::arg("logits"));

    m.def(
        "loss",
        [](const std::string& family, const std::vector<double>& logits, int age, double sigma, int max_age) {
            const auto v = loss_for(logits, encode(age, config(family, max_age, sigma)));
            return py::make_tuple(v.value, v.grad);
        },
        "(value, gradient) of the family's loss for raw logits.", py::arg("family"), py::arg("logits"), py::arg("age"),
        py::arg("sigma") = 0.0, py::arg("max_age") = 101);

    m.def(
        "predict_age",
        [](const std::string& family, const std::vector<double>& logits) {
            return predict_age(logits, family_arg(family));
        },
        py::arg("family"), py::arg("logits"));

    m.def(
        "make_mask",
        [](int cx, int cy, int radius, int height, int width) {
            return mask_rows(make_mask({cx, cy}, radius, height, width));
        },
        "0/1 rows with a 2r x 2r hole at (cx, cy).", py::arg("cx"), py::arg("cy"), py::arg("radius"),
        py::arg("height"), py::arg("width"));

    m.def(
        "landmark_masks",
        [](int height, int width, int side) {
            std::vector<std::vector<std::vector<int>>> out;
            for (const auto& mask : default_landmark_masks_with_side(height, width, side)) out.push_back(mask_rows(mask));
            return out;
        },
        py::arg("height") = 7, py::arg("width") = 7, py::arg("side") = 4);

    m.def(
        "mae",
        [](const std::vector<double>& predicted, const std::vector<int>& ages) {
            return mae(predictions(predicted, ages, {}));
        },
        py::arg("predicted"), py::arg("ages"));
    m.def(
        "epsilon_error",
        [](const std::vector<double>& predicted, const std::vector<int>& ages, const std::vector<double>& sigma_n) {
            return epsilon_error(predictions(predicted, ages, sigma_n));
        },
        py::arg("predicted"), py::arg("ages"), py::arg("sigma_n"));

    m.def(
        "gradcheck",
        [](std::uint64_t seed, int trials) {
            GradCheckOptions options;
            options.seed = seed;
            options.trials = trials;
            py::list out;
            for (const auto& r : run_gradcheck(options)) {
                py::dict d;
                d["suite"] = r.suite;
                d["trials"] = r.trials;
                d["compared"] = r.compared;
                d["worst_error"] = r.worst_error;
                d["passed"] = r.passed;
                out.append(d);
            }
            return out;
        },
        "Finite-difference checks of every loss and the model.", py::arg("seed") = 0, py::arg("trials") = 20);

    m.def(
        "benchmark",
        [](const std::string& suite, int seeds, int threads) {
            const auto s = parse_suite(suite);
            if (!s) throw py::value_error("unknown suite '" + suite + "'");
            BenchmarkResult result;
            {
                py::gil_scoped_release release;
                result = run_benchmark(*s, seeds, standard_benchmark_spec(), threads > 0 ? threads : benchmark_threads());
            }
            py::dict d;
            d["runs_csv"] = runs_csv(result);
            d["summary_csv"] = summary_csv(result);
            d["predicate"] = predicate_text(result);
            d["holds"] = result.predicate.holds && !result.too_many_failures;
            return d;
        },
        "Runs a suite on the standard synthetic spec. Slow: minutes per seed.", py::arg("suite"),
        py::arg("seeds") = 5, py::arg("threads") = 0);
}
