#include "ordinalenc/synth_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "ordinalenc/errors.hpp"
#include "ordinalenc/model.hpp"
#include "ordinalenc/random.hpp"

namespace ordinalenc {
namespace {

constexpr char kTensorMagic[5] = {'O', 'T', 'E', 'N', '1'};
constexpr int kMetaVersion = 1;

struct Embedding {
    std::vector<double> centre;     // monotone: tanh midpoint, in years
    std::vector<double> scale;      // monotone: tanh width, in years
    std::vector<double> frequency;  // sinusoidal: cycles over [1, K]
    std::vector<double> phase;
    std::vector<std::vector<double>> pattern;  // per channel, H*W, mean 1
};

Embedding make_embedding(const PopulationSpec& spec) {
    Rng rng(spec.embedding_seed);
    const auto channels = static_cast<std::size_t>(spec.in_channels);
    const int cells = spec.height * spec.width;
    Embedding e;
    e.centre.resize(channels);
    e.scale.resize(channels);
    e.frequency.resize(channels);
    e.phase.resize(channels);
    e.pattern.resize(channels);
    for (std::size_t c = 0; c < channels; ++c) {
        e.centre[c] = rng.uniform(0.1, 0.9) * spec.max_age;
        e.scale[c] = rng.uniform(0.15, 0.4) * spec.max_age;
        e.frequency[c] = rng.uniform(0.5, 3.0);
        e.phase[c] = rng.uniform(0.0, 2.0 * std::numbers::pi);
        // Smooth bump at a random location over a constant floor.
        const double bx = rng.uniform(0.0, spec.height - 1.0);
        const double by = rng.uniform(0.0, spec.width - 1.0);
        const double radius = rng.uniform(0.2, 0.5) * std::max(spec.height, spec.width);
        auto& p = e.pattern[c];
        p.resize(static_cast<std::size_t>(cells));
        double total = 0.0;
        for (int x = 0; x < spec.height; ++x) {
            for (int y = 0; y < spec.width; ++y) {
                const double d2 = (x - bx) * (x - bx) + (y - by) * (y - by);
                const double v = 0.5 + std::exp(-d2 / (2.0 * radius * radius));
                p[static_cast<std::size_t>(x * spec.width + y)] = v;
                total += v;
            }
        }
        for (double& v : p) v *= cells / total;
    }
    return e;
}

double channel_value(const Embedding& e, std::size_t c, int age, const PopulationSpec& spec) {
    const auto monotone = static_cast<std::size_t>((spec.in_channels + 1) / 2);
    if (c < monotone) return std::tanh((age - e.centre[c]) / e.scale[c]);
    return std::sin(2.0 * std::numbers::pi * e.frequency[c] * (age - 1) / (spec.max_age - 1) + e.phase[c]);
}

FeatureMap render(const Embedding& e, int age, const PopulationSpec& spec) {
    FeatureMap map(spec.in_channels, spec.height, spec.width);
    for (int c = 0; c < spec.in_channels; ++c) {
        const auto ch = static_cast<std::size_t>(c);
        const double v = channel_value(e, ch, age, spec);
        auto plane = map.channel(c);
        for (std::size_t i = 0; i < plane.size(); ++i) plane[i] = v * e.pattern[ch][i];
    }
    return map;
}

void write_tensor_file(const std::filesystem::path& path, const SyntheticDataset& ds,
                       std::span<const std::size_t> indices) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open " + path.string() + " for writing");
    out.write(kTensorMagic, sizeof kTensorMagic);
    const auto& s = ds.spec;
    for (std::uint32_t v : {static_cast<std::uint32_t>(indices.size()), static_cast<std::uint32_t>(s.in_channels),
                            static_cast<std::uint32_t>(s.height), static_cast<std::uint32_t>(s.width)}) {
        write_u32_le(out, v);
    }
    for (std::size_t i : indices) {
        for (double v : ds.samples[i].input.data()) write_f64_le(out, v);
    }
    if (!out) throw FormatError("write failed: " + path.string());
}

std::vector<FeatureMap> read_tensor_file(const std::filesystem::path& path, const PopulationSpec& s) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    char magic[sizeof kTensorMagic];
    if (!in.read(magic, sizeof magic) || !std::equal(magic, magic + sizeof magic, kTensorMagic)) {
        throw FormatError(path.string() + ": bad tensor magic");
    }
    const auto count = read_u32_le(in);
    const auto c = static_cast<int>(read_u32_le(in));
    const auto h = static_cast<int>(read_u32_le(in));
    const auto w = static_cast<int>(read_u32_le(in));
    if (c != s.in_channels || h != s.height || w != s.width) {
        throw FormatError(path.string() + ": tensor dims disagree with meta");
    }
    std::vector<FeatureMap> maps;
    maps.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        std::vector<double> data(static_cast<std::size_t>(c) * h * w);
        for (double& v : data) v = read_f64_le(in);
        maps.emplace_back(c, h, w, std::move(data));
    }
    return maps;
}

std::string format_double(double v) {
    std::ostringstream out;
    out.precision(17);
    out << v;
    return out.str();
}

}  // namespace

void PopulationSpec::validate() const {
    if (subjects < 1) throw ContractError("population: need at least one subject");
    if (min_images < 1 || max_images < min_images) throw ContractError("population: bad images-per-subject range");
    if (cluster_width < 0) throw ContractError("population: cluster width must be non-negative");
    if (max_age < 2) throw ContractError("population: max age must be at least 2");
    if (in_channels < 1 || height < 1 || width < 1) throw ContractError("population: bad input dims");
    if (!(noise >= 0.0) || !(identity_scale >= 0.0)) throw ContractError("population: noise scales must be >= 0");
}

void SplitSpec::validate() const {
    if (folds < 1) throw ContractError("split: folds must be positive");
    if (!(train_fraction >= 0.0) || !(test_fraction > 0.0) || std::abs(train_fraction + test_fraction - 1.0) > 1e-9) {
        throw ContractError("split: fractions must be non-negative and sum to 1");
    }
    if (protocol == Protocol::RandomSplit && folds * test_fraction > 1.0 + 1e-9) {
        throw ContractError("split: folds * test fraction exceeds the dataset");
    }
}

std::string protocol_name(Protocol protocol) { return protocol == Protocol::RandomSplit ? "RS" : "SE"; }

FeatureMap age_signal(int age, const PopulationSpec& spec) { return render(make_embedding(spec), age, spec); }

SyntheticDataset generate(const PopulationSpec& spec) {
    spec.validate();
    const Embedding embedding = make_embedding(spec);
    std::vector<FeatureMap> signal_by_age;
    signal_by_age.reserve(static_cast<std::size_t>(spec.max_age));
    for (int age = 1; age <= spec.max_age; ++age) signal_by_age.push_back(render(embedding, age, spec));

    Rng rng(spec.seed);
    SyntheticDataset ds;
    ds.spec = spec;
    ds.subjects.reserve(static_cast<std::size_t>(spec.subjects));
    for (int id = 0; id < spec.subjects; ++id) {
        Subject subject;
        subject.id = id;
        subject.base_age = static_cast<int>(rng.uniform_int(1, spec.max_age));
        subject.image_count = static_cast<int>(rng.uniform_int(spec.min_images, spec.max_images));
        subject.identity.resize(static_cast<std::size_t>(spec.in_channels));
        for (double& v : subject.identity) v = spec.identity_scale * rng.normal();

        for (int n = 0; n < subject.image_count; ++n) {
            Sample sample;
            sample.subject_id = id;
            const int offset = static_cast<int>(rng.uniform_int(-spec.cluster_width, spec.cluster_width));
            sample.age = std::clamp(subject.base_age + offset, 1, spec.max_age);
            sample.sigma_n = rng.uniform(1.0, 5.0);
            sample.input = signal_by_age[static_cast<std::size_t>(sample.age - 1)];
            for (int c = 0; c < spec.in_channels; ++c) {
                const double shift = subject.identity[static_cast<std::size_t>(c)];
                for (double& v : sample.input.channel(c)) v += shift + spec.noise * rng.normal();
            }
            ds.samples.push_back(std::move(sample));
        }
        ds.subjects.push_back(std::move(subject));
    }
    return ds;
}

std::vector<Fold> split(const SyntheticDataset& dataset, const SplitSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    const std::size_t n = dataset.samples.size();
    std::vector<Fold> folds(static_cast<std::size_t>(spec.folds));

    std::vector<int> test_fold(n, -1);
    if (spec.protocol == Protocol::RandomSplit) {
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        rng.shuffle(std::span<std::size_t>(order));
        const auto block = static_cast<std::size_t>(std::llround(static_cast<double>(n) * spec.test_fraction));
        for (std::size_t f = 0; f < folds.size(); ++f) {
            for (std::size_t j = f * block; j < std::min(n, (f + 1) * block); ++j) test_fold[order[j]] = static_cast<int>(f);
        }
    } else {
        if (dataset.subjects.size() < folds.size()) {
            throw ContractError("split: subject-exclusive split needs at least as many subjects as folds");
        }
        std::vector<int> ids;
        for (const auto& s : dataset.subjects) ids.push_back(s.id);
        rng.shuffle(std::span<int>(ids));
        std::map<int, int> fold_of_subject;
        for (std::size_t i = 0; i < ids.size(); ++i) fold_of_subject[ids[i]] = static_cast<int>(i % folds.size());
        for (std::size_t i = 0; i < n; ++i) test_fold[i] = fold_of_subject.at(dataset.samples[i].subject_id);
    }

    for (std::size_t f = 0; f < folds.size(); ++f) {
        for (std::size_t i = 0; i < n; ++i) {
            (test_fold[i] == static_cast<int>(f) ? folds[f].test : folds[f].train).push_back(i);
        }
    }
    return folds;
}

std::vector<int> fold_assignment(std::size_t sample_count, std::span<const Fold> folds) {
    std::vector<int> assignment(sample_count, -1);
    for (std::size_t f = 0; f < folds.size(); ++f) {
        for (std::size_t i : folds[f].test) {
            if (i >= sample_count) throw ContractError("fold_assignment: index out of range");
            assignment[i] = static_cast<int>(f);
        }
    }
    return assignment;
}

void save_dataset(const std::filesystem::path& dir, const SyntheticDataset& ds, const SplitSpec& split_spec) {
    std::filesystem::create_directories(dir);
    const auto folds = split(ds, split_spec);
    const auto assignment = fold_assignment(ds.samples.size(), folds);
    const auto& s = ds.spec;

    {
        std::ofstream meta(dir / "meta");
        if (!meta) throw FormatError("cannot write meta in " + dir.string());
        meta << "format=ordinalenc-dataset\n"
             << "version=" << kMetaVersion << '\n'
             << "subjects=" << s.subjects << '\n'
             << "min_images=" << s.min_images << '\n'
             << "max_images=" << s.max_images << '\n'
             << "cluster_width=" << s.cluster_width << '\n'
             << "max_age=" << s.max_age << '\n'
             << "in_channels=" << s.in_channels << '\n'
             << "height=" << s.height << '\n'
             << "width=" << s.width << '\n'
             << "noise=" << format_double(s.noise) << '\n'
             << "identity_scale=" << format_double(s.identity_scale) << '\n'
             << "embedding_seed=" << s.embedding_seed << '\n'
             << "seed=" << s.seed << '\n'
             << "protocol=" << protocol_name(split_spec.protocol) << '\n'
             << "train_fraction=" << format_double(split_spec.train_fraction) << '\n'
             << "test_fraction=" << format_double(split_spec.test_fraction) << '\n'
             << "folds=" << split_spec.folds << '\n'
             << "split_seed=" << split_spec.seed << '\n';
        for (const auto& subj : ds.subjects) {
            meta << "subject=" << subj.id << ',' << subj.base_age << ',' << subj.image_count;
            for (double v : subj.identity) meta << ',' << format_double(v);
            meta << '\n';
        }
    }

    {
        std::ofstream manifest(dir / "manifest.csv");
        if (!manifest) throw FormatError("cannot write manifest in " + dir.string());
        manifest << "sample_id,subject_id,age,sigma_n,fold\n";
        for (std::size_t i = 0; i < ds.samples.size(); ++i) {
            const auto& smp = ds.samples[i];
            manifest << i << ',' << smp.subject_id << ',' << smp.age << ',' << format_double(smp.sigma_n) << ','
                     << assignment[i] << '\n';
        }
    }

    for (int f = -1; f < split_spec.folds; ++f) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < assignment.size(); ++i) {
            if (assignment[i] == f) members.push_back(i);
        }
        if (f == -1 && members.empty()) continue;
        const std::string name = f == -1 ? "unassigned.bin" : "fold_" + std::to_string(f) + ".bin";
        write_tensor_file(dir / name, ds, members);
    }
}

LoadedDataset load_dataset(const std::filesystem::path& dir) {
    std::ifstream meta(dir / "meta");
    if (!meta) throw FormatError("no meta file in " + dir.string());
    LoadedDataset loaded;
    auto& spec = loaded.dataset.spec;
    auto& sp = loaded.split_spec;
    std::string line;
    bool saw_format = false;
    while (std::getline(meta, line)) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError("meta: malformed line '" + line + "'");
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        try {
            if (key == "format") {
                if (value != "ordinalenc-dataset") throw FormatError("meta: unknown format " + value);
                saw_format = true;
            } else if (key == "version") {
                if (std::stoi(value) != kMetaVersion) throw FormatError("meta: unsupported version " + value);
            } else if (key == "subjects") spec.subjects = std::stoi(value);
            else if (key == "min_images") spec.min_images = std::stoi(value);
            else if (key == "max_images") spec.max_images = std::stoi(value);
            else if (key == "cluster_width") spec.cluster_width = std::stoi(value);
            else if (key == "max_age") spec.max_age = std::stoi(value);
            else if (key == "in_channels") spec.in_channels = std::stoi(value);
            else if (key == "height") spec.height = std::stoi(value);
            else if (key == "width") spec.width = std::stoi(value);
            else if (key == "noise") spec.noise = std::stod(value);
            else if (key == "identity_scale") spec.identity_scale = std::stod(value);
            else if (key == "embedding_seed") spec.embedding_seed = std::stoull(value);
            else if (key == "seed") spec.seed = std::stoull(value);
            else if (key == "protocol") {
                if (value == "RS") sp.protocol = Protocol::RandomSplit;
                else if (value == "SE") sp.protocol = Protocol::SubjectExclusive;
                else throw FormatError("meta: unknown protocol " + value);
            } else if (key == "train_fraction") sp.train_fraction = std::stod(value);
            else if (key == "test_fraction") sp.test_fraction = std::stod(value);
            else if (key == "folds") sp.folds = std::stoi(value);
            else if (key == "split_seed") sp.seed = std::stoull(value);
            else if (key == "subject") {
                Subject subj;
                std::stringstream fields(value);
                std::string field;
                std::vector<std::string> parts;
                while (std::getline(fields, field, ',')) parts.push_back(field);
                if (parts.size() < 3) throw FormatError("meta: short subject row");
                subj.id = std::stoi(parts[0]);
                subj.base_age = std::stoi(parts[1]);
                subj.image_count = std::stoi(parts[2]);
                for (std::size_t i = 3; i < parts.size(); ++i) subj.identity.push_back(std::stod(parts[i]));
                loaded.dataset.subjects.push_back(std::move(subj));
            } else {
                throw FormatError("meta: unknown key " + key);
            }
        } catch (const std::logic_error&) {
            throw FormatError("meta: bad value for " + key);
        }
    }
    if (!saw_format) throw FormatError("meta: missing format line");

    std::ifstream manifest(dir / "manifest.csv");
    if (!manifest) throw FormatError("no manifest.csv in " + dir.string());
    std::getline(manifest, line);
    if (line != "sample_id,subject_id,age,sigma_n,fold") throw FormatError("manifest: unexpected header");
    auto& samples = loaded.dataset.samples;
    while (std::getline(manifest, line)) {
        if (line.empty()) continue;
        std::stringstream fields(line);
        std::string id, subject, age, sigma, fold;
        if (!std::getline(fields, id, ',') || !std::getline(fields, subject, ',') || !std::getline(fields, age, ',') ||
            !std::getline(fields, sigma, ',') || !std::getline(fields, fold, ',')) {
            throw FormatError("manifest: short row");
        }
        if (std::stoull(id) != samples.size()) throw FormatError("manifest: sample ids out of order");
        Sample smp;
        smp.subject_id = std::stoi(subject);
        smp.age = std::stoi(age);
        smp.sigma_n = std::stod(sigma);
        samples.push_back(std::move(smp));
        loaded.fold_of_sample.push_back(std::stoi(fold));
    }

    for (int f = -1; f < sp.folds; ++f) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            if (loaded.fold_of_sample[i] == f) members.push_back(i);
        }
        if (members.empty()) continue;
        const std::string name = f == -1 ? "unassigned.bin" : "fold_" + std::to_string(f) + ".bin";
        auto maps = read_tensor_file(dir / name, spec);
        if (maps.size() != members.size()) throw FormatError(name + ": sample count disagrees with manifest");
        for (std::size_t j = 0; j < members.size(); ++j) samples[members[j]].input = std::move(maps[j]);
    }
    return loaded;
}

}  // namespace ordinalenc
