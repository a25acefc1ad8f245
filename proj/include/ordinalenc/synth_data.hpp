#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ordinalenc/maskout.hpp"

namespace ordinalenc {

struct PopulationSpec {
    int subjects = 400;
    int min_images = 3;
    int max_images = 8;
    int cluster_width = 3;      // image ages = base age +/- uniform(0, width), clipped
    int max_age = 101;
    int in_channels = 8;
    int height = 7;
    int width = 7;
    double noise = 0.5;         // per-image iid noise std
    double identity_scale = 0.5;  // std of the per-subject identity offsets
    std::uint64_t embedding_seed = 7;  // fixes the age-signal embedding
    std::uint64_t seed = 0;            // draws subjects, ages, noise

    void validate() const;
};

struct Subject {
    int id = 0;
    std::vector<double> identity;  // one offset per input channel
    int base_age = 1;
    int image_count = 1;
};

struct Sample {
    int subject_id = 0;
    int age = 1;
    double sigma_n = 1.0;
    FeatureMap input;
};

struct SyntheticDataset {
    PopulationSpec spec;
    std::vector<Subject> subjects;
    std::vector<Sample> samples;
};

// Noise-free rendering of an age onto the input grid. Deterministic in
// (age, spec.embedding_seed, dims). Half the channels carry monotone functions
// of age, the other half sinusoids.
FeatureMap age_signal(int age, const PopulationSpec& spec);

SyntheticDataset generate(const PopulationSpec& spec);

enum class Protocol { RandomSplit, SubjectExclusive };

struct SplitSpec {
    Protocol protocol = Protocol::SubjectExclusive;
    double train_fraction = 0.8;
    double test_fraction = 0.2;
    int folds = 5;
    std::uint64_t seed = 0;

    void validate() const;
};

struct Fold {
    std::vector<std::size_t> train;  // indices into dataset.samples, ascending
    std::vector<std::size_t> test;
};

// RS: one image-level permutation; fold f tests on the f-th block of
// round(N * test_fraction) images. SE: subjects dealt round-robin from a
// shuffled order into `folds` groups; fold f tests on group f.
std::vector<Fold> split(const SyntheticDataset& dataset, const SplitSpec& spec);

// Fold index that tests each sample (-1 if none) for a fold list.
std::vector<int> fold_assignment(std::size_t sample_count, std::span<const Fold> folds);

// Writes `meta`, `manifest.csv` and `fold_<f>.bin` (little-endian f64
// tensors of that fold's test samples, manifest order).
void save_dataset(const std::filesystem::path& dir, const SyntheticDataset& dataset, const SplitSpec& split_spec);

struct LoadedDataset {
    SyntheticDataset dataset;
    SplitSpec split_spec;
    std::vector<int> fold_of_sample;
};

LoadedDataset load_dataset(const std::filesystem::path& dir);

std::string protocol_name(Protocol protocol);

}  // namespace ordinalenc
