#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "anomet/linalg.hpp"

namespace anomet {

enum class View { top, front };
enum class Modality { depth, ir };
enum class Label { normal, anomalous };

std::string to_string(View v);
std::string to_string(Modality m);
std::string to_string(Label l);
View view_from_string(const std::string& s);
Modality modality_from_string(const std::string& s);
Label label_from_string(const std::string& s);

// One recorded clip of one sensor stream. The four streams of the same
// physical clip share clip_id, label and frame span but carry their own
// feature vectors.
struct ClipSample {
    std::string clip_id;
    std::string subject_id;
    View view = View::top;
    Modality modality = Modality::depth;
    Label label = Label::normal;
    std::string anomaly_class;     // empty iff label == normal
    bool seen_in_training = true;  // anomaly class appears in the train split
    Vec features;
    int64_t frame_start = 0;
    int64_t frame_end = 0; // inclusive

    bool operator==(const ClipSample&) const = default;
};

struct DatasetSplit {
    std::vector<ClipSample> train;
    std::vector<ClipSample> test;

    bool operator==(const DatasetSplit&) const = default;
};

// Tab-separated manifest with a header naming the columns; see README for
// the format. Errors cite the offending line number. Feature vectors are
// either inline or in binary sidecar files referenced relative to the
// manifest location.
DatasetSplit load_manifest(const std::filesystem::path& path);

// Inverse of load_manifest; the round-trip reproduces every field exactly.
// With binary_features the vectors go to <dir>/features/*.fvec sidecars.
void save_manifest(const DatasetSplit& split, const std::filesystem::path& path,
                   bool binary_features = false);

// Binary feature vector file: 8-byte magic, u32 little-endian dim, then the
// values as 64-bit little-endian reals.
void write_feature_file(const std::filesystem::path& path, const Vec& values);
Vec read_feature_file(const std::filesystem::path& path);

// Synthetic stand-in for the real recordings: unit-sphere direction per
// class, angular noise per clip, two views x two modalities with
// independent noise, subject-disjoint splits, and unseen anomaly classes
// confined to the test split.
struct SynthConfig {
    uint64_t seed = 7;
    size_t input_dim = 32;
    size_t train_subjects = 25;
    size_t test_subjects = 6;
    size_t train_normal_clips = 8;   // per training subject
    size_t train_anomaly_clips = 5;  // per training subject, seen classes only
    size_t test_normal_clips = 8;    // per test subject
    size_t test_clips_per_class = 1; // per test subject, every class
    size_t seen_classes = 8;
    size_t unseen_classes = 16;
    double noise_sigma = 0.08;         // angular spread around the class direction
    double min_separation_deg = 60.0;  // anomaly directions vs the normal one
};

DatasetSplit generate_synthetic(const SynthConfig& config);

// Keeps ceil(lambda * folds) subject-folds of each training pool (normal
// clips under lambda_n, anomalous under lambda_a); the fold assignment
// shuffles subjects by seed and the test split passes through untouched.
DatasetSplit subset(const DatasetSplit& dataset, double lambda_n, double lambda_a, uint64_t seed,
                    size_t folds = 5);

// The clips of one sensor stream, original order preserved.
std::vector<ClipSample> filter_stream(const std::vector<ClipSample>& clips, View view,
                                      Modality modality);

} // namespace anomet
