#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "anomet/data.hpp"

namespace anomet {

// Scores attached to (sorted, unique) frame indices of one recording.
struct ScoreSeries {
    std::vector<int64_t> frames;
    std::vector<double> scores;

    bool operator==(const ScoreSeries&) const = default;
};

// One 32-frame clip window cut from a recording. The clip's score lands on
// `assigned`: the 8th of the 16 stride-2 sampled frames, i.e. start + 14.
struct ClipWindow {
    int64_t start = 0;
    int64_t end = 0; // inclusive
    int64_t assigned = 0;
};

constexpr int64_t kClipFrames = 32;
constexpr int64_t kClipStride = 2;
constexpr int64_t kAssignedOffset = 14;

// Non-overlapping 32-frame windows covering a recording; a tail shorter than
// one window is dropped. Fewer frames than one window is an error.
std::vector<ClipWindow> window_clips(int64_t frame_count);

// The 16 frame indices a window feeds to the encoder (every second frame).
std::vector<int64_t> sampled_frames(const ClipWindow& window);

// One sensor stream's identity within a recording set.
struct StreamKey {
    View view = View::top;
    Modality modality = Modality::depth;

    auto operator<=>(const StreamKey&) const = default;
};

std::string to_string(const StreamKey& key);               // "top:depth"
StreamKey stream_key_from_string(const std::string& s);    // inverse

// The aligned per-stream series of one recording, up to four entries.
using StreamSet = std::map<StreamKey, ScoreSeries>;

// Unweighted mean of two or more series over identical frame indices.
ScoreSeries fuse(const std::vector<ScoreSeries>& series);

// Mean over the selected streams of the set; every key must be present.
ScoreSeries fuse(const StreamSet& streams, const std::vector<StreamKey>& keys);

// Running mean over each score and its k-1 predecessors; the window shrinks
// at the start of the series. k = 1 is the identity.
ScoreSeries smooth(const ScoreSeries& series, size_t k);

// Per-frame expansion of sparse clip scores: every frame from the first
// scored frame through last_frame holds the most recent score at or before
// it (scores only reach a frame once its clip has been seen).
ScoreSeries expand_causal(const ScoreSeries& series, int64_t last_frame);

struct FrameMetrics {
    double accuracy = 0.0;
    double auc = 0.0;
};

// Frame-level accuracy and AUC; labels align with series.frames and are
// 0 (normal) or 1 (anomalous). Needs both labels present for the AUC.
FrameMetrics frame_metrics(const ScoreSeries& series, const std::vector<int>& labels, double gamma);

// Series CSV: header `frame_index,score`, one row per frame.
void write_series_csv(const std::filesystem::path& path, const ScoreSeries& series);
ScoreSeries read_series_csv(const std::filesystem::path& path);

// Plot-ready CSV `frame_index,score,label,threshold` for external tooling.
void write_plot_csv(const std::filesystem::path& path, const ScoreSeries& series,
                    const std::vector<int>& labels, double threshold);

} // namespace anomet
