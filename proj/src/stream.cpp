#include "anomet/stream.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>
#include <string>

#include "anomet/errors.hpp"
#include "anomet/evaluation.hpp"
#include "anomet/text.hpp"

namespace anomet {

namespace {

void check_series(const ScoreSeries& series, const char* where) {
    if (series.frames.size() != series.scores.size()) {
        throw std::invalid_argument(std::string(where) + ": " + std::to_string(series.frames.size()) +
                                    " frames vs " + std::to_string(series.scores.size()) + " scores");
    }
    for (size_t i = 1; i < series.frames.size(); ++i) {
        if (series.frames[i] <= series.frames[i - 1]) {
            throw ValidationError(std::string(where) + ": frame indices must be strictly increasing");
        }
    }
}

} // namespace

std::vector<ClipWindow> window_clips(int64_t frame_count) {
    if (frame_count < kClipFrames) {
        throw ValidationError("recording has " + std::to_string(frame_count) +
                              " frames, need at least " + std::to_string(kClipFrames) +
                              " for one clip");
    }
    std::vector<ClipWindow> windows;
    for (int64_t start = 0; start + kClipFrames <= frame_count; start += kClipFrames) {
        windows.push_back({start, start + kClipFrames - 1, start + kAssignedOffset});
    }
    return windows;
}

std::vector<int64_t> sampled_frames(const ClipWindow& window) {
    std::vector<int64_t> frames;
    frames.reserve(static_cast<size_t>(kClipFrames / kClipStride));
    for (int64_t f = window.start; f <= window.end; f += kClipStride) frames.push_back(f);
    return frames;
}

std::string to_string(const StreamKey& key) {
    return to_string(key.view) + ":" + to_string(key.modality);
}

StreamKey stream_key_from_string(const std::string& s) {
    const size_t colon = s.find(':');
    if (colon == std::string::npos) {
        throw ValidationError("stream key '" + s + "' is not of the form view:modality");
    }
    return {view_from_string(s.substr(0, colon)), modality_from_string(s.substr(colon + 1))};
}

ScoreSeries fuse(const StreamSet& streams, const std::vector<StreamKey>& keys) {
    std::vector<ScoreSeries> selected;
    selected.reserve(keys.size());
    for (const StreamKey& key : keys) {
        auto it = streams.find(key);
        if (it == streams.end()) {
            throw ValidationError("no series for stream " + to_string(key));
        }
        selected.push_back(it->second);
    }
    return fuse(selected);
}

ScoreSeries fuse(const std::vector<ScoreSeries>& series) {
    if (series.size() < 2) {
        throw ValidationError("fuse needs at least 2 series, got " + std::to_string(series.size()));
    }
    check_series(series.front(), "fuse");
    for (size_t s = 1; s < series.size(); ++s) {
        check_series(series[s], "fuse");
        if (series[s].frames != series.front().frames) {
            throw ValidationError("fuse: series " + std::to_string(s) +
                                  " covers different frames than series 0");
        }
    }
    ScoreSeries out;
    out.frames = series.front().frames;
    out.scores.assign(out.frames.size(), 0.0);
    for (const ScoreSeries& s : series) {
        for (size_t i = 0; i < s.scores.size(); ++i) out.scores[i] += s.scores[i];
    }
    const double inv = 1.0 / static_cast<double>(series.size());
    for (double& v : out.scores) v *= inv;
    return out;
}

ScoreSeries smooth(const ScoreSeries& series, size_t k) {
    check_series(series, "smooth");
    if (k == 0) throw ValidationError("smoothing window must be at least 1");
    ScoreSeries out;
    out.frames = series.frames;
    out.scores.resize(series.scores.size());
    double window_sum = 0.0;
    for (size_t t = 0; t < series.scores.size(); ++t) {
        window_sum += series.scores[t];
        if (t >= k) window_sum -= series.scores[t - k];
        const size_t width = std::min(t + 1, k);
        out.scores[t] = window_sum / static_cast<double>(width);
    }
    return out;
}

ScoreSeries expand_causal(const ScoreSeries& series, int64_t last_frame) {
    check_series(series, "expand_causal");
    if (series.frames.empty()) throw ValidationError("expand_causal: empty series");
    if (last_frame < series.frames.back()) {
        throw ValidationError("expand_causal: last_frame " + std::to_string(last_frame) +
                              " precedes the final scored frame " +
                              std::to_string(series.frames.back()));
    }
    ScoreSeries out;
    const size_t total = static_cast<size_t>(last_frame - series.frames.front() + 1);
    out.frames.reserve(total);
    out.scores.reserve(total);
    size_t next = 0;
    double held = 0.0;
    for (int64_t f = series.frames.front(); f <= last_frame; ++f) {
        if (next < series.frames.size() && series.frames[next] == f) {
            held = series.scores[next];
            ++next;
        }
        out.frames.push_back(f);
        out.scores.push_back(held);
    }
    return out;
}

FrameMetrics frame_metrics(const ScoreSeries& series, const std::vector<int>& labels, double gamma) {
    check_series(series, "frame_metrics");
    if (labels.size() != series.scores.size()) {
        throw std::invalid_argument("frame_metrics: " + std::to_string(labels.size()) +
                                    " labels vs " + std::to_string(series.scores.size()) +
                                    " scores");
    }
    std::vector<double> normal_scores;
    std::vector<double> anomaly_scores;
    for (size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1) {
            throw ValidationError("frame_metrics: label " + std::to_string(labels[i]) +
                                  " at position " + std::to_string(i) + " is not 0/1");
        }
        (labels[i] == 0 ? normal_scores : anomaly_scores).push_back(series.scores[i]);
    }
    FrameMetrics metrics;
    metrics.accuracy = accuracy_at(normal_scores, anomaly_scores, gamma);
    metrics.auc = auc(normal_scores, anomaly_scores);
    return metrics;
}

void write_series_csv(const std::filesystem::path& path, const ScoreSeries& series) {
    check_series(series, "write_series_csv");
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw ValidationError("cannot open " + path.string() + " for writing");
    f << "frame_index,score\n";
    for (size_t i = 0; i < series.frames.size(); ++i) {
        f << series.frames[i] << ',' << fmt_real(series.scores[i]) << '\n';
    }
    f.flush();
    if (!f) throw ValidationError("failed writing " + path.string());
}

ScoreSeries read_series_csv(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ValidationError("cannot open series file " + path.string());

    ScoreSeries series;
    std::string line;
    size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(f, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!header_seen) {
            header_seen = true;
            if (line != "frame_index,score") {
                throw ValidationError(path.string() + ":1: expected header 'frame_index,score'");
            }
            continue;
        }
        const size_t comma = line.find(',');
        if (comma == std::string::npos) {
            throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                                  ": expected 'frame_index,score'");
        }
        try {
            series.frames.push_back(parse_int(line.substr(0, comma)));
            series.scores.push_back(parse_real(line.substr(comma + 1)));
        } catch (const ValidationError& e) {
            throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (!header_seen) throw ValidationError(path.string() + ": empty series file");
    check_series(series, path.string().c_str());
    return series;
}

void write_plot_csv(const std::filesystem::path& path, const ScoreSeries& series,
                    const std::vector<int>& labels, double threshold) {
    check_series(series, "write_plot_csv");
    if (labels.size() != series.frames.size()) {
        throw std::invalid_argument("write_plot_csv: " + std::to_string(labels.size()) +
                                    " labels vs " + std::to_string(series.frames.size()) +
                                    " frames");
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw ValidationError("cannot open " + path.string() + " for writing");
    f << "frame_index,score,label,threshold\n";
    const std::string gamma = fmt_real(threshold);
    for (size_t i = 0; i < series.frames.size(); ++i) {
        f << series.frames[i] << ',' << fmt_real(series.scores[i]) << ',' << labels[i] << ','
          << gamma << '\n';
    }
    f.flush();
    if (!f) throw ValidationError("failed writing " + path.string());
}

} // namespace anomet
