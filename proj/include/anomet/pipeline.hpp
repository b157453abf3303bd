#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "anomet/data.hpp"
#include "anomet/encoder.hpp"
#include "anomet/evaluation.hpp"
#include "anomet/stream.hpp"

namespace anomet {

// One scored test clip. view/modality are free-form so fused rows can say
// "top+front" / "depth+ir".
struct ScoredClip {
    std::string clip_id;
    std::string subject_id;
    std::string view;
    std::string modality;
    Label label = Label::normal;
    std::string anomaly_class;
    bool seen_in_training = true;
    int64_t frame_start = 0;
    int64_t frame_end = 0;
    double sim = 0.0;
};

// Scores every clip (already filtered to one stream) against the template.
// Scoring is pure, so extra threads split the clips into blocks; results are
// written by index and stay identical for any thread count.
std::vector<ScoredClip> score_clips(const EncoderParams& params, const TemplateVector& tmpl,
                                    const std::vector<ClipSample>& clips, size_t threads = 1);

// Clip-level running average along each subject's timeline (rows ordered by
// frame_start within a subject), the clip analogue of stream smoothing.
std::vector<ScoredClip> smooth_clip_scores(const std::vector<ScoredClip>& rows, size_t k);

// Decision-level fusion: mean similarity per clip_id across streams, which
// must agree on the clip set and metadata.
std::vector<ScoredClip> fuse_clip_scores(const std::vector<std::vector<ScoredClip>>& streams);

// Metrics over scored rows, normals vs anomalies split by seen flag.
EvalReport report_from_rows(const std::vector<ScoredClip>& rows,
                            std::optional<double> gamma_override);

// `clip_id,view,modality,label,anomaly_class,sim` per row.
void write_scores_csv(const std::filesystem::path& path, const std::vector<ScoredClip>& rows);

struct StreamEvalResult {
    std::vector<ScoredClip> rows; // after optional smoothing
    EvalReport report;
};

struct EvalRunResult {
    std::map<StreamKey, StreamEvalResult> streams;
    std::vector<StreamKey> fuse_keys; // empty when no fusion requested
    std::optional<StreamEvalResult> fused;
};

// Full evaluation pass: per-stream template/scores/report for every model,
// plus an optional fused report over fuse_keys (raw scores are fused, then
// smoothing applies to the fused sequence). smooth_k <= 1 disables
// smoothing.
EvalRunResult run_eval(const std::map<StreamKey, EncoderParams>& models, const DatasetSplit& data,
                       const std::vector<StreamKey>& fuse_keys, std::optional<double> gamma_override,
                       size_t smooth_k, size_t threads = 1);

// The whole run as one JSON document.
std::string eval_run_to_json(const EvalRunResult& run, int indent = 2);

// Continuous scoring of one subject's recording on one stream: sparse clip
// scores at their assigned frames (optionally smoothed), causal-hold
// expansion to every frame, per-frame labels, and frame-level metrics
// (absent when the recording holds only one class).
struct SubjectStreamResult {
    ScoreSeries clip_scores;
    ScoreSeries frame_scores;
    std::vector<int> frame_labels;
    std::optional<FrameMetrics> metrics;
};

SubjectStreamResult score_subject_stream(const EncoderParams& params, const TemplateVector& tmpl,
                                         const std::vector<ClipSample>& subject_clips, double gamma,
                                         size_t smooth_k);

} // namespace anomet
