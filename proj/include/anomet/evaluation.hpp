#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "anomet/encoder.hpp"
#include "anomet/linalg.hpp"

namespace anomet {

// Mean of the unit-normalized embeddings of the training normals. The mean
// itself is kept as-is (its norm is < 1 unless all embeddings coincide).
struct TemplateVector {
    Vec values;
    size_t count = 0; // embeddings averaged
};

TemplateVector build_template(const EncoderParams& params, const std::vector<Vec>& normal_features);

// Dot product of the template with the clip's unit-normalized embedding: the
// cosine to the mean direction, scaled by the template length (how tightly
// the training normals cluster). High means normal-looking.
double score_clip(const EncoderParams& params, const TemplateVector& tmpl, const Vec& features);

// Decision rule: anomalous iff sim < gamma. Equality counts as normal.
bool is_anomalous(double sim, double gamma);

// Area under the ROC curve for separating normals (high sim) from anomalies
// (low sim): rank statistic with midrank tie handling, so it equals the
// fraction of (normal, anomaly) pairs ordered correctly, ties worth 1/2.
double auc(const std::vector<double>& normal_scores, const std::vector<double>& anomaly_scores);

struct ThresholdResult {
    double gamma = 0.0;
    double accuracy = 0.0;
};

// Accuracy of the decision rule at a fixed threshold.
double accuracy_at(const std::vector<double>& normal_scores,
                   const std::vector<double>& anomaly_scores, double gamma);

// Exhaustive accuracy sweep over every threshold that matters: midpoints of
// adjacent distinct scores plus the two infinities. Ties in accuracy resolve
// toward the larger gamma.
ThresholdResult best_threshold(const std::vector<double>& normal_scores,
                               const std::vector<double>& anomaly_scores);

// Fraction of anomalies correctly flagged at gamma, split by whether the
// anomaly class appeared in training. `average` weights the present groups
// by their clip counts. A group with no clips reports nullopt.
struct SpecificitySplit {
    std::optional<double> closed; // classes seen in training
    std::optional<double> open;   // unseen classes
    double average = 0.0;
};

SpecificitySplit specificity_split(const std::vector<double>& seen_anomaly_scores,
                                   const std::vector<double>& unseen_anomaly_scores, double gamma);

struct EvalCounts {
    size_t normals = 0;
    size_t anomalies_seen = 0;
    size_t anomalies_unseen = 0;
};

// Full scalar summary of one scored test set.
struct EvalReport {
    double auc = 0.0;
    double best_threshold = 0.0;
    double best_accuracy = 0.0;
    double gamma = 0.0;    // threshold the rest of the report uses
    double accuracy = 0.0; // at `gamma`
    std::optional<double> specificity_closed;
    std::optional<double> specificity_open;
    double specificity_average = 0.0;
    EvalCounts counts;
};

// Builds the report from raw similarity scores. When gamma_override is empty
// the swept best threshold is used.
EvalReport compute_eval_report(const std::vector<double>& normal_scores,
                               const std::vector<double>& seen_anomaly_scores,
                               const std::vector<double>& unseen_anomaly_scores,
                               std::optional<double> gamma_override = std::nullopt);

// JSON rendering of the report. Non-finite thresholds are emitted as the
// strings "inf" / "-inf" so the document stays valid JSON.
std::string report_to_json(const EvalReport& report, int indent = 2);

} // namespace anomet
