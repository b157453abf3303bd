#include "anomet/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "anomet/errors.hpp"

namespace anomet {

namespace {

void check_scores(const std::vector<double>& scores, const char* kind) {
    for (double s : scores) {
        if (!std::isfinite(s)) {
            throw ValidationError(std::string(kind) + " scores contain a non-finite value");
        }
    }
}

} // namespace

TemplateVector build_template(const EncoderParams& params, const std::vector<Vec>& normal_features) {
    if (normal_features.empty()) {
        throw ValidationError("build_template: no normal clips to average");
    }
    TemplateVector tmpl;
    tmpl.values.assign(params.dims.embed_dim, 0.0);
    for (const Vec& x : normal_features) {
        add_scaled(tmpl.values, 1.0, l2_normalize(encode(params, x)));
    }
    const double inv = 1.0 / static_cast<double>(normal_features.size());
    for (double& v : tmpl.values) v *= inv;
    tmpl.count = normal_features.size();
    return tmpl;
}

double score_clip(const EncoderParams& params, const TemplateVector& tmpl, const Vec& features) {
    if (tmpl.values.size() != params.dims.embed_dim) {
        throw std::invalid_argument("score_clip: template dim " + std::to_string(tmpl.values.size()) +
                                    " does not match embed dim " +
                                    std::to_string(params.dims.embed_dim));
    }
    return dot(tmpl.values, l2_normalize(encode(params, features)));
}

bool is_anomalous(double sim, double gamma) { return sim < gamma; }

double auc(const std::vector<double>& normal_scores, const std::vector<double>& anomaly_scores) {
    if (normal_scores.empty() || anomaly_scores.empty()) {
        throw ValidationError("auc needs both classes, got " +
                              std::to_string(normal_scores.size()) + " normals and " +
                              std::to_string(anomaly_scores.size()) + " anomalies");
    }
    check_scores(normal_scores, "normal");
    check_scores(anomaly_scores, "anomaly");

    // Rank-sum formulation. Sort the pooled scores, hand tied runs their
    // midrank, then AUC = (R_normal - n(n+1)/2) / (n * m).
    struct Entry {
        double score;
        bool is_normal;
    };
    std::vector<Entry> pool;
    pool.reserve(normal_scores.size() + anomaly_scores.size());
    for (double s : normal_scores) pool.push_back({s, true});
    for (double s : anomaly_scores) pool.push_back({s, false});
    std::sort(pool.begin(), pool.end(),
              [](const Entry& a, const Entry& b) { return a.score < b.score; });

    double rank_sum = 0.0;
    size_t i = 0;
    while (i < pool.size()) {
        size_t j = i;
        while (j < pool.size() && pool[j].score == pool[i].score) ++j;
        // Ranks are 1-based; a run spanning ranks i+1..j gets their mean.
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);
        for (size_t k = i; k < j; ++k) {
            if (pool[k].is_normal) rank_sum += midrank;
        }
        i = j;
    }
    const double n = static_cast<double>(normal_scores.size());
    const double m = static_cast<double>(anomaly_scores.size());
    return (rank_sum - n * (n + 1.0) / 2.0) / (n * m);
}

double accuracy_at(const std::vector<double>& normal_scores,
                   const std::vector<double>& anomaly_scores, double gamma) {
    const size_t total = normal_scores.size() + anomaly_scores.size();
    if (total == 0) throw ValidationError("accuracy_at: no scores");
    size_t correct = 0;
    for (double s : normal_scores) {
        if (!is_anomalous(s, gamma)) ++correct;
    }
    for (double s : anomaly_scores) {
        if (is_anomalous(s, gamma)) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(total);
}

ThresholdResult best_threshold(const std::vector<double>& normal_scores,
                               const std::vector<double>& anomaly_scores) {
    if (normal_scores.empty() && anomaly_scores.empty()) {
        throw ValidationError("best_threshold: no scores");
    }
    check_scores(normal_scores, "normal");
    check_scores(anomaly_scores, "anomaly");

    std::vector<double> distinct;
    distinct.reserve(normal_scores.size() + anomaly_scores.size());
    distinct.insert(distinct.end(), normal_scores.begin(), normal_scores.end());
    distinct.insert(distinct.end(), anomaly_scores.begin(), anomaly_scores.end());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

    // Every achievable confusion matrix is hit by some midpoint between
    // neighbouring distinct scores, plus the two all-one-class extremes.
    std::vector<double> candidates;
    candidates.push_back(-std::numeric_limits<double>::infinity());
    for (size_t i = 0; i + 1 < distinct.size(); ++i) {
        candidates.push_back(0.5 * (distinct[i] + distinct[i + 1]));
    }
    candidates.push_back(std::numeric_limits<double>::infinity());

    ThresholdResult best{candidates.front(), -1.0};
    for (double gamma : candidates) { // ascending, so >= keeps the largest tie
        const double acc = accuracy_at(normal_scores, anomaly_scores, gamma);
        if (acc >= best.accuracy) best = {gamma, acc};
    }
    return best;
}

SpecificitySplit specificity_split(const std::vector<double>& seen_anomaly_scores,
                                   const std::vector<double>& unseen_anomaly_scores, double gamma) {
    if (seen_anomaly_scores.empty() && unseen_anomaly_scores.empty()) {
        throw ValidationError("specificity_split: no anomaly scores");
    }
    auto flagged = [&](const std::vector<double>& scores) {
        size_t hit = 0;
        for (double s : scores) {
            if (is_anomalous(s, gamma)) ++hit;
        }
        return hit;
    };
    const size_t hit_seen = flagged(seen_anomaly_scores);
    const size_t hit_unseen = flagged(unseen_anomaly_scores);

    SpecificitySplit split;
    if (!seen_anomaly_scores.empty()) {
        split.closed = static_cast<double>(hit_seen) / static_cast<double>(seen_anomaly_scores.size());
    }
    if (!unseen_anomaly_scores.empty()) {
        split.open =
            static_cast<double>(hit_unseen) / static_cast<double>(unseen_anomaly_scores.size());
    }
    split.average = static_cast<double>(hit_seen + hit_unseen) /
                    static_cast<double>(seen_anomaly_scores.size() + unseen_anomaly_scores.size());
    return split;
}

EvalReport compute_eval_report(const std::vector<double>& normal_scores,
                               const std::vector<double>& seen_anomaly_scores,
                               const std::vector<double>& unseen_anomaly_scores,
                               std::optional<double> gamma_override) {
    std::vector<double> all_anomalies = seen_anomaly_scores;
    all_anomalies.insert(all_anomalies.end(), unseen_anomaly_scores.begin(),
                         unseen_anomaly_scores.end());

    EvalReport report;
    report.counts.normals = normal_scores.size();
    report.counts.anomalies_seen = seen_anomaly_scores.size();
    report.counts.anomalies_unseen = unseen_anomaly_scores.size();

    report.auc = auc(normal_scores, all_anomalies);
    const ThresholdResult best = best_threshold(normal_scores, all_anomalies);
    report.best_threshold = best.gamma;
    report.best_accuracy = best.accuracy;
    report.gamma = gamma_override.value_or(best.gamma);
    report.accuracy = gamma_override ? accuracy_at(normal_scores, all_anomalies, report.gamma)
                                     : best.accuracy;

    const SpecificitySplit split =
        specificity_split(seen_anomaly_scores, unseen_anomaly_scores, report.gamma);
    report.specificity_closed = split.closed;
    report.specificity_open = split.open;
    report.specificity_average = split.average;
    return report;
}

namespace {

// JSON has no infinities; the sentinel thresholds become strings.
nlohmann::json json_real(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0.0 ? "inf" : "-inf";
}

nlohmann::json json_opt(const std::optional<double>& v) {
    if (!v) return nullptr;
    return json_real(*v);
}

} // namespace

std::string report_to_json(const EvalReport& report, int indent) {
    nlohmann::json j;
    j["auc"] = json_real(report.auc);
    j["best_threshold"] = json_real(report.best_threshold);
    j["best_accuracy"] = json_real(report.best_accuracy);
    j["gamma"] = json_real(report.gamma);
    j["accuracy"] = json_real(report.accuracy);
    j["specificity"] = {{"closed", json_opt(report.specificity_closed)},
                        {"open", json_opt(report.specificity_open)},
                        {"average", json_real(report.specificity_average)}};
    j["counts"] = {{"normals", report.counts.normals},
                   {"anomalies_seen", report.counts.anomalies_seen},
                   {"anomalies_unseen", report.counts.anomalies_unseen}};
    return j.dump(indent);
}

} // namespace anomet
