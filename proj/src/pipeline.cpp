#include "anomet/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "anomet/errors.hpp"
#include "anomet/text.hpp"

namespace anomet {

std::vector<ScoredClip> score_clips(const EncoderParams& params, const TemplateVector& tmpl,
                                    const std::vector<ClipSample>& clips, size_t threads) {
    std::vector<ScoredClip> rows(clips.size());
    auto score_range = [&](size_t begin, size_t end) {
        for (size_t i = begin; i < end; ++i) {
            const ClipSample& c = clips[i];
            ScoredClip& row = rows[i];
            row.clip_id = c.clip_id;
            row.subject_id = c.subject_id;
            row.view = to_string(c.view);
            row.modality = to_string(c.modality);
            row.label = c.label;
            row.anomaly_class = c.anomaly_class;
            row.seen_in_training = c.seen_in_training;
            row.frame_start = c.frame_start;
            row.frame_end = c.frame_end;
            row.sim = score_clip(params, tmpl, c.features);
        }
    };

    const size_t workers = std::min(std::max<size_t>(threads, 1), clips.size());
    if (workers <= 1) {
        score_range(0, clips.size());
        return rows;
    }
    // Contiguous blocks per worker; row i only ever depends on clip i, so the
    // result is independent of the split. Exceptions (e.g. a degenerate
    // encoding) are carried back to the calling thread.
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::vector<std::exception_ptr> failures(workers);
    const size_t chunk = (clips.size() + workers - 1) / workers;
    for (size_t w = 0; w < workers; ++w) {
        const size_t begin = w * chunk;
        const size_t end = std::min(begin + chunk, clips.size());
        if (begin >= end) break;
        pool.emplace_back([&, w, begin, end] {
            try {
                score_range(begin, end);
            } catch (...) {
                failures[w] = std::current_exception();
            }
        });
    }
    for (std::thread& t : pool) t.join();
    for (const std::exception_ptr& failure : failures) {
        if (failure) std::rethrow_exception(failure);
    }
    return rows;
}

std::vector<ScoredClip> smooth_clip_scores(const std::vector<ScoredClip>& rows, size_t k) {
    if (k <= 1) return rows;

    // Row indices per subject, in timeline order.
    std::map<std::string, std::vector<size_t>> by_subject;
    for (size_t i = 0; i < rows.size(); ++i) by_subject[rows[i].subject_id].push_back(i);

    std::vector<ScoredClip> out = rows;
    for (auto& [subject, indices] : by_subject) {
        std::sort(indices.begin(), indices.end(), [&](size_t a, size_t b) {
            if (rows[a].frame_start != rows[b].frame_start) {
                return rows[a].frame_start < rows[b].frame_start;
            }
            return rows[a].clip_id < rows[b].clip_id;
        });
        double window_sum = 0.0;
        for (size_t t = 0; t < indices.size(); ++t) {
            window_sum += rows[indices[t]].sim;
            if (t >= k) window_sum -= rows[indices[t - k]].sim;
            out[indices[t]].sim = window_sum / static_cast<double>(std::min(t + 1, k));
        }
    }
    return out;
}

namespace {

std::string join_unique(const std::vector<std::string>& parts) {
    std::string joined;
    std::vector<std::string> seen;
    for (const std::string& p : parts) {
        if (std::find(seen.begin(), seen.end(), p) != seen.end()) continue;
        seen.push_back(p);
        if (!joined.empty()) joined += '+';
        joined += p;
    }
    return joined;
}

} // namespace

std::vector<ScoredClip> fuse_clip_scores(const std::vector<std::vector<ScoredClip>>& streams) {
    if (streams.size() < 2) {
        throw ValidationError("fusion needs at least 2 streams, got " +
                              std::to_string(streams.size()));
    }
    const std::vector<ScoredClip>& base = streams.front();
    std::vector<std::map<std::string, size_t>> index(streams.size());
    for (size_t s = 0; s < streams.size(); ++s) {
        for (size_t i = 0; i < streams[s].size(); ++i) {
            if (!index[s].emplace(streams[s][i].clip_id, i).second) {
                throw ValidationError("stream " + std::to_string(s) + " scores clip " +
                                      streams[s][i].clip_id + " twice");
            }
        }
        if (streams[s].size() != base.size()) {
            throw ValidationError("streams disagree on clip count: " +
                                  std::to_string(streams[s].size()) + " vs " +
                                  std::to_string(base.size()));
        }
    }

    std::vector<ScoredClip> fused;
    fused.reserve(base.size());
    for (const ScoredClip& row : base) {
        ScoredClip out = row;
        std::vector<std::string> views{row.view};
        std::vector<std::string> modalities{row.modality};
        double sum = row.sim;
        for (size_t s = 1; s < streams.size(); ++s) {
            auto it = index[s].find(row.clip_id);
            if (it == index[s].end()) {
                throw ValidationError("clip " + row.clip_id + " is missing from stream " +
                                      std::to_string(s));
            }
            const ScoredClip& other = streams[s][it->second];
            if (other.label != row.label || other.anomaly_class != row.anomaly_class ||
                other.seen_in_training != row.seen_in_training ||
                other.subject_id != row.subject_id || other.frame_start != row.frame_start ||
                other.frame_end != row.frame_end) {
                throw ValidationError("clip " + row.clip_id + " has conflicting metadata across streams");
            }
            views.push_back(other.view);
            modalities.push_back(other.modality);
            sum += other.sim;
        }
        out.view = join_unique(views);
        out.modality = join_unique(modalities);
        out.sim = sum / static_cast<double>(streams.size());
        fused.push_back(std::move(out));
    }
    return fused;
}

EvalReport report_from_rows(const std::vector<ScoredClip>& rows,
                            std::optional<double> gamma_override) {
    std::vector<double> normals;
    std::vector<double> seen;
    std::vector<double> unseen;
    for (const ScoredClip& row : rows) {
        if (row.label == Label::normal) {
            normals.push_back(row.sim);
        } else {
            (row.seen_in_training ? seen : unseen).push_back(row.sim);
        }
    }
    return compute_eval_report(normals, seen, unseen, gamma_override);
}

void write_scores_csv(const std::filesystem::path& path, const std::vector<ScoredClip>& rows) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw ValidationError("cannot open " + path.string() + " for writing");
    f << "clip_id,view,modality,label,anomaly_class,sim\n";
    for (const ScoredClip& row : rows) {
        f << row.clip_id << ',' << row.view << ',' << row.modality << ',' << to_string(row.label)
          << ',' << (row.anomaly_class.empty() ? "-" : row.anomaly_class) << ','
          << fmt_real(row.sim) << '\n';
    }
    f.flush();
    if (!f) throw ValidationError("failed writing " + path.string());
}

EvalRunResult run_eval(const std::map<StreamKey, EncoderParams>& models, const DatasetSplit& data,
                       const std::vector<StreamKey>& fuse_keys,
                       std::optional<double> gamma_override, size_t smooth_k, size_t threads) {
    if (models.empty()) throw ValidationError("no models to evaluate");
    if (fuse_keys.size() == 1) throw ValidationError("fusion needs at least 2 streams");
    for (const StreamKey& key : fuse_keys) {
        if (!models.count(key)) {
            throw ValidationError("fusion requests stream " + to_string(key) +
                                  " but no model covers it");
        }
    }

    EvalRunResult run;
    std::map<StreamKey, std::vector<ScoredClip>> raw;
    for (const auto& [key, params] : models) {
        std::vector<Vec> normal_features;
        for (const ClipSample& c : filter_stream(data.train, key.view, key.modality)) {
            if (c.label == Label::normal) normal_features.push_back(c.features);
        }
        if (normal_features.empty()) {
            throw ValidationError("no normal training clips for stream " + to_string(key));
        }
        const TemplateVector tmpl = build_template(params, normal_features);

        const std::vector<ClipSample> test = filter_stream(data.test, key.view, key.modality);
        if (test.empty()) {
            throw ValidationError("no test clips for stream " + to_string(key));
        }
        std::vector<ScoredClip> rows = score_clips(params, tmpl, test, threads);
        raw[key] = rows;
        if (smooth_k > 1) rows = smooth_clip_scores(rows, smooth_k);

        StreamEvalResult result;
        result.report = report_from_rows(rows, gamma_override);
        result.rows = std::move(rows);
        run.streams.emplace(key, std::move(result));
    }

    if (fuse_keys.size() >= 2) {
        std::vector<std::vector<ScoredClip>> selected;
        selected.reserve(fuse_keys.size());
        for (const StreamKey& key : fuse_keys) selected.push_back(raw.at(key));
        std::vector<ScoredClip> rows = fuse_clip_scores(selected);
        if (smooth_k > 1) rows = smooth_clip_scores(rows, smooth_k);

        StreamEvalResult result;
        result.report = report_from_rows(rows, gamma_override);
        result.rows = std::move(rows);
        run.fused = std::move(result);
        run.fuse_keys = fuse_keys;
    }
    return run;
}

std::string eval_run_to_json(const EvalRunResult& run, int indent) {
    nlohmann::json j;
    j["streams"] = nlohmann::json::object();
    for (const auto& [key, result] : run.streams) {
        j["streams"][to_string(key)] = nlohmann::json::parse(report_to_json(result.report));
    }
    if (run.fused) {
        nlohmann::json keys = nlohmann::json::array();
        for (const StreamKey& key : run.fuse_keys) keys.push_back(to_string(key));
        j["fused"] = {{"keys", keys},
                      {"report", nlohmann::json::parse(report_to_json(run.fused->report))}};
    }
    return j.dump(indent);
}

SubjectStreamResult score_subject_stream(const EncoderParams& params, const TemplateVector& tmpl,
                                         const std::vector<ClipSample>& subject_clips, double gamma,
                                         size_t smooth_k) {
    if (subject_clips.empty()) throw ValidationError("no clips to score for this stream");
    for (const ClipSample& c : subject_clips) {
        if (c.subject_id != subject_clips.front().subject_id ||
            c.view != subject_clips.front().view ||
            c.modality != subject_clips.front().modality) {
            throw std::invalid_argument(
                "score_subject_stream expects clips of a single subject and stream");
        }
    }

    std::vector<const ClipSample*> ordered;
    ordered.reserve(subject_clips.size());
    for (const ClipSample& c : subject_clips) ordered.push_back(&c);
    std::sort(ordered.begin(), ordered.end(), [](const ClipSample* a, const ClipSample* b) {
        return a->frame_start < b->frame_start;
    });
    for (size_t i = 0; i < ordered.size(); ++i) {
        const ClipSample& c = *ordered[i];
        if (c.frame_end - c.frame_start + 1 != kClipFrames) {
            throw ValidationError("clip " + c.clip_id + " spans " +
                                  std::to_string(c.frame_end - c.frame_start + 1) +
                                  " frames, streaming expects " + std::to_string(kClipFrames));
        }
        if (i > 0 && c.frame_start <= ordered[i - 1]->frame_end) {
            throw ValidationError("clips " + ordered[i - 1]->clip_id + " and " + c.clip_id +
                                  " overlap in time");
        }
    }

    SubjectStreamResult result;
    for (const ClipSample* c : ordered) {
        result.clip_scores.frames.push_back(c->frame_start + kAssignedOffset);
        result.clip_scores.scores.push_back(score_clip(params, tmpl, c->features));
    }
    if (smooth_k > 1) result.clip_scores = smooth(result.clip_scores, smooth_k);

    result.frame_scores = expand_causal(result.clip_scores, ordered.back()->frame_end);

    // Label every expanded frame by the clip that covers it; frames in a gap
    // between clips hold the previous clip's label, matching the causal-hold
    // scores.
    result.frame_labels.reserve(result.frame_scores.frames.size());
    size_t clip_idx = 0;
    for (int64_t f : result.frame_scores.frames) {
        while (clip_idx + 1 < ordered.size() && f >= ordered[clip_idx + 1]->frame_start) {
            ++clip_idx;
        }
        result.frame_labels.push_back(ordered[clip_idx]->label == Label::anomalous ? 1 : 0);
    }

    const bool has_normal =
        std::find(result.frame_labels.begin(), result.frame_labels.end(), 0) !=
        result.frame_labels.end();
    const bool has_anomaly =
        std::find(result.frame_labels.begin(), result.frame_labels.end(), 1) !=
        result.frame_labels.end();
    if (has_normal && has_anomaly) {
        result.metrics = frame_metrics(result.frame_scores, result.frame_labels, gamma);
    }
    return result;
}

} // namespace anomet
