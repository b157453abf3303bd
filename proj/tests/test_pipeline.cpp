#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "anomet/data.hpp"
#include "anomet/encoder.hpp"
#include "anomet/errors.hpp"
#include "anomet/evaluation.hpp"
#include "anomet/pipeline.hpp"
#include "anomet/stream.hpp"

using namespace anomet;
namespace fs = std::filesystem;

namespace {

// Identity-map encoder over 2-d inputs so similarities are hand-computable.
EncoderParams identity_encoder() {
    EncoderDims d;
    d.input_dim = 2;
    d.embed_dim = 2;
    d.head_hidden_dim = 2;
    d.proj_dim = 2;
    EncoderParams p = init_encoder(d, uint64_t{0});
    p.layers[0].w = Mat::identity(2);
    p.layers[0].b = {0.0, 0.0};
    return p;
}

ClipSample clip(const std::string& id, const std::string& subject, Label label, Vec features,
                int64_t start) {
    ClipSample c;
    c.clip_id = id;
    c.subject_id = subject;
    c.view = View::top;
    c.modality = Modality::depth;
    c.label = label;
    c.anomaly_class = label == Label::anomalous ? "fall" : "";
    c.seen_in_training = true;
    c.features = std::move(features);
    c.frame_start = start;
    c.frame_end = start + 31;
    return c;
}

ScoredClip scored(const std::string& id, const std::string& subject, double sim, int64_t start,
                  Label label = Label::normal) {
    ScoredClip r;
    r.clip_id = id;
    r.subject_id = subject;
    r.view = "top";
    r.modality = "depth";
    r.label = label;
    r.anomaly_class = label == Label::anomalous ? "fall" : "";
    r.seen_in_training = true;
    r.frame_start = start;
    r.frame_end = start + 31;
    r.sim = sim;
    return r;
}

} // namespace

TEST_CASE("score_clips reproduces score_clip per row") {
    const EncoderParams p = identity_encoder();
    TemplateVector tmpl;
    tmpl.values = {0.5, 0.5};
    tmpl.count = 2;

    std::vector<ClipSample> clips = {
        clip("a", "s0", Label::normal, {1.0, 1.0}, 0),
        clip("b", "s0", Label::anomalous, {1.0, 0.0}, 32),
        clip("c", "s1", Label::normal, {0.0, 1.0}, 0),
    };
    const auto rows = score_clips(p, tmpl, clips);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].clip_id == "a");
    // (1,1) embeds to (1/sqrt2, 1/sqrt2): sim = <(0.5,0.5), .> = 1/sqrt2
    CHECK(rows[0].sim == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
    // axis-aligned clips: sim = 0.5 against the (0.5, 0.5) template
    CHECK(rows[1].sim == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(rows[1].view == "top");
    CHECK(rows[1].anomaly_class == "fall");
    CHECK(rows[2].sim == doctest::Approx(0.5).epsilon(1e-12));

    // thread count never changes the result
    for (size_t threads : {size_t(2), size_t(3), size_t(8)}) {
        const auto par = score_clips(p, tmpl, clips, threads);
        REQUIRE(par.size() == rows.size());
        for (size_t i = 0; i < rows.size(); ++i) {
            CHECK(par[i].clip_id == rows[i].clip_id);
            CHECK(par[i].sim == rows[i].sim); // bitwise equal
        }
    }
}

TEST_CASE("smooth_clip_scores averages along each subject timeline") {
    // subject s0 clips at 0/32/64 scoring 1, 0, 0: k=2 gives 1, 0.5, 0;
    // subject s1 is independent.
    std::vector<ScoredClip> rows = {
        scored("a0", "s0", 1.0, 0),
        scored("a1", "s0", 0.0, 32),
        scored("a2", "s0", 0.0, 64),
        scored("b0", "s1", 0.4, 0),
    };
    // shuffle input order: smoothing must follow frame_start, not row order
    std::swap(rows[0], rows[2]);

    const auto out = smooth_clip_scores(rows, 2);
    REQUIRE(out.size() == 4);
    auto sim_of = [&](const std::string& id) {
        for (const ScoredClip& r : out)
            if (r.clip_id == id) return r.sim;
        FAIL("missing clip " << id);
        return 0.0;
    };
    CHECK(sim_of("a0") == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(sim_of("a1") == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(sim_of("a2") == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(sim_of("b0") == doctest::Approx(0.4).epsilon(1e-15));

    // row order and metadata pass through unchanged
    CHECK(out[0].clip_id == rows[0].clip_id);
    CHECK(out[3].clip_id == "b0");

    // k = 1 is the identity
    const auto same = smooth_clip_scores(rows, 1);
    for (size_t i = 0; i < rows.size(); ++i) CHECK(same[i].sim == rows[i].sim);
}

TEST_CASE("fuse_clip_scores averages matching clips across streams") {
    std::vector<ScoredClip> depth = {scored("a", "s0", 0.8, 0), scored("b", "s0", 0.2, 32)};
    std::vector<ScoredClip> ir = depth;
    ir[0].modality = "ir";
    ir[1].modality = "ir";
    ir[0].sim = 0.6;
    ir[1].sim = 0.4;

    const auto fused = fuse_clip_scores({depth, ir});
    REQUIRE(fused.size() == 2);
    CHECK(fused[0].sim == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(fused[1].sim == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(fused[0].modality == "depth+ir");
    CHECK(fused[0].view == "top");
    CHECK(fused[0].clip_id == "a");
}

TEST_CASE("fuse_clip_scores validates stream agreement") {
    std::vector<ScoredClip> depth = {scored("a", "s0", 0.8, 0), scored("b", "s0", 0.2, 32)};

    SUBCASE("too few streams") {
        CHECK_THROWS_AS(fuse_clip_scores({depth}), ValidationError);
    }
    SUBCASE("clip count mismatch") {
        std::vector<ScoredClip> ir = {depth[0]};
        CHECK_THROWS_AS(fuse_clip_scores({depth, ir}), ValidationError);
    }
    SUBCASE("missing clip id") {
        std::vector<ScoredClip> ir = depth;
        ir[1].clip_id = "zz";
        CHECK_THROWS_AS(fuse_clip_scores({depth, ir}), ValidationError);
    }
    SUBCASE("conflicting label metadata") {
        std::vector<ScoredClip> ir = depth;
        ir[1].label = Label::anomalous;
        ir[1].anomaly_class = "fall";
        CHECK_THROWS_AS(fuse_clip_scores({depth, ir}), ValidationError);
    }
    SUBCASE("duplicate clip id within a stream") {
        std::vector<ScoredClip> dup = depth;
        dup[1].clip_id = "a";
        CHECK_THROWS_AS(fuse_clip_scores({dup, depth}), ValidationError);
    }
}

TEST_CASE("report_from_rows splits anomalies by the seen flag") {
    std::vector<ScoredClip> rows = {
        scored("n0", "s0", 0.9, 0),
        scored("n1", "s0", 0.8, 32),
        scored("a0", "s0", 0.85, 64, Label::anomalous),
        scored("a1", "s0", 0.1, 96, Label::anomalous),
        scored("u0", "s0", 0.2, 128, Label::anomalous),
    };
    rows[4].seen_in_training = false;
    rows[4].anomaly_class = "wander";

    const EvalReport r = report_from_rows(rows, std::nullopt);
    CHECK(r.counts.normals == 2);
    CHECK(r.counts.anomalies_seen == 2);
    CHECK(r.counts.anomalies_unseen == 1);
    // pooled anomalies {0.85, 0.1, 0.2} vs normals {0.9, 0.8}: 5 of 6 pairs
    CHECK(r.auc == doctest::Approx(5.0 / 6.0).epsilon(1e-15));

    // gamma 0.5: seen specificity 1/2, open 1/1
    const EvalReport g = report_from_rows(rows, 0.5);
    REQUIRE(g.specificity_closed.has_value());
    REQUIRE(g.specificity_open.has_value());
    CHECK(*g.specificity_closed == doctest::Approx(0.5));
    CHECK(*g.specificity_open == doctest::Approx(1.0));
    CHECK(g.specificity_average == doctest::Approx(2.0 / 3.0).epsilon(1e-15));

    CHECK_THROWS_AS(report_from_rows({rows[0]}, std::nullopt), ValidationError);
}

TEST_CASE("write_scores_csv emits the documented layout") {
    const fs::path path = fs::temp_directory_path() / "anomet_test_scores.csv";
    std::vector<ScoredClip> rows = {scored("a", "s0", 0.75, 0),
                                    scored("b", "s0", 0.25, 32, Label::anomalous)};
    write_scores_csv(path, rows);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "clip_id,view,modality,label,anomaly_class,sim");
    std::getline(in, line);
    CHECK(line == "a,top,depth,normal,-,0.75");
    std::getline(in, line);
    CHECK(line == "b,top,depth,anomalous,fall,0.25");
    in.close();
    fs::remove(path);
}

TEST_CASE("run_eval produces per-stream and fused reports") {
    // Two streams of an easy synthetic set, trained-free: identity encoders
    // suffice because the features already separate on the sphere.
    SynthConfig cfg;
    cfg.seed = 91;
    cfg.input_dim = 8;
    cfg.train_subjects = 4;
    cfg.test_subjects = 2;
    cfg.train_normal_clips = 6;
    cfg.train_anomaly_clips = 3;
    cfg.test_normal_clips = 6;
    cfg.seen_classes = 3;
    cfg.unseen_classes = 2;
    cfg.noise_sigma = 0.05;
    const DatasetSplit data = generate_synthetic(cfg);

    EncoderDims d;
    d.input_dim = 8;
    d.embed_dim = 8;
    d.head_hidden_dim = 8;
    d.proj_dim = 8;
    EncoderParams ident = init_encoder(d, uint64_t{0});
    ident.layers[0].w = Mat::identity(8);
    ident.layers[0].b = Vec(8, 0.0);

    std::map<StreamKey, EncoderParams> models;
    models.emplace(StreamKey{View::top, Modality::depth}, ident);
    models.emplace(StreamKey{View::top, Modality::ir}, ident);

    const std::vector<StreamKey> fuse_keys = {StreamKey{View::top, Modality::depth},
                                              StreamKey{View::top, Modality::ir}};
    const EvalRunResult run = run_eval(models, data, fuse_keys, std::nullopt, 1);
    REQUIRE(run.streams.size() == 2);
    REQUIRE(run.fused.has_value());

    // same clip set in every stream and in the fusion
    const auto& depth_rows = run.streams.at(StreamKey{View::top, Modality::depth}).rows;
    CHECK(run.fused->rows.size() == depth_rows.size());
    CHECK(run.fused->rows[0].view == "top");
    CHECK(run.fused->rows[0].modality == "depth+ir");

    // the class structure is easy: every report separates decently
    for (const auto& [key, res] : run.streams) CHECK(res.report.auc > 0.8);
    CHECK(run.fused->report.auc > 0.8);

    // fused similarity is the mean of the two stream rows for each clip
    const auto& ir_rows = run.streams.at(StreamKey{View::top, Modality::ir}).rows;
    for (size_t i = 0; i < depth_rows.size(); ++i) {
        CHECK(run.fused->rows[i].sim ==
              doctest::Approx((depth_rows[i].sim + ir_rows[i].sim) / 2.0).epsilon(1e-12));
    }

    // the JSON document names every stream and the fusion
    const std::string doc = eval_run_to_json(run);
    CHECK(doc.find("\"top:depth\"") != std::string::npos);
    CHECK(doc.find("\"top:ir\"") != std::string::npos);
    CHECK(doc.find("\"fused\"") != std::string::npos);

    SUBCASE("threading changes nothing") {
        const EvalRunResult par = run_eval(models, data, fuse_keys, std::nullopt, 1, 4);
        CHECK(eval_run_to_json(par) == doc);
    }
    SUBCASE("gamma override propagates") {
        const EvalRunResult g = run_eval(models, data, {}, 0.5, 1);
        for (const auto& [key, res] : g.streams) CHECK(res.report.gamma == 0.5);
    }
    SUBCASE("fusion needs at least two keys") {
        CHECK_THROWS_AS(run_eval(models, data, {fuse_keys[0]}, std::nullopt, 1),
                        ValidationError);
    }
    SUBCASE("fusion keys must have models") {
        std::vector<StreamKey> missing = {StreamKey{View::front, Modality::depth},
                                          StreamKey{View::top, Modality::ir}};
        CHECK_THROWS_AS(run_eval(models, data, missing, std::nullopt, 1), ValidationError);
    }
    SUBCASE("no models at all") {
        CHECK_THROWS_AS(run_eval({}, data, {}, std::nullopt, 1), ValidationError);
    }
}

TEST_CASE("score_subject_stream walks one recording causally") {
    const EncoderParams p = identity_encoder();
    TemplateVector tmpl;
    tmpl.values = {1.0, 0.0}; // template along x
    tmpl.count = 1;

    // three consecutive clips: normal, anomalous, normal
    std::vector<ClipSample> clips = {
        clip("r0", "s9", Label::normal, {1.0, 0.0}, 0),
        clip("r1", "s9", Label::anomalous, {0.0, 1.0}, 32),
        clip("r2", "s9", Label::normal, {1.0, 0.0}, 64),
    };

    const SubjectStreamResult r = score_subject_stream(p, tmpl, clips, 0.5, 1);

    // clip scores at the assigned frames 14, 46, 78
    REQUIRE(r.clip_scores.frames == std::vector<int64_t>{14, 46, 78});
    CHECK(r.clip_scores.scores[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.clip_scores.scores[1] == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(r.clip_scores.scores[2] == doctest::Approx(1.0).epsilon(1e-12));

    // frame scores run from 14 through the last frame 95, causal hold
    REQUIRE(r.frame_scores.frames.front() == 14);
    REQUIRE(r.frame_scores.frames.back() == 95);
    REQUIRE(r.frame_scores.frames.size() == size_t(95 - 14 + 1));
    CHECK(r.frame_scores.scores[0] == r.clip_scores.scores[0]);
    // frame 45 still holds clip r0's score, frame 46 switches to r1
    CHECK(r.frame_scores.scores[45 - 14] == r.clip_scores.scores[0]);
    CHECK(r.frame_scores.scores[46 - 14] == r.clip_scores.scores[1]);

    // labels follow the covering clip: frames 14..31 normal, 32..63 anomalous
    REQUIRE(r.frame_labels.size() == r.frame_scores.frames.size());
    CHECK(r.frame_labels[0] == 0);
    CHECK(r.frame_labels[32 - 14] == 1);
    CHECK(r.frame_labels[63 - 14] == 1);
    CHECK(r.frame_labels[64 - 14] == 0);

    // both classes present, so metrics exist
    REQUIRE(r.metrics.has_value());
    CHECK(r.metrics->auc > 0.5);

    SUBCASE("single-class recordings have no metrics") {
        std::vector<ClipSample> homogeneous = {clips[0], clips[2]};
        homogeneous[1].frame_start = 32;
        homogeneous[1].frame_end = 63;
        const SubjectStreamResult h = score_subject_stream(p, tmpl, homogeneous, 0.5, 1);
        CHECK_FALSE(h.metrics.has_value());
    }
    SUBCASE("smoothing the clip scores") {
        const SubjectStreamResult sm = score_subject_stream(p, tmpl, clips, 0.5, 2);
        CHECK(sm.clip_scores.scores[1] ==
              doctest::Approx((r.clip_scores.scores[0] + r.clip_scores.scores[1]) / 2.0)
                  .epsilon(1e-12));
    }
    SUBCASE("mixed subjects are rejected") {
        std::vector<ClipSample> mixed = clips;
        mixed[1].subject_id = "other";
        CHECK_THROWS_AS(score_subject_stream(p, tmpl, mixed, 0.5, 1), std::invalid_argument);
    }
    SUBCASE("overlapping spans are rejected") {
        std::vector<ClipSample> overlap = clips;
        overlap[1].frame_start = 16;
        overlap[1].frame_end = 47;
        CHECK_THROWS_AS(score_subject_stream(p, tmpl, overlap, 0.5, 1), ValidationError);
    }
    SUBCASE("non-32-frame spans are rejected") {
        std::vector<ClipSample> bad = clips;
        bad[1].frame_end = bad[1].frame_start + 40;
        CHECK_THROWS_AS(score_subject_stream(p, tmpl, bad, 0.5, 1), ValidationError);
    }
    SUBCASE("empty recordings are rejected") {
        CHECK_THROWS_AS(score_subject_stream(p, tmpl, {}, 0.5, 1), ValidationError);
    }
}
