#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "anomet/errors.hpp"
#include "anomet/rng.hpp"
#include "anomet/stream.hpp"

using namespace anomet;
namespace fs = std::filesystem;

namespace {

ScoreSeries make_series(std::vector<int64_t> frames, std::vector<double> scores) {
    ScoreSeries s;
    s.frames = std::move(frames);
    s.scores = std::move(scores);
    return s;
}

ScoreSeries random_series(size_t n, Rng& rng) {
    ScoreSeries s;
    int64_t f = int64_t(rng.below(5));
    for (size_t i = 0; i < n; ++i) {
        s.frames.push_back(f);
        f += 1 + int64_t(rng.below(3));
        s.scores.push_back(rng.uniform(-1.0, 1.0));
    }
    return s;
}

} // namespace

TEST_CASE("window_clips cuts aligned 32-frame windows") {
    const auto two = window_clips(64);
    REQUIRE(two.size() == 2);
    CHECK(two[0].start == 0);
    CHECK(two[0].end == 31);
    CHECK(two[0].assigned == 14);
    CHECK(two[1].start == 32);
    CHECK(two[1].end == 63);
    CHECK(two[1].assigned == 46);

    // 70 frames: the 6-frame tail is dropped
    const auto tail = window_clips(70);
    REQUIRE(tail.size() == 2);
    CHECK(tail[1].end == 63);

    const auto one = window_clips(32);
    REQUIRE(one.size() == 1);

    CHECK_THROWS_AS(window_clips(31), ValidationError);
    CHECK_THROWS_AS(window_clips(0), ValidationError);
}

TEST_CASE("window coverage has no gaps or overlap") {
    for (int64_t frames : {32, 33, 64, 70, 1000, 4096}) {
        const auto wins = window_clips(frames);
        CHECK(int64_t(wins.size()) == frames / kClipFrames);
        for (size_t i = 0; i < wins.size(); ++i) {
            CHECK(wins[i].end - wins[i].start + 1 == kClipFrames);
            CHECK(wins[i].assigned == wins[i].start + kAssignedOffset);
            if (i > 0) CHECK(wins[i].start == wins[i - 1].end + 1);
        }
        CHECK(wins.front().start == 0);
        CHECK(wins.back().end == int64_t(wins.size()) * kClipFrames - 1);
    }
}

TEST_CASE("sampled_frames picks every second frame of the window") {
    const auto wins = window_clips(64);
    const auto picks = sampled_frames(wins[1]);
    REQUIRE(picks.size() == 16);
    CHECK(picks.front() == 32);
    CHECK(picks[1] == 34);
    CHECK(picks.back() == 62);
    // the assigned frame is the 8th sample
    CHECK(picks[7] == wins[1].assigned);
}

TEST_CASE("stream keys round-trip through their string form") {
    const StreamKey k{View::front, Modality::ir};
    CHECK(to_string(k) == "front:ir");
    CHECK(stream_key_from_string("front:ir") == k);
    CHECK(stream_key_from_string("top:depth") == (StreamKey{View::top, Modality::depth}));
    CHECK_THROWS_AS(stream_key_from_string("frontir"), ValidationError);
    CHECK_THROWS_AS(stream_key_from_string("side:ir"), ValidationError);
    CHECK_THROWS_AS(stream_key_from_string("top:sonar"), ValidationError);
}

TEST_CASE("fuse averages aligned series") {
    const ScoreSeries a = make_series({0, 1}, {0.8, 0.4});
    const ScoreSeries b = make_series({0, 1}, {0.6, 0.2});
    const ScoreSeries f = fuse({a, b});
    CHECK(f.frames == std::vector<int64_t>{0, 1});
    CHECK(f.scores[0] == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(f.scores[1] == doctest::Approx(0.3).epsilon(1e-15));

    // four streams
    const ScoreSeries f4 = fuse({make_series({5}, {0.9}), make_series({5}, {0.7}),
                                 make_series({5}, {0.8}), make_series({5}, {0.6})});
    CHECK(f4.scores[0] == doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("fusing a series with itself is the identity") {
    Rng rng(81);
    const ScoreSeries s = random_series(40, rng);
    const ScoreSeries f = fuse({s, s, s});
    REQUIRE(f.frames == s.frames);
    for (size_t i = 0; i < s.scores.size(); ++i)
        CHECK(f.scores[i] == doctest::Approx(s.scores[i]).epsilon(1e-15));
}

TEST_CASE("fuse validates alignment and arity") {
    const ScoreSeries a = make_series({0, 1}, {0.8, 0.4});
    CHECK_THROWS_AS(fuse({a}), ValidationError);
    CHECK_THROWS_AS(fuse(std::vector<ScoreSeries>{}), ValidationError);
    const ScoreSeries shifted = make_series({0, 2}, {0.8, 0.4});
    CHECK_THROWS_AS(fuse({a, shifted}), ValidationError);
    const ScoreSeries shorter = make_series({0}, {0.8});
    CHECK_THROWS_AS(fuse({a, shorter}), ValidationError);
}

TEST_CASE("fuse over a stream set selects by key") {
    StreamSet set;
    set[StreamKey{View::top, Modality::depth}] = make_series({0}, {0.9});
    set[StreamKey{View::top, Modality::ir}] = make_series({0}, {0.5});
    set[StreamKey{View::front, Modality::depth}] = make_series({0}, {0.1});

    const ScoreSeries f = fuse(set, {StreamKey{View::top, Modality::depth},
                                     StreamKey{View::top, Modality::ir}});
    CHECK(f.scores[0] == doctest::Approx(0.7).epsilon(1e-15));
    CHECK_THROWS_AS(fuse(set, {StreamKey{View::front, Modality::ir},
                               StreamKey{View::top, Modality::ir}}),
                    ValidationError); // missing stream
}

TEST_CASE("smooth hand case and identity") {
    const ScoreSeries s = make_series({0, 1, 2}, {1.0, 0.0, 0.0});
    const ScoreSeries k2 = smooth(s, 2);
    CHECK(k2.scores[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(k2.scores[1] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(k2.scores[2] == doctest::Approx(0.0).epsilon(1e-15));

    CHECK(smooth(s, 1) == s);
    CHECK_THROWS_AS(smooth(s, 0), ValidationError);

    // k wider than the series: every prefix mean
    const ScoreSeries wide = smooth(s, 10);
    CHECK(wide.scores[2] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("smoothing stays inside the raw score range") {
    Rng rng(82);
    for (size_t k : {size_t(2), size_t(5), size_t(13)}) {
        const ScoreSeries s = random_series(60, rng);
        const ScoreSeries sm = smooth(s, k);
        const double lo = *std::min_element(s.scores.begin(), s.scores.end());
        const double hi = *std::max_element(s.scores.begin(), s.scores.end());
        for (double v : sm.scores) {
            CHECK(v >= lo - 1e-12);
            CHECK(v <= hi + 1e-12);
        }
    }
}

TEST_CASE("fuse and smooth commute with positive affine maps") {
    Rng rng(83);
    ScoreSeries a = random_series(30, rng);
    ScoreSeries b = a;
    for (double& v : b.scores) v = rng.uniform(-1.0, 1.0);

    const double scale = 2.5, shift = -0.75;
    auto affine = [&](ScoreSeries s) {
        for (double& v : s.scores) v = scale * v + shift;
        return s;
    };

    const ScoreSeries fused_then = affine(fuse({a, b}));
    const ScoreSeries then_fused = fuse({affine(a), affine(b)});
    for (size_t i = 0; i < fused_then.scores.size(); ++i)
        CHECK(fused_then.scores[i] == doctest::Approx(then_fused.scores[i]).epsilon(1e-12));

    const ScoreSeries sm_then = affine(smooth(a, 4));
    const ScoreSeries then_sm = smooth(affine(a), 4);
    for (size_t i = 0; i < sm_then.scores.size(); ++i)
        CHECK(sm_then.scores[i] == doctest::Approx(then_sm.scores[i]).epsilon(1e-12));
}

TEST_CASE("expand_causal holds the last score forward") {
    // clip scores at frames 14 and 46, expanded through frame 50
    const ScoreSeries sparse = make_series({14, 46}, {0.9, 0.3});
    const ScoreSeries dense = expand_causal(sparse, 50);
    REQUIRE(dense.frames.size() == size_t(50 - 14 + 1));
    CHECK(dense.frames.front() == 14);
    CHECK(dense.frames.back() == 50);
    CHECK(dense.scores[0] == 0.9);
    CHECK(dense.scores[31] == 0.9);  // frame 45, still the first score
    CHECK(dense.scores[32] == 0.3);  // frame 46 switches
    CHECK(dense.scores.back() == 0.3);

    CHECK_THROWS_AS(expand_causal(make_series({}, {}), 10), ValidationError);
    CHECK_THROWS_AS(expand_causal(sparse, 45), ValidationError); // before last score
}

TEST_CASE("frame_metrics scores the expanded series") {
    // scores {0.9, 0.2, 0.8, 0.1}, labels {0,1,0,1}, gamma 0.5:
    // every frame classified correctly, auc 1
    const ScoreSeries s = make_series({0, 1, 2, 3}, {0.9, 0.2, 0.8, 0.1});
    const FrameMetrics m = frame_metrics(s, {0, 1, 0, 1}, 0.5);
    CHECK(m.accuracy == doctest::Approx(1.0));
    CHECK(m.auc == doctest::Approx(1.0));

    // swap the middle labels: half the frames flip to wrong
    const FrameMetrics worse = frame_metrics(s, {0, 1, 1, 0}, 0.5);
    CHECK(worse.accuracy == doctest::Approx(0.5));
    // normals now score {0.9, 0.1}, anomalies {0.2, 0.8}: 2 of 4 pairs win
    CHECK(worse.auc == doctest::Approx(0.5));

    CHECK_THROWS_AS(frame_metrics(s, {0, 1, 0}, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(frame_metrics(s, {0, 0, 0, 2}, 0.5), ValidationError);
}

TEST_CASE("series csv round-trips exactly") {
    const fs::path path = fs::temp_directory_path() / "anomet_test_series.csv";
    Rng rng(84);
    const ScoreSeries s = random_series(25, rng);
    write_series_csv(path, s);
    const ScoreSeries back = read_series_csv(path);
    CHECK(back == s); // bit-exact via shortest round-trip formatting

    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "frame_index,score");
    in.close();
    fs::remove(path);
}

TEST_CASE("read_series_csv reports malformed rows with line numbers") {
    const fs::path path = fs::temp_directory_path() / "anomet_test_series_bad.csv";

    SUBCASE("wrong header") {
        std::ofstream(path) << "frame,score\n0,0.5\n";
        CHECK_THROWS_WITH_AS(read_series_csv(path),
                             doctest::Contains(":1:"), ValidationError);
    }
    SUBCASE("non-numeric score") {
        std::ofstream(path) << "frame_index,score\n0,abc\n";
        CHECK_THROWS_WITH_AS(read_series_csv(path), doctest::Contains(":2:"), ValidationError);
    }
    SUBCASE("frames out of order") {
        std::ofstream(path) << "frame_index,score\n5,0.5\n3,0.4\n";
        CHECK_THROWS_AS(read_series_csv(path), ValidationError);
    }
    SUBCASE("missing file") {
        fs::remove(path);
        CHECK_THROWS_AS(read_series_csv(path), ValidationError);
    }
    fs::remove(path);
}

TEST_CASE("plot csv carries label and threshold columns") {
    const fs::path path = fs::temp_directory_path() / "anomet_test_plot.csv";
    const ScoreSeries s = make_series({3, 4}, {0.25, 0.5});
    write_plot_csv(path, s, {0, 1}, 0.4);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "frame_index,score,label,threshold");
    std::getline(in, line);
    CHECK(line == "3,0.25,0,0.4");
    std::getline(in, line);
    CHECK(line == "4,0.5,1,0.4");
    in.close();
    fs::remove(path);
}
