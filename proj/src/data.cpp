#include "anomet/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <stdexcept>
#include <utility>

#include "anomet/errors.hpp"
#include "anomet/rng.hpp"
#include "anomet/stream.hpp"
#include "anomet/text.hpp"

namespace anomet {

std::string to_string(View v) { return v == View::top ? "top" : "front"; }
std::string to_string(Modality m) { return m == Modality::depth ? "depth" : "ir"; }
std::string to_string(Label l) { return l == Label::normal ? "normal" : "anomalous"; }

View view_from_string(const std::string& s) {
    if (s == "top") return View::top;
    if (s == "front") return View::front;
    throw ValidationError("unknown view '" + s + "' (expected top|front)");
}

Modality modality_from_string(const std::string& s) {
    if (s == "depth") return Modality::depth;
    if (s == "ir") return Modality::ir;
    throw ValidationError("unknown modality '" + s + "' (expected depth|ir)");
}

Label label_from_string(const std::string& s) {
    if (s == "normal") return Label::normal;
    if (s == "anomalous") return Label::anomalous;
    throw ValidationError("unknown label '" + s + "' (expected normal|anomalous)");
}

namespace {

constexpr char kFeatureMagic[8] = {'A', 'N', 'O', 'M', 'F', 'V', 'E', 'C'};

const char* const kColumns[] = {"clip_id",       "subject_id",  "split",
                                "view",          "modality",    "label",
                                "anomaly_class", "seen_in_training", "frame_start",
                                "frame_end"};

} // namespace

void write_feature_file(const std::filesystem::path& path, const Vec& values) {
    if (values.empty()) throw ValidationError("refusing to write empty feature vector");
    std::string out(kFeatureMagic, sizeof(kFeatureMagic));
    const uint32_t dim = static_cast<uint32_t>(values.size());
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((dim >> (8 * i)) & 0xff));
    for (double v : values) {
        const uint64_t bits = std::bit_cast<uint64_t>(v);
        for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw ValidationError("cannot open " + path.string() + " for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    f.flush();
    if (!f) throw ValidationError("failed writing " + path.string());
}

Vec read_feature_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot open feature file " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    if (bytes.size() < sizeof(kFeatureMagic) + 4 ||
        std::memcmp(bytes.data(), kFeatureMagic, sizeof(kFeatureMagic)) != 0) {
        throw ValidationError(path.string() + ": not a feature vector file (bad magic)");
    }
    uint32_t dim = 0;
    for (int i = 0; i < 4; ++i) {
        dim |= static_cast<uint32_t>(static_cast<unsigned char>(bytes[sizeof(kFeatureMagic) + i]))
               << (8 * i);
    }
    const size_t expected = sizeof(kFeatureMagic) + 4 + static_cast<size_t>(dim) * 8;
    if (bytes.size() != expected) {
        throw ValidationError(path.string() + ": expected " + std::to_string(expected) +
                              " bytes for dim " + std::to_string(dim) + ", found " +
                              std::to_string(bytes.size()));
    }
    Vec values(dim);
    size_t pos = sizeof(kFeatureMagic) + 4;
    for (double& v : values) {
        uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) {
            bits |= static_cast<uint64_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
        }
        v = std::bit_cast<double>(bits);
        pos += 8;
    }
    return values;
}

void save_manifest(const DatasetSplit& split, const std::filesystem::path& path,
                   bool binary_features) {
    const std::filesystem::path dir = path.has_parent_path() ? path.parent_path() : ".";
    const std::filesystem::path feature_dir = dir / "features";
    if (binary_features) std::filesystem::create_directories(feature_dir);

    std::string out;
    for (const char* col : kColumns) {
        out += col;
        out += '\t';
    }
    out += binary_features ? "features_file" : "features";
    out += '\n';

    auto emit = [&](const std::vector<ClipSample>& clips, const char* split_name) {
        for (const ClipSample& c : clips) {
            if (c.features.empty()) {
                throw ValidationError("clip " + c.clip_id + " has no feature values");
            }
            out += c.clip_id;
            out += '\t';
            out += c.subject_id;
            out += '\t';
            out += split_name;
            out += '\t';
            out += to_string(c.view);
            out += '\t';
            out += to_string(c.modality);
            out += '\t';
            out += to_string(c.label);
            out += '\t';
            out += c.anomaly_class.empty() ? "-" : c.anomaly_class;
            out += '\t';
            out += c.seen_in_training ? "1" : "0";
            out += '\t';
            out += std::to_string(c.frame_start);
            out += '\t';
            out += std::to_string(c.frame_end);
            out += '\t';
            if (binary_features) {
                const std::string name =
                    c.clip_id + "_" + to_string(c.view) + "_" + to_string(c.modality) + ".fvec";
                write_feature_file(feature_dir / name, c.features);
                out += "features/" + name;
            } else {
                for (size_t i = 0; i < c.features.size(); ++i) {
                    if (i) out += ',';
                    out += fmt_real(c.features[i]);
                }
            }
            out += '\n';
        }
    };
    emit(split.train, "train");
    emit(split.test, "test");

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw ValidationError("cannot open " + path.string() + " for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    f.flush();
    if (!f) throw ValidationError("failed writing " + path.string());
}

DatasetSplit load_manifest(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ValidationError("cannot open manifest " + path.string());

    auto fail = [&](size_t line_no, const std::string& msg) -> void {
        throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + msg);
    };

    // Header: tab-separated column names, order free, each exactly once,
    // with either inline features or sidecar file references.
    std::map<std::string, size_t> col;
    bool binary_features = false;
    size_t n_cols = 0;

    DatasetSplit split;
    std::vector<size_t> train_lines; // for diagnostics after parsing
    std::vector<size_t> test_lines;

    std::string line;
    size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(f, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;

        std::vector<std::string> fields = split_on(line, '\t');
        if (!header_seen) {
            header_seen = true;
            bool inline_features = false;
            for (size_t i = 0; i < fields.size(); ++i) {
                const std::string& name = fields[i];
                if (col.count(name)) fail(line_no, "duplicate column '" + name + "'");
                const bool known = std::any_of(std::begin(kColumns), std::end(kColumns),
                                               [&](const char* c) { return name == c; });
                if (name == "features") {
                    inline_features = true;
                } else if (name == "features_file") {
                    binary_features = true;
                } else if (!known) {
                    fail(line_no, "unknown column '" + name + "'");
                }
                col[name] = i;
            }
            for (const char* required : kColumns) {
                if (!col.count(required)) fail(line_no, std::string("missing column '") + required + "'");
            }
            if (inline_features == binary_features) {
                fail(line_no, "need exactly one of 'features' or 'features_file'");
            }
            n_cols = fields.size();
            continue;
        }

        if (fields.size() != n_cols) {
            fail(line_no, "expected " + std::to_string(n_cols) + " fields, found " +
                              std::to_string(fields.size()));
        }
        auto cell = [&](const char* name) -> const std::string& { return fields[col.at(name)]; };

        ClipSample c;
        try {
            c.clip_id = cell("clip_id");
            c.subject_id = cell("subject_id");
            if (c.clip_id.empty()) throw ValidationError("empty clip_id");
            if (c.subject_id.empty()) throw ValidationError("empty subject_id");
            c.view = view_from_string(cell("view"));
            c.modality = modality_from_string(cell("modality"));
            c.label = label_from_string(cell("label"));

            const std::string& cls = cell("anomaly_class");
            c.anomaly_class = (cls == "-") ? "" : cls;
            if ((c.label == Label::anomalous) == c.anomaly_class.empty()) {
                throw ValidationError("anomaly_class must be set exactly for anomalous clips");
            }

            const std::string& seen = cell("seen_in_training");
            if (seen != "0" && seen != "1") {
                throw ValidationError("seen_in_training must be 0 or 1, got '" + seen + "'");
            }
            c.seen_in_training = seen == "1";
            if (c.label == Label::normal && !c.seen_in_training) {
                throw ValidationError("normal clips are seen in training by definition");
            }

            c.frame_start = parse_int(cell("frame_start"));
            c.frame_end = parse_int(cell("frame_end"));
            if (c.frame_start < 0 || c.frame_end < c.frame_start) {
                throw ValidationError("invalid frame span [" + std::to_string(c.frame_start) +
                                      ", " + std::to_string(c.frame_end) + "]");
            }

            if (binary_features) {
                const std::filesystem::path dir =
                    path.has_parent_path() ? path.parent_path() : ".";
                c.features = read_feature_file(dir / cell("features_file"));
            } else {
                for (const std::string& v : split_on(cell("features"), ',')) {
                    c.features.push_back(parse_real(v));
                }
            }
            if (c.features.empty()) throw ValidationError("empty feature vector");
        } catch (const ValidationError& e) {
            fail(line_no, e.what());
        }

        const std::string& where = cell("split");
        if (where == "train") {
            split.train.push_back(std::move(c));
            train_lines.push_back(line_no);
        } else if (where == "test") {
            split.test.push_back(std::move(c));
            test_lines.push_back(line_no);
        } else {
            fail(line_no, "unknown split '" + where + "' (expected train|test)");
        }
    }
    if (!header_seen) throw ValidationError(path.string() + ": missing header line");
    if (split.train.empty() && split.test.empty()) {
        throw ValidationError(path.string() + ": no clips");
    }

    // Cross-record invariants, still with line-accurate diagnostics.
    const size_t dim = !split.train.empty() ? split.train.front().features.size()
                                            : split.test.front().features.size();
    std::set<std::tuple<std::string, View, Modality>> ids;
    std::map<std::string, std::pair<bool, size_t>> class_seen; // class -> (flag, line)
    std::map<std::string, bool> subject_in_train;

    auto check_records = [&](const std::vector<ClipSample>& clips, const std::vector<size_t>& lines,
                             bool is_train) {
        for (size_t i = 0; i < clips.size(); ++i) {
            const ClipSample& c = clips[i];
            const size_t ln = lines[i];
            if (c.features.size() != dim) {
                fail(ln, "feature dim " + std::to_string(c.features.size()) +
                             " differs from manifest dim " + std::to_string(dim));
            }
            if (!ids.insert({c.clip_id, c.view, c.modality}).second) {
                fail(ln, "duplicate record for clip " + c.clip_id + " stream " +
                             to_string(c.view) + ":" + to_string(c.modality));
            }
            if (c.label == Label::anomalous) {
                auto [it, fresh] = class_seen.try_emplace(c.anomaly_class, c.seen_in_training, ln);
                if (!fresh && it->second.first != c.seen_in_training) {
                    fail(ln, "class " + c.anomaly_class +
                                 " flips seen_in_training (first declared on line " +
                                 std::to_string(it->second.second) + ")");
                }
                if (is_train && !c.seen_in_training) {
                    fail(ln, "train split contains unseen class " + c.anomaly_class);
                }
            }
            auto [it, fresh] = subject_in_train.try_emplace(c.subject_id, is_train);
            if (!fresh && it->second != is_train) {
                fail(ln, "subject " + c.subject_id + " appears in both train and test splits");
            }
        }
    };
    check_records(split.train, train_lines, true);
    check_records(split.test, test_lines, false);
    return split;
}

namespace {

Vec random_unit(Rng& rng, size_t dim) {
    for (;;) {
        Vec g(dim);
        for (double& x : g) x = rng.gauss();
        const double n = l2_norm(g);
        if (n > 1e-9) {
            for (double& x : g) x /= n;
            return g;
        }
    }
}

// Unit vector at exactly `theta` radians from mu: orthogonalize a random
// draw against mu, mix by the angle. Near-parallel draws are rejected.
Vec direction_at_angle(const Vec& mu, double theta, Rng& rng) {
    for (;;) {
        Vec g(mu.size());
        for (double& x : g) x = rng.gauss();
        add_scaled(g, -dot(g, mu), mu);
        const double n = l2_norm(g);
        if (n <= 1e-9) continue;
        Vec d(mu.size());
        const double c = std::cos(theta);
        const double s = std::sin(theta);
        for (size_t i = 0; i < d.size(); ++i) d[i] = c * mu[i] + s * g[i] / n;
        return d;
    }
}

std::string zero_pad(size_t value, int width) {
    std::string s = std::to_string(value);
    while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
    return s;
}

void check_synth_config(const SynthConfig& cfg) {
    if (cfg.input_dim < 2) throw ValidationError("synthetic input_dim must be at least 2");
    if (cfg.train_subjects == 0 || cfg.test_subjects == 0) {
        throw ValidationError("need at least one subject per split");
    }
    if (cfg.train_normal_clips == 0 || cfg.test_normal_clips == 0) {
        throw ValidationError("need at least one normal clip per subject");
    }
    if (cfg.seen_classes == 0) throw ValidationError("need at least one seen anomaly class");
    if (cfg.test_clips_per_class == 0) {
        throw ValidationError("test_clips_per_class must be at least 1");
    }
    if (!(cfg.noise_sigma >= 0.0) || !std::isfinite(cfg.noise_sigma)) {
        throw ValidationError("noise_sigma must be a finite non-negative real");
    }
    if (!(cfg.min_separation_deg > 0.0) || cfg.min_separation_deg > 90.0) {
        throw ValidationError("min_separation_deg must lie in (0, 90], got " +
                              std::to_string(cfg.min_separation_deg));
    }
}

} // namespace

DatasetSplit generate_synthetic(const SynthConfig& cfg) {
    check_synth_config(cfg);
    Rng rng(cfg.seed);

    const size_t total_classes = cfg.seen_classes + cfg.unseen_classes;
    const Vec mu_normal = random_unit(rng, cfg.input_dim);
    const double min_rad = cfg.min_separation_deg * std::numbers::pi / 180.0;
    std::vector<Vec> class_dirs;
    std::vector<std::string> class_names;
    class_dirs.reserve(total_classes);
    for (size_t c = 0; c < total_classes; ++c) {
        const double theta = rng.uniform(min_rad, std::numbers::pi / 2.0);
        class_dirs.push_back(direction_at_angle(mu_normal, theta, rng));
        class_names.push_back("act" + zero_pad(c + 1, 2));
    }

    // All four sensor streams of a clip share the class direction and frame
    // span; only the additive noise differs, which is what gives fusion its
    // edge.
    auto emit_clip = [&](std::vector<ClipSample>& out, const std::string& clip_id,
                         const std::string& subject, Label label, size_t class_idx,
                         int64_t frame_start) {
        const Vec& mu = label == Label::normal ? mu_normal : class_dirs[class_idx];
        for (View view : {View::top, View::front}) {
            for (Modality modality : {Modality::depth, Modality::ir}) {
                Vec x = mu;
                if (cfg.noise_sigma > 0.0) {
                    for (double& v : x) v += cfg.noise_sigma * rng.gauss();
                }
                ClipSample c;
                c.clip_id = clip_id;
                c.subject_id = subject;
                c.view = view;
                c.modality = modality;
                c.label = label;
                if (label == Label::anomalous) {
                    c.anomaly_class = class_names[class_idx];
                    c.seen_in_training = class_idx < cfg.seen_classes;
                }
                c.features = l2_normalize(x);
                c.frame_start = frame_start;
                c.frame_end = frame_start + kClipFrames - 1;
                out.push_back(std::move(c));
            }
        }
    };

    DatasetSplit split;
    size_t anomaly_rr = 0; // round-robin over the seen classes
    for (size_t s = 0; s < cfg.train_subjects; ++s) {
        const std::string subject = "s" + zero_pad(s, 2);
        int64_t frame = 0;
        size_t clip_no = 0;
        for (size_t k = 0; k < cfg.train_normal_clips; ++k) {
            emit_clip(split.train, "tr_" + subject + "_c" + zero_pad(clip_no++, 3), subject,
                      Label::normal, 0, frame);
            frame += kClipFrames;
        }
        for (size_t k = 0; k < cfg.train_anomaly_clips; ++k) {
            emit_clip(split.train, "tr_" + subject + "_c" + zero_pad(clip_no++, 3), subject,
                      Label::anomalous, anomaly_rr++ % cfg.seen_classes, frame);
            frame += kClipFrames;
        }
    }

    for (size_t s = 0; s < cfg.test_subjects; ++s) {
        const std::string subject = "s" + zero_pad(cfg.train_subjects + s, 2);

        // One timeline per subject: normal and anomalous clips interleave in
        // a seeded shuffle, then occupy consecutive 32-frame slots.
        struct Slot {
            Label label;
            size_t class_idx;
        };
        std::vector<Slot> slots;
        for (size_t k = 0; k < cfg.test_normal_clips; ++k) slots.push_back({Label::normal, 0});
        for (size_t c = 0; c < total_classes; ++c) {
            for (size_t k = 0; k < cfg.test_clips_per_class; ++k) {
                slots.push_back({Label::anomalous, c});
            }
        }
        for (size_t i = slots.size(); i > 1; --i) {
            std::swap(slots[i - 1], slots[rng.below(i)]);
        }
        for (size_t k = 0; k < slots.size(); ++k) {
            emit_clip(split.test, "te_" + subject + "_c" + zero_pad(k, 3), subject, slots[k].label,
                      slots[k].class_idx, static_cast<int64_t>(k) * kClipFrames);
        }
    }
    return split;
}

DatasetSplit subset(const DatasetSplit& dataset, double lambda_n, double lambda_a, uint64_t seed,
                    size_t folds) {
    for (double lambda : {lambda_n, lambda_a}) {
        if (!(lambda > 0.0) || lambda > 1.0) {
            throw ValidationError("subset fraction must lie in (0, 1], got " +
                                  std::to_string(lambda));
        }
    }
    if (folds == 0) throw ValidationError("subset needs at least one fold");

    std::set<std::string> subject_set;
    for (const ClipSample& c : dataset.train) subject_set.insert(c.subject_id);
    std::vector<std::string> subjects(subject_set.begin(), subject_set.end());
    Rng rng(seed);
    for (size_t i = subjects.size(); i > 1; --i) {
        std::swap(subjects[i - 1], subjects[rng.below(i)]);
    }

    // Contiguous folds of near-equal size over the shuffled subjects; the
    // leading ceil(lambda * folds) folds survive for the respective pool.
    // The epsilon guards against products like 0.2 * 5 landing above 1.
    auto kept_folds = [&](double lambda) {
        return static_cast<size_t>(std::ceil(lambda * static_cast<double>(folds) - 1e-9));
    };
    const size_t keep_n = kept_folds(lambda_n);
    const size_t keep_a = kept_folds(lambda_a);

    std::map<std::string, size_t> fold_of;
    const size_t base = subjects.size() / folds;
    const size_t extra = subjects.size() % folds;
    size_t next = 0;
    for (size_t fold = 0; fold < folds; ++fold) {
        const size_t size = base + (fold < extra ? 1 : 0);
        for (size_t i = 0; i < size; ++i) fold_of[subjects[next++]] = fold;
    }

    DatasetSplit out;
    out.test = dataset.test;
    for (const ClipSample& c : dataset.train) {
        const size_t fold = fold_of.at(c.subject_id);
        const size_t keep = c.label == Label::normal ? keep_n : keep_a;
        if (fold < keep) out.train.push_back(c);
    }
    return out;
}

std::vector<ClipSample> filter_stream(const std::vector<ClipSample>& clips, View view,
                                      Modality modality) {
    std::vector<ClipSample> out;
    for (const ClipSample& c : clips) {
        if (c.view == view && c.modality == modality) out.push_back(c);
    }
    return out;
}

} // namespace anomet
