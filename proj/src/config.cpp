#include "anomet/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>

#include "anomet/errors.hpp"
#include "anomet/text.hpp"

namespace anomet {

ConfigEntries parse_config_file(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw UsageError("cannot open config file " + path.string());

    ConfigEntries entries;
    std::string line;
    size_t line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string stripped = trim(line);
        if (stripped.empty()) continue;

        const size_t eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw UsageError(path.string() + ":" + std::to_string(line_no) +
                             ": expected 'key = value'");
        }
        const std::string key = trim(stripped.substr(0, eq));
        if (key.empty()) {
            throw UsageError(path.string() + ":" + std::to_string(line_no) + ": empty key");
        }
        entries.emplace_back(key, trim(stripped.substr(eq + 1)));
    }
    return entries;
}

ConfigEntries parse_overrides(const std::vector<std::string>& overrides) {
    ConfigEntries entries;
    for (const std::string& item : overrides) {
        const size_t eq = item.find('=');
        if (eq == std::string::npos || trim(item.substr(0, eq)).empty()) {
            throw UsageError("override '" + item + "' is not of the form key=value");
        }
        entries.emplace_back(trim(item.substr(0, eq)), trim(item.substr(eq + 1)));
    }
    return entries;
}

namespace {

// Maps key names to setters; parse failures surface as usage errors naming
// the key, range checks run afterwards on the complete config.
template <typename Config>
class Schema {
  public:
    using Setter = std::function<void(Config&, const std::string&)>;

    void add(const std::string& key, Setter setter) { setters_[key] = std::move(setter); }

    void apply(Config& cfg, const ConfigEntries& entries) const {
        for (const auto& [key, value] : entries) {
            auto it = setters_.find(key);
            if (it == setters_.end()) {
                std::string known;
                for (const auto& [k, s] : setters_) {
                    if (!known.empty()) known += ", ";
                    known += k;
                }
                throw UsageError("unknown config key '" + key + "' (known keys: " + known + ")");
            }
            try {
                it->second(cfg, value);
            } catch (const ValidationError& e) {
                throw UsageError("config key '" + key + "': " + e.what());
            }
        }
    }

  private:
    std::map<std::string, Setter> setters_;
};

std::vector<size_t> parse_dim_list(const std::string& value) {
    std::vector<size_t> dims;
    if (trim(value).empty()) return dims;
    for (const std::string& item : split_on(value, ',')) {
        dims.push_back(static_cast<size_t>(parse_uint(trim(item))));
    }
    return dims;
}

const Schema<TrainConfig>& train_schema() {
    static const Schema<TrainConfig> schema = [] {
        Schema<TrainConfig> s;
        s.add("lr0", [](TrainConfig& c, const std::string& v) { c.lr0 = parse_real(v); });
        s.add("momentum", [](TrainConfig& c, const std::string& v) { c.momentum = parse_real(v); });
        s.add("epochs", [](TrainConfig& c, const std::string& v) { c.epochs = parse_uint(v); });
        s.add("lr_decay_factor",
              [](TrainConfig& c, const std::string& v) { c.lr_decay_factor = parse_real(v); });
        s.add("lr_decay_period",
              [](TrainConfig& c, const std::string& v) { c.lr_decay_period = parse_uint(v); });
        s.add("batch_normals",
              [](TrainConfig& c, const std::string& v) { c.batch_normals = parse_uint(v); });
        s.add("batch_anomalies",
              [](TrainConfig& c, const std::string& v) { c.batch_anomalies = parse_uint(v); });
        s.add("temperature",
              [](TrainConfig& c, const std::string& v) { c.temperature = parse_real(v); });
        s.add("seed", [](TrainConfig& c, const std::string& v) { c.seed = parse_uint(v); });
        s.add("lambda_n", [](TrainConfig& c, const std::string& v) { c.lambda_n = parse_real(v); });
        s.add("lambda_a", [](TrainConfig& c, const std::string& v) { c.lambda_a = parse_real(v); });
        s.add("folds", [](TrainConfig& c, const std::string& v) { c.folds = parse_uint(v); });
        s.add("feature_noise_sigma",
              [](TrainConfig& c, const std::string& v) { c.feature_noise_sigma = parse_real(v); });
        s.add("view",
              [](TrainConfig& c, const std::string& v) { c.view = view_from_string(v); });
        s.add("modality",
              [](TrainConfig& c, const std::string& v) { c.modality = modality_from_string(v); });
        s.add("input_dim",
              [](TrainConfig& c, const std::string& v) { c.dims.input_dim = parse_uint(v); });
        s.add("hidden_dims",
              [](TrainConfig& c, const std::string& v) { c.dims.hidden_dims = parse_dim_list(v); });
        s.add("embed_dim",
              [](TrainConfig& c, const std::string& v) { c.dims.embed_dim = parse_uint(v); });
        s.add("head_hidden_dim",
              [](TrainConfig& c, const std::string& v) { c.dims.head_hidden_dim = parse_uint(v); });
        s.add("proj_dim",
              [](TrainConfig& c, const std::string& v) { c.dims.proj_dim = parse_uint(v); });
        return s;
    }();
    return schema;
}

const Schema<SynthConfig>& synth_schema() {
    static const Schema<SynthConfig> schema = [] {
        Schema<SynthConfig> s;
        s.add("seed", [](SynthConfig& c, const std::string& v) { c.seed = parse_uint(v); });
        s.add("input_dim",
              [](SynthConfig& c, const std::string& v) { c.input_dim = parse_uint(v); });
        s.add("train_subjects",
              [](SynthConfig& c, const std::string& v) { c.train_subjects = parse_uint(v); });
        s.add("test_subjects",
              [](SynthConfig& c, const std::string& v) { c.test_subjects = parse_uint(v); });
        s.add("train_normal_clips",
              [](SynthConfig& c, const std::string& v) { c.train_normal_clips = parse_uint(v); });
        s.add("train_anomaly_clips",
              [](SynthConfig& c, const std::string& v) { c.train_anomaly_clips = parse_uint(v); });
        s.add("test_normal_clips",
              [](SynthConfig& c, const std::string& v) { c.test_normal_clips = parse_uint(v); });
        s.add("test_clips_per_class",
              [](SynthConfig& c, const std::string& v) { c.test_clips_per_class = parse_uint(v); });
        s.add("seen_classes",
              [](SynthConfig& c, const std::string& v) { c.seen_classes = parse_uint(v); });
        s.add("unseen_classes",
              [](SynthConfig& c, const std::string& v) { c.unseen_classes = parse_uint(v); });
        s.add("noise_sigma",
              [](SynthConfig& c, const std::string& v) { c.noise_sigma = parse_real(v); });
        s.add("min_separation_deg",
              [](SynthConfig& c, const std::string& v) { c.min_separation_deg = parse_real(v); });
        return s;
    }();
    return schema;
}

} // namespace

void validate_train_config(const TrainConfig& cfg) {
    if (!(cfg.lr0 > 0.0)) throw ValidationError("lr0 must be positive");
    if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) {
        throw ValidationError("momentum must lie in [0, 1)");
    }
    if (!(cfg.lr_decay_factor > 0.0 && cfg.lr_decay_factor <= 1.0)) {
        throw ValidationError("lr_decay_factor must lie in (0, 1]");
    }
    if (cfg.lr_decay_period == 0) throw ValidationError("lr_decay_period must be at least 1");
    if (cfg.batch_normals < 2) throw ValidationError("batch_normals must be at least 2");
    if (!(cfg.temperature > 0.0)) throw ValidationError("temperature must be positive");
    for (double lambda : {cfg.lambda_n, cfg.lambda_a}) {
        if (!(lambda > 0.0) || lambda > 1.0) {
            throw ValidationError("lambda fractions must lie in (0, 1]");
        }
    }
    if (cfg.folds == 0) throw ValidationError("folds must be at least 1");
    if (!(cfg.feature_noise_sigma >= 0.0) || !std::isfinite(cfg.feature_noise_sigma)) {
        throw ValidationError("feature_noise_sigma must be a finite non-negative real");
    }
    if (cfg.dims.embed_dim == 0 || cfg.dims.head_hidden_dim == 0 || cfg.dims.proj_dim == 0) {
        throw ValidationError("encoder widths must be positive");
    }
    for (size_t h : cfg.dims.hidden_dims) {
        if (h == 0) throw ValidationError("encoder hidden widths must be positive");
    }
}

TrainConfig make_train_config(const ConfigEntries& entries) {
    TrainConfig cfg;
    train_schema().apply(cfg, entries);
    validate_train_config(cfg);
    return cfg;
}

SynthConfig make_synth_config(const ConfigEntries& entries) {
    SynthConfig cfg;
    synth_schema().apply(cfg, entries);
    // Range checking happens in generate_synthetic, which owns the rules.
    return cfg;
}

} // namespace anomet
