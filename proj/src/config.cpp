#include "config.hpp"

#include <cmath>
#include <cstdlib>
#include <sstream>
#include <vector>

#include "errors.hpp"
#include "textio.hpp"

namespace turbperf {

namespace {

const char* arch_short(ArchKind kind) {
    switch (kind) {
    case ArchKind::Feedforward: return "ff";
    case ArchKind::Recurrent: return "rnn";
    case ArchKind::Convolutional: return "cnn";
    case ArchKind::SparseAutoencoder: return "sae";
    case ArchKind::NarTimeSeries: return "nar";
    }
    return "ff";
}

std::vector<std::pair<std::string, std::string>> build_defaults() {
    std::vector<std::pair<std::string, std::string>> d = {
        // data source: a CSV path, or synthetic generation when empty
        {"data.csv", ""},
        {"data.strict", "true"},
        {"synth.n", "29736"},
        {"synth.seed", "42"},
        {"synth.noise_sigma", "0.05"},
        {"synth.fault_fraction", "0.18"},
        {"synth.weibull_shape", "2"},
        {"synth.weibull_scale", "9"},
        {"synth.autocorr", "0.9"},
        // source-column names for ingestion
        {"schema.month", "month"},
        {"schema.day", "day"},
        {"schema.hour", "hour"},
        {"schema.minute", "minute"},
        {"schema.wind_speed", "wind_speed"},
        {"schema.air_temperature", "air_temperature"},
        {"schema.air_pressure", "air_pressure"},
        {"schema.wind_direction", "wind_direction"},
        {"schema.density", "density"},
        {"schema.power", "power"},
        // turbine operating envelope
        {"turbine.cut_in", "3"},
        {"turbine.rated_speed", "13"},
        {"turbine.cut_out", "25"},
        {"turbine.rated_power", "3"},
        // split protocol
        {"split.train", "0.7"},
        {"split.val", "0.15"},
        {"split.test", "0.15"},
        {"split.mode", "random"},
        {"split.seed", "42"},
        // kernel regressor
        {"svr.c", "1"},
        {"svr.epsilon", "0.1"},
        {"svr.auto_epsilon", "true"},
        {"svr.kernel_scale", "3"},
        {"svr.tolerance", "0.001"},
        {"svr.max_passes", "10000"},
        {"svr.gram_cache_limit", "8192"},
        // deterministic subsample cap on SVR training rows (0 = no cap);
        // keeps the dual optimization tractable on large datasets
        {"svr.train_cap", "4000"},
        {"svr.seed", "11"},
        // shared network training block
        {"nn.max_epochs", "500"},
        {"nn.patience", "6"},
        {"nn.learning_rate", "0.01"},
        {"nn.batch_size", "64"},
        {"nn.momentum", "0.9"},
        {"nn.seed", "1"},
        // reporting
        {"report.bin_width", "0.5"},
        // false zeroes wall times and pins the report timestamp, making
        // pipeline artifacts byte-reproducible
        {"report.measure_time", "true"},
        {"cv.k", "5"},
        {"out.dir", "runs/default"},
    };
    // per-architecture overrides, empty = inherit / architecture default
    for (ArchKind kind : kAllArchs) {
        const std::string p = std::string("nn.") + arch_short(kind) + ".";
        for (const char* f :
             {"max_epochs", "patience", "learning_rate", "batch_size", "momentum", "seed",
              "window", "hidden", "hidden2", "filters", "kernel_width", "rho", "beta"}) {
            d.emplace_back(p + f, "");
        }
    }
    return d;
}

const std::map<std::string, std::string>& default_map() {
    static const std::map<std::string, std::string> m = [] {
        std::map<std::string, std::string> out;
        for (auto& [k, v] : build_defaults()) out.emplace(k, v);
        return out;
    }();
    return m;
}

} // namespace

std::string arch_key_prefix(ArchKind kind) {
    return std::string("nn.") + arch_short(kind) + ".";
}

RunConfig::RunConfig() : values_(default_map()) {}

RunConfig RunConfig::from_file(const std::string& path) {
    if (!file_exists(path)) fail(ErrKind::MissingFile, "config file not found: " + path);
    return from_text(read_file(path));
}

RunConfig RunConfig::from_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            fail(ErrKind::BadConfig,
                 "config line " + std::to_string(lineno) + " is not \"key = value\"");
        }
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (cfg.values_.find(key) == cfg.values_.end()) {
            fail(ErrKind::BadConfig,
                 "unknown config key \"" + key + "\" at line " + std::to_string(lineno));
        }
        cfg.values_[key] = value;
    }
    return cfg;
}

void RunConfig::apply_env() {
    const char* dir = std::getenv("TURBPERF_OUT");
    if (dir != nullptr && *dir != '\0') values_["out.dir"] = dir;
}

void RunConfig::set(const std::string& key, const std::string& value) {
    const auto it = values_.find(key);
    if (it == values_.end()) fail(ErrKind::BadConfig, "unknown config key \"" + key + "\"");
    it->second = trim(value);
}

const std::string& RunConfig::get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) fail(ErrKind::BadConfig, "unknown config key \"" + key + "\"");
    return it->second;
}

long RunConfig::get_long(const std::string& key) const {
    const auto v = parse_int(get(key));
    if (!v) fail(ErrKind::BadConfig, "config key \"" + key + "\" is not an integer");
    return static_cast<long>(*v);
}

double RunConfig::get_double(const std::string& key) const {
    const auto v = parse_double(get(key));
    if (!v) fail(ErrKind::BadConfig, "config key \"" + key + "\" is not a number");
    return *v;
}

bool RunConfig::get_bool(const std::string& key) const {
    const std::string v = lower(get(key));
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    fail(ErrKind::BadConfig, "config key \"" + key + "\" is not a boolean");
}

std::string RunConfig::render() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
    return out;
}

std::string RunConfig::hash() const {
    std::string basis;
    for (const auto& [k, v] : values_) {
        if (k == "out.dir") continue;
        basis += k + " = " + v + "\n";
    }
    return hex64(fnv1a(basis));
}

TurbineSpec RunConfig::turbine() const {
    TurbineSpec spec;
    spec.cut_in = get_double("turbine.cut_in");
    spec.rated_speed = get_double("turbine.rated_speed");
    spec.cut_out = get_double("turbine.cut_out");
    spec.rated_power = get_double("turbine.rated_power");
    return spec;
}

CsvSchema RunConfig::schema() const {
    CsvSchema s;
    const char* keys[] = {"schema.month",         "schema.day",
                          "schema.hour",          "schema.minute",
                          "schema.wind_speed",    "schema.air_temperature",
                          "schema.air_pressure",  "schema.wind_direction",
                          "schema.density",       "schema.power"};
    for (int i = 0; i <= kFeatureCount; ++i) s.columns[i] = get(keys[i]);
    return s;
}

SplitFractions RunConfig::fractions() const {
    SplitFractions f;
    f.train = get_double("split.train");
    f.val = get_double("split.val");
    f.test = get_double("split.test");
    return f;
}

SplitMode RunConfig::split_mode() const {
    const std::string mode = lower(get("split.mode"));
    if (mode == "random") return SplitMode::Random;
    if (mode == "chronological") return SplitMode::Chronological;
    fail(ErrKind::BadConfig, "split.mode must be random or chronological");
}

std::uint64_t RunConfig::split_seed() const {
    return static_cast<std::uint64_t>(get_long("split.seed"));
}

SynthParams RunConfig::synth_params() const {
    SynthParams p;
    p.weibull_shape = get_double("synth.weibull_shape");
    p.weibull_scale = get_double("synth.weibull_scale");
    p.autocorr = get_double("synth.autocorr");
    return p;
}

SvrHyper RunConfig::svr_hyper() const {
    SvrHyper h;
    h.box_c = get_double("svr.c");
    h.epsilon = get_double("svr.epsilon");
    h.kernel_scale = get_double("svr.kernel_scale");
    h.tolerance = get_double("svr.tolerance");
    h.max_passes = get_long("svr.max_passes");
    h.gram_cache_limit = get_long("svr.gram_cache_limit");
    return h;
}

namespace {

long inherit_long(const RunConfig& cfg, const std::string& arch_key,
                  const std::string& base_key) {
    const std::string& v = cfg.get(arch_key);
    return v.empty() ? cfg.get_long(base_key) : cfg.get_long(arch_key);
}

double inherit_double(const RunConfig& cfg, const std::string& arch_key,
                      const std::string& base_key) {
    const std::string& v = cfg.get(arch_key);
    return v.empty() ? cfg.get_double(base_key) : cfg.get_double(arch_key);
}

long opt_long(const RunConfig& cfg, const std::string& key, long fallback) {
    const std::string& v = cfg.get(key);
    return v.empty() ? fallback : cfg.get_long(key);
}

double opt_double(const RunConfig& cfg, const std::string& key, double fallback) {
    const std::string& v = cfg.get(key);
    return v.empty() ? fallback : cfg.get_double(key);
}

} // namespace

TrainConfig RunConfig::nn_train_config(ArchKind kind) const {
    const std::string p = arch_key_prefix(kind);
    TrainConfig cfg;
    cfg.max_epochs = inherit_long(*this, p + "max_epochs", "nn.max_epochs");
    cfg.patience = inherit_long(*this, p + "patience", "nn.patience");
    cfg.learning_rate = inherit_double(*this, p + "learning_rate", "nn.learning_rate");
    cfg.batch_size = inherit_long(*this, p + "batch_size", "nn.batch_size");
    cfg.momentum = inherit_double(*this, p + "momentum", "nn.momentum");
    cfg.seed = static_cast<std::uint64_t>(inherit_long(*this, p + "seed", "nn.seed"));
    return cfg;
}

ArchOverrides RunConfig::nn_arch_overrides(ArchKind kind) const {
    const std::string p = arch_key_prefix(kind);
    ArchOverrides ov;
    ov.seed = nn_train_config(kind).seed;
    ov.window = opt_long(*this, p + "window", 0);
    ov.hidden = opt_long(*this, p + "hidden", 0);
    ov.hidden2 = opt_long(*this, p + "hidden2", 0);
    ov.filters = opt_long(*this, p + "filters", 0);
    ov.kernel_width = opt_long(*this, p + "kernel_width", 0);
    ov.rho = opt_double(*this, p + "rho", 0.0);
    ov.beta = opt_double(*this, p + "beta", -1.0);
    return ov;
}

void RunConfig::validate() const {
    turbine().validate();
    svr_hyper().validate();
    if (get_long("svr.train_cap") < 0) fail(ErrKind::BadConfig, "svr.train_cap must be >= 0");
    get_long("svr.seed");
    get_bool("svr.auto_epsilon");
    get_bool("data.strict");

    const SplitFractions f = fractions();
    if (f.train < 0.0 || f.val < 0.0 || f.test < 0.0 ||
        std::abs(f.train + f.val + f.test - 1.0) > 1e-9) {
        fail(ErrKind::BadFractions, "split fractions must be nonnegative and sum to 1");
    }
    split_mode();
    split_seed();

    if (get("data.csv").empty()) {
        if (get_long("synth.n") < 1) fail(ErrKind::BadConfig, "synth.n must be >= 1");
        if (get_double("synth.noise_sigma") < 0.0) {
            fail(ErrKind::BadConfig, "synth.noise_sigma must be >= 0");
        }
        const double ff = get_double("synth.fault_fraction");
        if (ff < 0.0 || ff >= 1.0) {
            fail(ErrKind::BadConfig, "synth.fault_fraction must lie in [0,1)");
        }
        const SynthParams p = synth_params();
        if (p.weibull_shape <= 0.0 || p.weibull_scale <= 0.0) {
            fail(ErrKind::BadConfig, "synth Weibull parameters must be > 0");
        }
        if (p.autocorr < 0.0 || p.autocorr >= 1.0) {
            fail(ErrKind::BadConfig, "synth.autocorr must lie in [0,1)");
        }
        get_long("synth.seed");
    }

    for (ArchKind kind : kAllArchs) {
        nn_train_config(kind).validate();
        // dry-run the builder so bad topology overrides abort up front
        build_arch(kind, kFeatureCount, nn_arch_overrides(kind));
    }

    if (get_double("report.bin_width") <= 0.0) {
        fail(ErrKind::BadConfig, "report.bin_width must be > 0");
    }
    get_bool("report.measure_time");
    if (get_long("cv.k") < 2) fail(ErrKind::BadConfig, "cv.k must be >= 2");
    if (get("out.dir").empty()) fail(ErrKind::BadConfig, "out.dir must not be empty");
}

} // namespace turbperf
