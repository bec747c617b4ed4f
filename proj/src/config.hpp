#pragma once

// Single-source-of-truth run configuration: a flat "key = value" file with a
// fixed key set, validated eagerly before any work starts. Unset keys fall
// back to documented defaults; per-architecture keys (nn.rnn.*, ...) inherit
// from the shared nn.* block when empty.

#include <cstdint>
#include <map>
#include <string>

#include "dataio.hpp"
#include "neuralnet.hpp"
#include "powercurve.hpp"
#include "svr.hpp"

namespace turbperf {

class RunConfig {
public:
    RunConfig(); // all keys at their defaults

    static RunConfig from_file(const std::string& path); // MissingFile / BadConfig
    static RunConfig from_text(const std::string& text);

    // TURBPERF_OUT, when set, replaces out.dir. Callers apply explicit
    // overrides (--set) afterwards, so flags beat the environment.
    void apply_env();

    void set(const std::string& key, const std::string& value); // unknown key -> BadConfig
    const std::string& get(const std::string& key) const;
    long get_long(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool get_bool(const std::string& key) const;

    // Aborts on the first invalid value, including architecture overrides.
    void validate() const;

    // Deterministic serialization of every key, sorted by name.
    std::string render() const;
    // FNV-1a of render() with the out.dir line removed: relocating a run's
    // output directory does not change its identity.
    std::string hash() const;

    TurbineSpec turbine() const;
    CsvSchema schema() const;
    SplitFractions fractions() const;
    SplitMode split_mode() const;
    std::uint64_t split_seed() const;
    SynthParams synth_params() const;
    SvrHyper svr_hyper() const; // epsilon as configured; see svr.auto_epsilon
    TrainConfig nn_train_config(ArchKind kind) const;
    ArchOverrides nn_arch_overrides(ArchKind kind) const;

    std::string out_dir() const { return get("out.dir"); }
    bool measure_time() const { return get_bool("report.measure_time"); }

private:
    std::map<std::string, std::string> values_;
};

// Short key prefix for one architecture, e.g. "nn.rnn.".
std::string arch_key_prefix(ArchKind kind);

} // namespace turbperf
