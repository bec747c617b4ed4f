#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "powercurve.hpp"

namespace turbperf {

inline constexpr int kFeatureCount = 9;

// Frozen feature order; all matrices, stats and files use it.
const std::array<std::string, kFeatureCount>& feature_names();

// One timestamped meteorological sample plus observed power output.
struct MetRecord {
    int month = 1;   // 1..12
    int day = 1;     // 1..31
    int hour = 0;    // 0..23
    int minute = 0;  // 0..59
    double wind_speed = 0.0;      // m/s, >= 0
    double air_temperature = 0.0; // Kelvin, > 0
    double air_pressure = 0.0;    // Pa, > 0
    double wind_direction = 0.0;  // degrees, [0, 360)
    double density = 0.0;         // kg/m^3, > 0
    double power = 0.0;           // MW, >= 0

    // Finite, in-range, direction already normalized.
    bool valid() const;
    Eigen::Vector<double, kFeatureCount> raw_features() const;
};

// Maps canonical feature names to column headers in the source file.
struct CsvSchema {
    // Order: month, day, hour, minute, wind_speed, air_temperature,
    // air_pressure, wind_direction, density, then power.
    std::array<std::string, kFeatureCount + 1> columns = {
        "month", "day", "hour", "minute", "wind_speed", "air_temperature",
        "air_pressure", "wind_direction", "density", "power"};
};

enum class IngestMode { Strict, Lenient };

// Reads a one-header-row CSV in file order. Strict mode throws ParseError with
// the offending row number; lenient mode skips bad rows and reports the count.
// Throws MissingColumn / EmptyFile / IoError.
std::vector<MetRecord> ingest_csv(const std::string& path, const CsvSchema& schema,
                                  IngestMode mode = IngestMode::Strict,
                                  long* skipped_out = nullptr);

// Train-split statistics used for feature z-scoring and power min-max scaling.
struct NormalizationStats {
    Eigen::Vector<double, kFeatureCount> mean = Eigen::Vector<double, kFeatureCount>::Zero();
    Eigen::Vector<double, kFeatureCount> stddev = Eigen::Vector<double, kFeatureCount>::Ones();
    double power_min = 0.0;
    double power_max = 1.0;

    Eigen::Vector<double, kFeatureCount> normalize_features(
        const Eigen::Vector<double, kFeatureCount>& raw) const;
    Eigen::Vector<double, kFeatureCount> denormalize_features(
        const Eigen::Vector<double, kFeatureCount>& normalized) const;
    double normalize_power(double mw) const;
    double denormalize_power(double normalized) const;
};

struct NormalizedData {
    Eigen::MatrixXd features; // N x 9, z-scored with train statistics
    Eigen::VectorXd power;    // N, min-max scaled with train min/max
    NormalizationStats stats;
};

// Z-scores features and min-max scales power using statistics of the rows
// selected by train_mask. Throws InsufficientData / DegenerateColumn.
NormalizedData normalize(const std::vector<MetRecord>& records,
                         const std::vector<bool>& train_mask);

enum class SplitTag : std::uint8_t { Train = 0, Val = 1, Test = 2 };
const char* split_tag_name(SplitTag tag);

enum class SplitMode { Random, Chronological };

struct SplitFractions {
    double train = 0.7;
    double val = 0.15;
    double test = 0.15;
};

// Tag counts are round(n*f) for val and test with the remainder assigned to
// Train. Random mode permutes indices with the seed; Chronological assigns
// contiguous ranges in time order. Throws BadFractions.
std::vector<SplitTag> split_dataset(long n, const SplitFractions& fractions,
                                    std::uint64_t seed, SplitMode mode);

// Wind-speed distribution knobs for the synthetic generator.
struct SynthParams {
    double weibull_shape = 2.0;
    double weibull_scale = 9.0;
    // Lag-1 autocorrelation of the latent Gaussian driving wind speed; 0 gives
    // independent draws. Met series are strongly autocorrelated at 10-minute
    // cadence, and the NAR architecture has nothing to learn without it.
    double autocorr = 0.9;
};

// Deterministic synthetic met series: wind speeds follow a Weibull marginal
// reshaped so the expected share of draws outside [cut_in, cut_out] equals
// fault_fraction exactly; power is ideal_power(v) plus Gaussian noise of
// sigma = noise_sigma * rated_power, clipped at zero. Rows advance on a
// clock starting Jan 1 00:00 whose stride thins roughly one year down to the
// n rows (never finer than the native 10-minute cadence), so every timestamp
// column varies regardless of n.
std::vector<MetRecord> synth_dataset(const TurbineSpec& spec, long n,
                                     double noise_sigma, double fault_fraction,
                                     std::uint64_t seed,
                                     const SynthParams& params = {});

// Normalized feature matrix, targets, labels and split assignment for one run.
struct LabeledDataset {
    Eigen::MatrixXd features;        // N x 9
    Eigen::VectorXd power_target;    // N
    std::vector<int> fault_label;    // N, {0,1}
    std::vector<SplitTag> split_tag; // N
    std::vector<long> chrono_index;  // N; row order is time order
    NormalizationStats stats;

    long n() const { return features.rows(); }
    std::vector<long> rows_with_tag(SplitTag tag) const;
};

// Labels with is_fault, splits, then normalizes on the train rows.
LabeledDataset build_labeled_dataset(const std::vector<MetRecord>& records,
                                     const TurbineSpec& spec,
                                     const SplitFractions& fractions,
                                     SplitMode mode, std::uint64_t seed);

// Canonical dataset file: "# key = value" metadata header carrying the
// normalization statistics, a column-name row, then full-precision CSV rows in
// the frozen column order (9 features, power_target, fault_label, split_tag).
std::string render_dataset(const LabeledDataset& ds);
LabeledDataset parse_dataset(const std::string& text);
void save_dataset(const LabeledDataset& ds, const std::string& path);
LabeledDataset load_dataset(const std::string& path);

// Raw records as an ingestible CSV with the default schema's column names.
std::string render_records_csv(const std::vector<MetRecord>& records);

} // namespace turbperf
