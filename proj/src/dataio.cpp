#include "dataio.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "errors.hpp"
#include "rng.hpp"
#include "textio.hpp"

namespace turbperf {

namespace {

constexpr double kTwoPi = 6.283185307179586;

bool near_integer(double v) { return std::abs(v - std::round(v)) < 1e-9; }

double stdnormal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

} // namespace

const std::array<std::string, kFeatureCount>& feature_names() {
    static const std::array<std::string, kFeatureCount> names = {
        "month", "day", "hour", "minute", "wind_speed", "air_temperature",
        "air_pressure", "wind_direction", "density"};
    return names;
}

bool MetRecord::valid() const {
    const double fields[] = {wind_speed, air_temperature, air_pressure,
                             wind_direction, density, power};
    for (double f : fields) {
        if (!std::isfinite(f)) return false;
    }
    if (month < 1 || month > 12) return false;
    if (day < 1 || day > 31) return false;
    if (hour < 0 || hour > 23) return false;
    if (minute < 0 || minute > 59) return false;
    if (wind_speed < 0.0) return false;
    if (air_temperature <= 0.0) return false;
    if (air_pressure <= 0.0) return false;
    if (wind_direction < 0.0 || wind_direction >= 360.0) return false;
    if (density <= 0.0) return false;
    if (power < 0.0) return false;
    return true;
}

Eigen::Vector<double, kFeatureCount> MetRecord::raw_features() const {
    Eigen::Vector<double, kFeatureCount> v;
    v << static_cast<double>(month), static_cast<double>(day),
        static_cast<double>(hour), static_cast<double>(minute), wind_speed,
        air_temperature, air_pressure, wind_direction, density;
    return v;
}

// ---------------------------------------------------------------------------
// ingestion

std::vector<MetRecord> ingest_csv(const std::string& path, const CsvSchema& schema,
                                  IngestMode mode, long* skipped_out) {
    const std::string text = read_file(path);
    if (skipped_out) *skipped_out = 0;

    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) fail(ErrKind::EmptyFile, path + " is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    const std::vector<std::string> header = split(line, ',');
    std::array<int, kFeatureCount + 1> col_index;
    col_index.fill(-1);
    for (std::size_t c = 0; c < header.size(); ++c) {
        const std::string name = trim(header[c]);
        for (int f = 0; f < kFeatureCount + 1; ++f) {
            if (name == schema.columns[f]) col_index[f] = static_cast<int>(c);
        }
    }
    for (int f = 0; f < kFeatureCount + 1; ++f) {
        if (col_index[f] < 0) {
            fail(ErrKind::MissingColumn,
                 "column \"" + schema.columns[f] + "\" not found in " + path);
        }
    }

    std::vector<MetRecord> records;
    long line_no = 1;
    long skipped = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;

        const std::vector<std::string> cells = split(line, ',');
        double values[kFeatureCount + 1];
        bool ok = true;
        for (int f = 0; f < kFeatureCount + 1 && ok; ++f) {
            if (static_cast<std::size_t>(col_index[f]) >= cells.size()) {
                ok = false;
                break;
            }
            const auto v = parse_double(cells[col_index[f]]);
            if (!v || !std::isfinite(*v)) {
                ok = false;
                break;
            }
            values[f] = *v;
        }

        MetRecord rec;
        if (ok) {
            ok = near_integer(values[0]) && near_integer(values[1]) &&
                 near_integer(values[2]) && near_integer(values[3]);
        }
        if (ok) {
            rec.month = static_cast<int>(std::lround(values[0]));
            rec.day = static_cast<int>(std::lround(values[1]));
            rec.hour = static_cast<int>(std::lround(values[2]));
            rec.minute = static_cast<int>(std::lround(values[3]));
            rec.wind_speed = values[4];
            rec.air_temperature = values[5];
            rec.air_pressure = values[6];
            rec.wind_direction = std::fmod(values[7], 360.0);
            if (rec.wind_direction < 0.0) rec.wind_direction += 360.0;
            rec.density = values[8];
            rec.power = values[9];
            ok = rec.valid();
        }

        if (!ok) {
            if (mode == IngestMode::Strict) {
                fail(ErrKind::ParseError,
                     "bad row at line " + std::to_string(line_no) + " of " + path);
            }
            ++skipped;
            continue;
        }
        records.push_back(rec);
    }

    if (skipped_out) *skipped_out = skipped;
    if (records.empty()) {
        fail(ErrKind::EmptyFile, path + " contains no usable data rows");
    }
    return records;
}

// ---------------------------------------------------------------------------
// normalization

Eigen::Vector<double, kFeatureCount> NormalizationStats::normalize_features(
    const Eigen::Vector<double, kFeatureCount>& raw) const {
    return (raw - mean).cwiseQuotient(stddev);
}

Eigen::Vector<double, kFeatureCount> NormalizationStats::denormalize_features(
    const Eigen::Vector<double, kFeatureCount>& normalized) const {
    return normalized.cwiseProduct(stddev) + mean;
}

double NormalizationStats::normalize_power(double mw) const {
    return (mw - power_min) / (power_max - power_min);
}

double NormalizationStats::denormalize_power(double normalized) const {
    return power_min + normalized * (power_max - power_min);
}

NormalizedData normalize(const std::vector<MetRecord>& records,
                         const std::vector<bool>& train_mask) {
    const long n = static_cast<long>(records.size());
    if (train_mask.size() != records.size()) {
        fail(ErrKind::LengthMismatch, "train_mask length does not match record count");
    }
    long n_train = 0;
    for (bool m : train_mask) n_train += m ? 1 : 0;
    if (n_train < 2) fail(ErrKind::InsufficientData, "need at least 2 training rows");

    Eigen::MatrixXd raw(n, kFeatureCount);
    Eigen::VectorXd power(n);
    for (long i = 0; i < n; ++i) {
        raw.row(i) = records[i].raw_features().transpose();
        power(i) = records[i].power;
    }

    NormalizationStats stats;
    stats.power_min = std::numeric_limits<double>::infinity();
    stats.power_max = -std::numeric_limits<double>::infinity();
    Eigen::Vector<double, kFeatureCount> sum = Eigen::Vector<double, kFeatureCount>::Zero();
    for (long i = 0; i < n; ++i) {
        if (!train_mask[i]) continue;
        sum += raw.row(i).transpose();
        stats.power_min = std::min(stats.power_min, power(i));
        stats.power_max = std::max(stats.power_max, power(i));
    }
    stats.mean = sum / static_cast<double>(n_train);

    Eigen::Vector<double, kFeatureCount> sq = Eigen::Vector<double, kFeatureCount>::Zero();
    for (long i = 0; i < n; ++i) {
        if (!train_mask[i]) continue;
        const Eigen::Vector<double, kFeatureCount> d = raw.row(i).transpose() - stats.mean;
        sq += d.cwiseProduct(d);
    }
    stats.stddev = (sq / static_cast<double>(n_train)).cwiseSqrt();

    for (int f = 0; f < kFeatureCount; ++f) {
        if (!(stats.stddev(f) > 0.0)) {
            fail(ErrKind::DegenerateColumn,
                 "feature \"" + feature_names()[f] + "\" is constant on the training split");
        }
    }
    if (!(stats.power_max > stats.power_min)) {
        fail(ErrKind::DegenerateColumn, "power is constant on the training split");
    }

    NormalizedData out;
    out.stats = stats;
    out.features.resize(n, kFeatureCount);
    out.power.resize(n);
    for (long i = 0; i < n; ++i) {
        out.features.row(i) =
            stats.normalize_features(raw.row(i).transpose()).transpose();
        out.power(i) = stats.normalize_power(power(i));
    }
    return out;
}

// ---------------------------------------------------------------------------
// splitting

const char* split_tag_name(SplitTag tag) {
    switch (tag) {
        case SplitTag::Train: return "Train";
        case SplitTag::Val: return "Val";
        case SplitTag::Test: return "Test";
    }
    return "?";
}

std::vector<SplitTag> split_dataset(long n, const SplitFractions& fractions,
                                    std::uint64_t seed, SplitMode mode) {
    if (n < 0) fail(ErrKind::BadConfig, "n must be >= 0");
    const double sum = fractions.train + fractions.val + fractions.test;
    if (fractions.train < 0.0 || fractions.val < 0.0 || fractions.test < 0.0 ||
        std::abs(sum - 1.0) > 1e-9) {
        fail(ErrKind::BadFractions,
             "split fractions must be non-negative and sum to 1 (got " +
                 format_double(fractions.train) + ", " + format_double(fractions.val) +
                 ", " + format_double(fractions.test) + ")");
    }

    long n_val = std::lround(static_cast<double>(n) * fractions.val);
    long n_test = std::lround(static_cast<double>(n) * fractions.test);
    long n_train = n - n_val - n_test;
    // Rounding can overdraw by one on tiny n; give it back from test, then val.
    while (n_train < 0) {
        if (n_test > 0) {
            --n_test;
        } else {
            --n_val;
        }
        ++n_train;
    }

    std::vector<long> order(n);
    std::iota(order.begin(), order.end(), 0);
    if (mode == SplitMode::Random) {
        Rng rng(seed);
        rng.shuffle(order);
    }

    std::vector<SplitTag> tags(n, SplitTag::Train);
    for (long i = 0; i < n; ++i) {
        const SplitTag tag = i < n_train               ? SplitTag::Train
                             : i < n_train + n_val     ? SplitTag::Val
                                                       : SplitTag::Test;
        tags[order[i]] = tag;
    }
    return tags;
}

// ---------------------------------------------------------------------------
// synthetic generator

namespace {

double weibull_cdf(double v, double shape, double scale) {
    if (v <= 0.0) return 0.0;
    return -std::expm1(-std::pow(v / scale, shape));
}

double weibull_quantile(double u, double shape, double scale) {
    return scale * std::pow(-std::log1p(-u), 1.0 / shape);
}

constexpr int kMonthDays[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};

void day_of_year_to_date(int doy, int* month, int* day) {
    int m = 0;
    while (doy >= kMonthDays[m]) {
        doy -= kMonthDays[m];
        ++m;
    }
    *month = m + 1;
    *day = doy + 1;
}

} // namespace

std::vector<MetRecord> synth_dataset(const TurbineSpec& spec, long n,
                                     double noise_sigma, double fault_fraction,
                                     std::uint64_t seed, const SynthParams& params) {
    spec.validate();
    if (n < 1) fail(ErrKind::InsufficientData, "synth_dataset needs n >= 1");
    if (!(noise_sigma >= 0.0)) fail(ErrKind::BadConfig, "noise_sigma must be >= 0");
    if (!(fault_fraction >= 0.0 && fault_fraction <= 1.0)) {
        fail(ErrKind::BadConfig, "fault_fraction must be in [0, 1]");
    }
    if (!(params.weibull_shape > 0.0) || !(params.weibull_scale > 0.0)) {
        fail(ErrKind::BadConfig, "Weibull parameters must be > 0");
    }
    if (!(params.autocorr >= 0.0 && params.autocorr < 1.0)) {
        fail(ErrKind::BadConfig, "autocorr must be in [0, 1)");
    }

    const double shape = params.weibull_shape;
    const double scale = params.weibull_scale;
    const double mass_lo = weibull_cdf(spec.cut_in, shape, scale);
    const double mass_hi = 1.0 - weibull_cdf(spec.cut_out, shape, scale);
    const double mass_in = 1.0 - mass_lo - mass_hi;
    // Split the requested fault share between the two tails in proportion to
    // the natural Weibull tail masses.
    const double tail_total = mass_lo + mass_hi;
    const double t_lo = tail_total > 0.0 ? fault_fraction * (mass_lo / tail_total)
                                         : fault_fraction;
    const double t_hi = fault_fraction - t_lo;

    const double phi = params.autocorr;
    const double innovation = std::sqrt(1.0 - phi * phi);

    // Clock stride, in minutes: thin roughly one year of records down to n
    // rows (site archives span a year), floored at the native 10-minute
    // cadence. Whole-hour strides would freeze the minute-of-hour column and
    // break z-scoring, so nudge those off the hour.
    long stride = std::max<long>(10, (525600 + n / 2) / n);
    if (stride % 60 == 0) stride -= 1;

    Rng rng(seed);
    double z_wind = rng.gaussian();
    double temp_noise = 0.0;
    double pressure_noise = 0.0;
    double direction = rng.uniform(0.0, 360.0);

    std::vector<MetRecord> records;
    records.reserve(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) {
        if (i > 0) z_wind = phi * z_wind + innovation * rng.gaussian();
        const double q = stdnormal_cdf(z_wind);

        double v;
        if (q < t_lo) {
            // below cut-in
            const double u = (q / t_lo) * mass_lo;
            v = weibull_quantile(u, shape, scale);
            if (v >= spec.cut_in) v = std::nextafter(spec.cut_in, 0.0);
        } else if (q < 1.0 - t_hi) {
            // normal band [cut_in, cut_out)
            const double u = mass_lo + ((q - t_lo) / (1.0 - fault_fraction)) * mass_in;
            v = weibull_quantile(u, shape, scale);
            v = std::clamp(v, spec.cut_in, spec.cut_out);
        } else {
            // above cut-out
            const double u = (1.0 - mass_hi) + ((q - (1.0 - t_hi)) / t_hi) * mass_hi;
            v = weibull_quantile(std::min(u, 1.0 - 1e-16), shape, scale);
            if (v <= spec.cut_out) {
                v = std::nextafter(spec.cut_out, spec.cut_out * 2.0);
            }
        }

        const double power_noise = rng.gaussian() * noise_sigma * spec.rated_power;
        temp_noise = 0.95 * temp_noise + std::sqrt(1.0 - 0.95 * 0.95) * rng.gaussian(0.0, 3.0);
        pressure_noise =
            0.95 * pressure_noise + std::sqrt(1.0 - 0.95 * 0.95) * rng.gaussian(0.0, 600.0);
        direction = std::fmod(direction + rng.gaussian(0.0, 15.0), 360.0);
        if (direction < 0.0) direction += 360.0;

        MetRecord rec;
        const long t = i * stride; // minutes since Jan 1 00:00
        rec.minute = static_cast<int>(t % 60);
        rec.hour = static_cast<int>((t / 60) % 24);
        const int doy = static_cast<int>((t / 1440) % 365);
        day_of_year_to_date(doy, &rec.month, &rec.day);

        rec.wind_speed = v;
        rec.air_temperature =
            283.0 + 12.0 * std::sin(kTwoPi * (doy - 100) / 365.0) + temp_noise;
        rec.air_pressure = 98000.0 + pressure_noise;
        rec.wind_direction = direction;
        rec.density = rec.air_pressure / (287.05 * rec.air_temperature);
        rec.power = std::max(0.0, ideal_power(v, spec) + power_noise);
        records.push_back(rec);
    }
    return records;
}

// ---------------------------------------------------------------------------
// labeled dataset

std::vector<long> LabeledDataset::rows_with_tag(SplitTag tag) const {
    std::vector<long> rows;
    for (long i = 0; i < n(); ++i) {
        if (split_tag[i] == tag) rows.push_back(i);
    }
    return rows;
}

LabeledDataset build_labeled_dataset(const std::vector<MetRecord>& records,
                                     const TurbineSpec& spec,
                                     const SplitFractions& fractions,
                                     SplitMode mode, std::uint64_t seed) {
    spec.validate();
    const long n = static_cast<long>(records.size());
    if (n < 2) fail(ErrKind::InsufficientData, "need at least 2 records");

    LabeledDataset ds;
    ds.split_tag = split_dataset(n, fractions, seed, mode);
    std::vector<bool> train_mask(records.size());
    for (long i = 0; i < n; ++i) train_mask[i] = ds.split_tag[i] == SplitTag::Train;

    NormalizedData norm = normalize(records, train_mask);
    ds.features = std::move(norm.features);
    ds.power_target = std::move(norm.power);
    ds.stats = norm.stats;

    ds.fault_label.resize(n);
    ds.chrono_index.resize(n);
    for (long i = 0; i < n; ++i) {
        ds.fault_label[i] = is_fault(records[i].wind_speed, spec);
        ds.chrono_index[i] = i;
    }
    return ds;
}

// ---------------------------------------------------------------------------
// canonical dataset file

namespace {

std::string join_doubles(const Eigen::Ref<const Eigen::VectorXd>& v) {
    std::string out;
    for (long i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += format_double(v(i));
    }
    return out;
}

Eigen::VectorXd parse_double_list(const std::string& text, long expect,
                                  const std::string& what) {
    const std::vector<std::string> parts = split(text, ',');
    if (static_cast<long>(parts.size()) != expect) {
        fail(ErrKind::ParseError, what + ": expected " + std::to_string(expect) + " values");
    }
    Eigen::VectorXd v(expect);
    for (long i = 0; i < expect; ++i) {
        const auto d = parse_double(parts[i]);
        if (!d) fail(ErrKind::ParseError, what + ": bad number \"" + parts[i] + "\"");
        v(i) = *d;
    }
    return v;
}

} // namespace

std::string render_dataset(const LabeledDataset& ds) {
    std::string out;
    out += "# turbperf-dataset v1\n";
    out += "# n = " + std::to_string(ds.n()) + "\n";
    out += "# stat.mean = " + join_doubles(ds.stats.mean) + "\n";
    out += "# stat.stddev = " + join_doubles(ds.stats.stddev) + "\n";
    out += "# stat.power_min = " + format_double(ds.stats.power_min) + "\n";
    out += "# stat.power_max = " + format_double(ds.stats.power_max) + "\n";
    for (int f = 0; f < kFeatureCount; ++f) {
        out += feature_names()[f];
        out += ",";
    }
    out += "power_target,fault_label,split_tag\n";
    for (long i = 0; i < ds.n(); ++i) {
        for (int f = 0; f < kFeatureCount; ++f) {
            out += format_double(ds.features(i, f));
            out += ",";
        }
        out += format_double(ds.power_target(i));
        out += ",";
        out += std::to_string(ds.fault_label[i]);
        out += ",";
        out += split_tag_name(ds.split_tag[i]);
        out += "\n";
    }
    return out;
}

LabeledDataset parse_dataset(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || trim(line) != "# turbperf-dataset v1") {
        fail(ErrKind::ParseError, "not a turbperf dataset file");
    }

    LabeledDataset ds;
    long n = -1;
    bool have_stats[4] = {false, false, false, false};
    while (std::getline(in, line)) {
        if (line.rfind("# ", 0) != 0) break;
        const std::string body = line.substr(2);
        const auto eq = body.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = trim(body.substr(0, eq));
        const std::string value = trim(body.substr(eq + 1));
        if (key == "n") {
            const auto v = parse_int(value);
            if (!v || *v < 0) fail(ErrKind::ParseError, "bad n");
            n = static_cast<long>(*v);
        } else if (key == "stat.mean") {
            ds.stats.mean = parse_double_list(value, kFeatureCount, "stat.mean");
            have_stats[0] = true;
        } else if (key == "stat.stddev") {
            ds.stats.stddev = parse_double_list(value, kFeatureCount, "stat.stddev");
            have_stats[1] = true;
        } else if (key == "stat.power_min") {
            const auto v = parse_double(value);
            if (!v) fail(ErrKind::ParseError, "bad stat.power_min");
            ds.stats.power_min = *v;
            have_stats[2] = true;
        } else if (key == "stat.power_max") {
            const auto v = parse_double(value);
            if (!v) fail(ErrKind::ParseError, "bad stat.power_max");
            ds.stats.power_max = *v;
            have_stats[3] = true;
        }
    }
    if (n < 0 || !have_stats[0] || !have_stats[1] || !have_stats[2] || !have_stats[3]) {
        fail(ErrKind::ParseError, "dataset header is missing n or statistics");
    }

    // `line` now holds the column header row.
    const std::vector<std::string> cols = split(trim(line), ',');
    if (static_cast<long>(cols.size()) != kFeatureCount + 3) {
        fail(ErrKind::ParseError, "unexpected dataset column count");
    }

    ds.features.resize(n, kFeatureCount);
    ds.power_target.resize(n);
    ds.fault_label.resize(n);
    ds.split_tag.resize(n);
    ds.chrono_index.resize(n);

    long row = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        if (row >= n) fail(ErrKind::ParseError, "more rows than declared n");
        const std::vector<std::string> cells = split(line, ',');
        if (static_cast<long>(cells.size()) != kFeatureCount + 3) {
            fail(ErrKind::ParseError, "bad cell count in dataset row " + std::to_string(row));
        }
        for (int f = 0; f < kFeatureCount; ++f) {
            const auto v = parse_double(cells[f]);
            if (!v) fail(ErrKind::ParseError, "bad number in dataset row " + std::to_string(row));
            ds.features(row, f) = *v;
        }
        const auto p = parse_double(cells[kFeatureCount]);
        const auto lab = parse_int(cells[kFeatureCount + 1]);
        if (!p || !lab || (*lab != 0 && *lab != 1)) {
            fail(ErrKind::ParseError, "bad target/label in dataset row " + std::to_string(row));
        }
        ds.power_target(row) = *p;
        ds.fault_label[row] = static_cast<int>(*lab);
        const std::string tag = trim(cells[kFeatureCount + 2]);
        if (tag == "Train") {
            ds.split_tag[row] = SplitTag::Train;
        } else if (tag == "Val") {
            ds.split_tag[row] = SplitTag::Val;
        } else if (tag == "Test") {
            ds.split_tag[row] = SplitTag::Test;
        } else {
            fail(ErrKind::ParseError, "bad split tag \"" + tag + "\"");
        }
        ds.chrono_index[row] = row;
        ++row;
    }
    if (row != n) fail(ErrKind::ParseError, "fewer rows than declared n");
    return ds;
}

void save_dataset(const LabeledDataset& ds, const std::string& path) {
    write_file_atomic(path, render_dataset(ds));
}

LabeledDataset load_dataset(const std::string& path) {
    return parse_dataset(read_file(path));
}

std::string render_records_csv(const std::vector<MetRecord>& records) {
    std::string out;
    const CsvSchema schema;
    for (int f = 0; f < kFeatureCount + 1; ++f) {
        if (f) out += ",";
        out += schema.columns[f];
    }
    out += "\n";
    for (const MetRecord& r : records) {
        out += std::to_string(r.month) + "," + std::to_string(r.day) + "," +
               std::to_string(r.hour) + "," + std::to_string(r.minute) + ",";
        out += format_double(r.wind_speed);
        out += ",";
        out += format_double(r.air_temperature);
        out += ",";
        out += format_double(r.air_pressure);
        out += ",";
        out += format_double(r.wind_direction);
        out += ",";
        out += format_double(r.density);
        out += ",";
        out += format_double(r.power);
        out += "\n";
    }
    return out;
}

} // namespace turbperf
