#include "powercurve.hpp"

#include <cmath>
#include <map>

#include "errors.hpp"
#include "textio.hpp"

namespace turbperf {

void TurbineSpec::validate() const {
    if (!valid()) {
        fail(ErrKind::BadConfig,
             "turbine spec requires 0 < cut_in < rated_speed < cut_out and rated_power > 0 "
             "(got cut_in=" + format_double(cut_in) + ", rated_speed=" + format_double(rated_speed) +
             ", cut_out=" + format_double(cut_out) + ", rated_power=" + format_double(rated_power) + ")");
    }
}

Region classify_region(double wind_speed, const TurbineSpec& spec) {
    if (wind_speed < spec.cut_in) return Region::Region1;
    if (wind_speed > spec.cut_out) return Region::Region3;
    return Region::Region2;
}

int is_fault(double wind_speed, const TurbineSpec& spec) {
    return classify_region(wind_speed, spec) == Region::Region2 ? 0 : 1;
}

double ideal_power(double wind_speed, const TurbineSpec& spec) {
    if (wind_speed < spec.cut_in || wind_speed > spec.cut_out) return 0.0;
    if (wind_speed >= spec.rated_speed) return spec.rated_power;
    const double v3 = wind_speed * wind_speed * wind_speed;
    const double ci3 = spec.cut_in * spec.cut_in * spec.cut_in;
    const double rs3 = spec.rated_speed * spec.rated_speed * spec.rated_speed;
    return spec.rated_power * (v3 - ci3) / (rs3 - ci3);
}

BinnedCurve bin_curve(const std::vector<std::pair<double, double>>& samples,
                      double bin_width) {
    if (samples.empty()) fail(ErrKind::EmptyInput, "bin_curve needs at least one sample");
    if (!(bin_width > 0.0)) fail(ErrKind::BadConfig, "bin_width must be > 0");

    struct Acc {
        double sum = 0.0;
        long count = 0;
    };
    std::map<long long, Acc> acc;
    for (const auto& [v, p] : samples) {
        const long long idx = static_cast<long long>(std::floor(v / bin_width));
        auto& a = acc[idx];
        a.sum += p;
        a.count += 1;
    }

    BinnedCurve curve;
    curve.bin_width = bin_width;
    curve.bins.reserve(acc.size());
    for (const auto& [idx, a] : acc) {
        curve.bins.push_back({(static_cast<double>(idx) + 0.5) * bin_width,
                              a.sum / static_cast<double>(a.count), a.count});
    }
    return curve;
}

} // namespace turbperf
