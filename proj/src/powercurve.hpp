#pragma once

#include <utility>
#include <vector>

namespace turbperf {

// Cut-in / rated / cut-out geometry of one turbine. Defaults describe a
// generic 3 MW machine and can be overridden from config; the fault labels
// depend directly on cut_in and cut_out.
struct TurbineSpec {
    double cut_in = 3.0;       // m/s
    double rated_speed = 13.0; // m/s
    double cut_out = 25.0;     // m/s
    double rated_power = 3.0;  // MW

    bool valid() const {
        return cut_in > 0.0 && cut_in < rated_speed && rated_speed < cut_out &&
               rated_power > 0.0;
    }
    void validate() const; // throws BadConfig
};

// Region1 below cut-in, Region2 normal operating band, Region3 above cut-out.
enum class Region { Region1 = 1, Region2 = 2, Region3 = 3 };

struct CurveBin {
    double center = 0.0;     // m/s
    double mean_power = 0.0; // MW
    long count = 0;
};

// Method-of-bins empirical curve: bins sorted by center, empty bins omitted.
struct BinnedCurve {
    double bin_width = 0.5;
    std::vector<CurveBin> bins;
};

// Total classification of [0, inf); boundary speeds belong to Region2 so the
// ideal operating envelope is never labelled faulty.
Region classify_region(double wind_speed, const TurbineSpec& spec);

// 1 when the turbine operates in Region 1 or Region 3.
int is_fault(double wind_speed, const TurbineSpec& spec);

// Parametric curve: zero outside [cut_in, cut_out], cubic ramp
// rated * (v^3 - cut_in^3) / (rated_speed^3 - cut_in^3) between cut-in and
// rated speed, flat at rated power up to cut-out.
double ideal_power(double wind_speed, const TurbineSpec& spec);

// Groups (wind_speed, power) samples by floor(v / bin_width) and averages
// power per bin. Throws EmptyInput / BadConfig.
BinnedCurve bin_curve(const std::vector<std::pair<double, double>>& samples,
                      double bin_width);

} // namespace turbperf
