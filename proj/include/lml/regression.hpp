#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "lml/errors.hpp"

namespace lml {

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    double ssr = 0.0;  // sum of squared residuals
    int npoints = 0;
};

/// Ordinary least squares y ~ intercept + slope * x.
inline LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    if (n != y.size() || n < 2) throw std::invalid_argument("linear_fit: need >= 2 matching points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (!(sxx > 0.0)) throw std::invalid_argument("linear_fit: degenerate abscissae");
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.npoints = static_cast<int>(n);
    double ssr = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - (f.intercept + f.slope * x[i]);
        ssr += r * r;
    }
    f.ssr = ssr;
    f.r2 = (syy > 0.0) ? 1.0 - ssr / syy : 1.0;
    return f;
}

/// Fitted asymptotic decay |phi|(s) ~ C s^{-exponent} (times ln s when
/// log_corrected), with the fit window and quality attached.
struct RateFit {
    double exponent = 0.0;
    bool log_corrected = false;
    double r2 = 0.0;
    double intercept = 0.0;  // ln C of the winning model
    double window_lo = 0.0;
    double window_hi = 0.0;
    int npoints = 0;
};

/// Fits ln|phi| = intercept - exponent * t on the window, where t = ln(1+s)
/// (or ln r).  When `try_log_model` is set, the ln-corrected model
/// ln|phi| = intercept - exponent * t + ln t competes on summed squared
/// residuals and log_corrected records the winner.
inline RateFit fit_rate_loglog(std::span<const double> t, std::span<const double> ln_phi,
                               bool try_log_model, double window_lo, double window_hi) {
    if (t.size() < 32)
        throw NumericalError("fit_rate_loglog: window underpopulated (" +
                             std::to_string(t.size()) + " points)");
    const LinearFit plain = linear_fit(t, ln_phi);
    RateFit rf;
    rf.exponent = -plain.slope;
    rf.intercept = plain.intercept;
    rf.r2 = plain.r2;
    rf.log_corrected = false;
    rf.window_lo = window_lo;
    rf.window_hi = window_hi;
    rf.npoints = plain.npoints;
    if (try_log_model) {
        std::vector<double> y2(ln_phi.size());
        for (std::size_t i = 0; i < ln_phi.size(); ++i) y2[i] = ln_phi[i] - std::log(t[i]);
        const LinearFit logm = linear_fit(t, y2);
        if (logm.ssr < plain.ssr) {
            rf.exponent = -logm.slope;
            rf.intercept = logm.intercept;
            rf.r2 = logm.r2;
            rf.log_corrected = true;
        }
    }
    return rf;
}

}  // namespace lml
