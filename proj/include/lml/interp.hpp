#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "lml/errors.hpp"

namespace lml {

/// Monotone piecewise-cubic Hermite interpolant (Fritsch-Carlson slopes).
/// Monotone data yields a monotone interpolant; evaluation clamps to the end
/// values outside the abscissa range.
class PchipInterpolant {
  public:
    PchipInterpolant() = default;

    PchipInterpolant(std::vector<double> x, std::vector<double> y)
        : x_(std::move(x)), y_(std::move(y)) {
        const std::size_t n = x_.size();
        if (n < 2 || y_.size() != n)
            throw std::invalid_argument("PchipInterpolant: need matching arrays, length >= 2");
        for (std::size_t i = 1; i < n; ++i)
            if (!(x_[i] > x_[i - 1]))
                throw std::invalid_argument("PchipInterpolant: abscissae must increase");
        m_.resize(n);
        std::vector<double> d(n - 1), h(n - 1);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            h[i] = x_[i + 1] - x_[i];
            d[i] = (y_[i + 1] - y_[i]) / h[i];
        }
        if (n == 2) {
            m_[0] = m_[1] = d[0];
        } else {
            for (std::size_t i = 1; i + 1 < n; ++i) {
                if (d[i - 1] * d[i] <= 0.0) {
                    m_[i] = 0.0;
                } else {
                    const double w1 = 2.0 * h[i] + h[i - 1];
                    const double w2 = h[i] + 2.0 * h[i - 1];
                    m_[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
                }
            }
            m_[0] = endpoint_slope(h[0], h[1], d[0], d[1]);
            m_[n - 1] = endpoint_slope(h[n - 2], h[n - 3], d[n - 2], d[n - 3]);
        }
    }

    double operator()(double xq) const {
        if (xq <= x_.front()) return y_.front();
        if (xq >= x_.back()) return y_.back();
        const auto it = std::upper_bound(x_.begin(), x_.end(), xq);
        const std::size_t i = static_cast<std::size_t>(it - x_.begin()) - 1;
        const double h = x_[i + 1] - x_[i];
        const double u = (xq - x_[i]) / h;
        const double u2 = u * u, u3 = u2 * u;
        const double h00 = 2 * u3 - 3 * u2 + 1;
        const double h10 = u3 - 2 * u2 + u;
        const double h01 = -2 * u3 + 3 * u2;
        const double h11 = u3 - u2;
        return h00 * y_[i] + h * h10 * m_[i] + h01 * y_[i + 1] + h * h11 * m_[i + 1];
    }

    bool empty() const { return x_.empty(); }
    double x_front() const { return x_.front(); }
    double x_back() const { return x_.back(); }

  private:
    static double endpoint_slope(double h0, double h1, double d0, double d1) {
        double m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if (m * d0 <= 0.0)
            m = 0.0;
        else if (d0 * d1 < 0.0 && std::abs(m) > 3.0 * std::abs(d0))
            m = 3.0 * d0;
        return m;
    }

    std::vector<double> x_, y_, m_;
};

}  // namespace lml
