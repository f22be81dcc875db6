#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace lml {

// Sampling helpers on top of mt19937_64.  std::uniform_real_distribution is
// implementation-defined, so the transforms here are spelled out explicitly
// to keep outputs byte-reproducible across standard libraries.
class Sampler {
  public:
    explicit Sampler(std::uint64_t seed) : eng_(seed) {}

    /// Uniform in [0,1).
    double uniform() {
        return std::ldexp(static_cast<double>(eng_() >> 11), -53);
    }

    /// Uniform in [lo,hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Log-uniform in [lo,hi), lo > 0.
    double log_uniform(double lo, double hi) {
        return std::exp(uniform(std::log(lo), std::log(hi)));
    }

    /// Standard normal via Box-Muller (deterministic, no rejection).
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        // Guard against log(0).
        u1 = std::max(u1, 0x1p-60);
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925287 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    /// Uniform direction on the unit sphere in R^n.
    std::vector<double> sphere(int n) {
        std::vector<double> v(n);
        double norm2 = 0.0;
        do {
            norm2 = 0.0;
            for (int i = 0; i < n; ++i) {
                v[i] = normal();
                norm2 += v[i] * v[i];
            }
        } while (norm2 < 1e-12);
        const double inv = 1.0 / std::sqrt(norm2);
        for (auto& x : v) x *= inv;
        return v;
    }

    std::uint64_t raw() { return eng_(); }

  private:
    std::mt19937_64 eng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace lml
