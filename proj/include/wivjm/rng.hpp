#ifndef WIVJM_RNG_HPP
#define WIVJM_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

namespace wivjm {

// Mersenne Twister engine with hand-rolled variate transforms. The standard
// library's distribution objects are implementation-defined, so sampling
// through them would not reproduce bit-identically across toolchains.
class Rng {
  public:
    explicit Rng(std::uint64_t seed = 0) : eng_(seed) {}

    // Deterministic substream derivation (splitmix64 of seed ^ key).
    static Rng fork(std::uint64_t seed, std::uint64_t key) {
        std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (key + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return Rng(z ^ (z >> 31));
    }

    // Uniform on (0,1); never returns 0 or 1.
    double uniform() {
        std::uint64_t u = eng_();
        return (double(u >> 11) + 0.5) * (1.0 / 9007199254740992.0);
    }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform(), u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    double exponential(double rate = 1.0) { return -std::log(uniform()) / rate; }

    int bernoulli(double p) { return uniform() < p ? 1 : 0; }

    double lognormal(double meanlog, double sdlog) { return std::exp(normal(meanlog, sdlog)); }

    // Marsaglia-Tsang; shape < 1 handled by the boost relation.
    double gamma(double shape, double rate) {
        if (shape < 1.0) {
            double u = uniform();
            return gamma(shape + 1.0, rate) * std::pow(u, 1.0 / shape);
        }
        double d = shape - 1.0 / 3.0;
        double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x = normal();
            double v = 1.0 + c * x;
            if (v <= 0.0) continue;
            v = v * v * v;
            double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v / rate;
        }
    }

    std::uint64_t raw() { return eng_(); }

  private:
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace wivjm

#endif
