#include "ranknet/metrics.hpp"

#include <cmath>
#include <string>

#include "ranknet/errors.hpp"

namespace ranknet {

namespace {

void check_lengths(std::span<const double> a, std::span<const double> b, const char* what) {
    if (a.size() != b.size())
        throw InputError(std::string(what) + ": length mismatch (" + std::to_string(a.size()) +
                         " vs " + std::to_string(b.size()) + ")");
    if (a.size() < 2)
        throw InputError(std::string(what) + ": need at least 2 paired values, got " +
                         std::to_string(a.size()));
}

} // namespace

MetricValue pearson(std::span<const double> a, std::span<const double> b) {
    check_lengths(a, b, "pearson");
    const std::size_t n = a.size();
    double mean_a = 0.0, mean_b = 0.0, m2a = 0.0, m2b = 0.0, cab = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double cnt = static_cast<double>(k + 1);
        const double da = a[k] - mean_a;
        const double db = b[k] - mean_b;
        mean_a += da / cnt;
        mean_b += db / cnt;
        // co-moment update uses the pre-update delta of a and post-update of b
        m2a += da * (a[k] - mean_a);
        m2b += db * (b[k] - mean_b);
        cab += da * (b[k] - mean_b);
    }
    if (m2a <= 0.0 || m2b <= 0.0) return {0.0, true};
    return {cab / std::sqrt(m2a * m2b), false};
}

MetricValue kendall_tau(std::span<const double> a, std::span<const double> b) {
    check_lengths(a, b, "kendall_tau");
    const std::size_t n = a.size();
    long long concordant = 0, discordant = 0, ties_a = 0, ties_b = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double da = a[i] - a[j];
            const double db = b[i] - b[j];
            if (da == 0.0 && db == 0.0) {
                ++ties_a;
                ++ties_b;
            } else if (da == 0.0) {
                ++ties_a;
            } else if (db == 0.0) {
                ++ties_b;
            } else if (da * db > 0.0) {
                ++concordant;
            } else {
                ++discordant;
            }
        }
    }
    const long long n0 = static_cast<long long>(n) * static_cast<long long>(n - 1) / 2;
    if (ties_a == n0 || ties_b == n0) return {0.0, true}; // a fully tied vector has no ordering
    const double denom =
        std::sqrt(static_cast<double>(n0 - ties_a) * static_cast<double>(n0 - ties_b));
    return {static_cast<double>(concordant - discordant) / denom, false};
}

// --- Student t machinery -----------------------------------------------------

namespace {

// Continued fraction for I_x(a,b) (modified Lentz).
double beta_continued_fraction(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 1e-15;
    constexpr double kTiny = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) return h;
    }
    throw NumericError("incomplete beta continued fraction failed to converge");
}

} // namespace

double regularized_incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) throw InputError("incomplete beta needs a, b > 0");
    if (x < 0.0 || x > 1.0) throw InputError("incomplete beta needs x in [0,1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double ln_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
    return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, int dof) {
    if (dof < 1) throw InputError("t distribution needs dof >= 1");
    const double nu = static_cast<double>(dof);
    const double x = nu / (nu + t * t);
    return regularized_incomplete_beta(nu / 2.0, 0.5, x);
}

TTestResult paired_ttest(std::span<const double> a, std::span<const double> b) {
    check_lengths(a, b, "paired_ttest");
    const std::size_t n = a.size();
    double mean = 0.0;
    for (std::size_t k = 0; k < n; ++k) mean += a[k] - b[k];
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double d = (a[k] - b[k]) - mean;
        ss += d * d;
    }
    TTestResult r;
    r.degrees_of_freedom = static_cast<int>(n) - 1;
    if (ss == 0.0) {
        // all differences identical; the statistic is undefined
        r.degenerate = true;
        return r;
    }
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    r.t_statistic = mean / (sd / std::sqrt(static_cast<double>(n)));
    r.p_value = student_t_two_sided_p(r.t_statistic, r.degrees_of_freedom);
    r.significant_at_005 = r.p_value < 0.05;
    return r;
}

} // namespace ranknet
