#pragma once

#include <span>

namespace ranknet {

// Correlation value plus a degeneracy marker (constant input, all ties).
// Degenerate results carry value 0 rather than NaN.
struct MetricValue {
    double value = 0.0;
    bool degenerate = false;
};

// Sample Pearson correlation, one-pass co-moment form.
MetricValue pearson(std::span<const double> a, std::span<const double> b);

// Kendall's tau-b (tie-corrected), O(n^2) pair enumeration.
MetricValue kendall_tau(std::span<const double> a, std::span<const double> b);

struct MetricPair {
    double pearson_r = 0.0;
    double kendall_tau = 0.0;
    int n = 0;
    bool pearson_degenerate = false;
    bool tau_degenerate = false;
};

struct TTestResult {
    double t_statistic = 0.0;
    int degrees_of_freedom = 0;
    double p_value = 1.0;
    bool significant_at_005 = false;
    bool degenerate = false; // zero-variance differences
};

// Two-sided paired t-test on a-b, paired by position.
TTestResult paired_ttest(std::span<const double> a, std::span<const double> b);

// Regularized incomplete beta I_x(a,b) via Lentz continued fraction;
// absolute accuracy around 1e-14 for moderate a,b.
double regularized_incomplete_beta(double a, double b, double x);

// Two-sided p-value of Student's t with dof degrees of freedom.
double student_t_two_sided_p(double t, int dof);

} // namespace ranknet
