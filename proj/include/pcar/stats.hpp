#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace pcar::stats {

double mean(std::span<const double> x);
/// Unbiased sample variance (n - 1 denominator).
double variance(std::span<const double> x);

/// Student-t CDF through the regularized incomplete beta function.
double student_t_cdf(double t, double df);
double student_t_quantile(double p, double df);

struct WelchResult {
    double t = 0.0;
    double df = 0.0;
    double p = 1.0;  // two-sided
};

/// Welch two-sample t-test. Needs >= 2 observations per sample and nonzero
/// variance in at least one of them.
WelchResult welch_t(std::span<const double> x, std::span<const double> y);

/// Product-moment correlation; equal lengths >= 2, both variances nonzero.
double pearson(std::span<const double> x, std::span<const double> y);

/// Least-squares slope of scores measured at indices 0, 1, 2, ...
double pss_trend(std::span<const double> scores);
double pss_trend(std::span<const double> indices, std::span<const double> scores);

/// Exact binomial sign test: P(X >= successes) for X ~ Bin(trials, 1/2).
double sign_test_upper(int successes, int trials);

struct Observation {
    std::string group;
    int phase = 1;
    int week = 1;
    std::string metric;
    std::uint64_t participant = 0;
    double value = 0.0;
};

struct SummaryRow {
    std::string group;
    int phase = 1;
    int week = 1;
    std::string metric;
    double mean = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::size_t n_participants = 0;
    /// True when the interval collapses to [mean, mean] (a single participant).
    bool degenerate = false;
    /// Participant means behind the cell, in participant order.
    std::vector<double> participant_means;
};

struct CellKey {
    std::string group;
    int phase = 1;
    int week = 1;
    std::string metric;

    friend auto operator<=>(const CellKey&, const CellKey&) = default;
};

struct MeanOfMeans {
    std::vector<SummaryRow> rows;  // sorted by (group, phase, week, metric)
    std::vector<std::string> warnings;
};

/// Per-participant means first, then the mean across participants with a 95%
/// t-interval over participant means. Cells listed in `expected` that have no
/// observations are omitted and reported as warnings.
MeanOfMeans mean_of_means(std::span<const Observation> observations, std::span<const CellKey> expected = {});

}  // namespace pcar::stats
