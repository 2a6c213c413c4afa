#include "pcar/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>

#include "pcar/error.hpp"

namespace pcar::stats {

double mean(std::span<const double> x) {
    if (x.empty()) throw Error(ErrorKind::Degenerate, "mean of an empty sample");
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double variance(std::span<const double> x) {
    if (x.size() < 2) throw Error(ErrorKind::Degenerate, "variance needs at least two observations");
    const double m = mean(x);
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return ss / static_cast<double>(x.size() - 1);
}

double student_t_cdf(double t, double df) {
    if (!(df > 0.0)) throw Error(ErrorKind::InvalidParameter, "degrees of freedom must be positive");
    const double tail = 0.5 * boost::math::ibeta(df / 2.0, 0.5, df / (df + t * t));
    return t >= 0.0 ? 1.0 - tail : tail;
}

double student_t_quantile(double p, double df) {
    if (!(df > 0.0)) throw Error(ErrorKind::InvalidParameter, "degrees of freedom must be positive");
    return boost::math::quantile(boost::math::students_t_distribution<double>(df), p);
}

WelchResult welch_t(std::span<const double> x, std::span<const double> y) {
    if (x.size() < 2 || y.size() < 2)
        throw Error(ErrorKind::Degenerate, "welch_t needs at least two observations per sample");
    const double nx = static_cast<double>(x.size());
    const double ny = static_cast<double>(y.size());
    const double vx = variance(x) / nx;
    const double vy = variance(y) / ny;
    if (vx + vy == 0.0) throw Error(ErrorKind::Degenerate, "welch_t: both samples have zero variance");

    WelchResult r;
    r.t = (mean(x) - mean(y)) / std::sqrt(vx + vy);
    r.df = (vx + vy) * (vx + vy) / (vx * vx / (nx - 1.0) + vy * vy / (ny - 1.0));
    // Two-sided tail: I_{df/(df+t^2)}(df/2, 1/2).
    r.p = boost::math::ibeta(r.df / 2.0, 0.5, r.df / (r.df + r.t * r.t));
    return r;
}

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2)
        throw Error(ErrorKind::Degenerate, "pearson needs two samples of equal length >= 2");
    const double mx = mean(x);
    const double my = mean(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) throw Error(ErrorKind::Degenerate, "pearson: zero variance");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double pss_trend(std::span<const double> indices, std::span<const double> scores) {
    if (scores.size() < 2) throw Error(ErrorKind::Degenerate, "pss_trend needs at least two scores");
    if (indices.size() != scores.size()) throw Error(ErrorKind::InvalidParameter, "indices and scores differ in length");
    const double mx = mean(indices);
    const double my = mean(scores);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        sxy += (indices[i] - mx) * (scores[i] - my);
        sxx += (indices[i] - mx) * (indices[i] - mx);
    }
    if (sxx == 0.0) throw Error(ErrorKind::Degenerate, "pss_trend: all measurement indices equal");
    return sxy / sxx;
}

double pss_trend(std::span<const double> scores) {
    std::vector<double> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0.0);
    return pss_trend(idx, scores);
}

double sign_test_upper(int successes, int trials) {
    if (trials < 1 || successes < 0 || successes > trials)
        throw Error(ErrorKind::InvalidParameter, "sign test needs 0 <= successes <= trials, trials >= 1");
    if (successes == 0) return 1.0;
    const boost::math::binomial_distribution<double> dist(trials, 0.5);
    return boost::math::cdf(boost::math::complement(dist, successes - 1));
}

MeanOfMeans mean_of_means(std::span<const Observation> observations, std::span<const CellKey> expected) {
    std::map<CellKey, std::map<std::uint64_t, std::pair<double, std::size_t>>> cells;
    for (const auto& o : observations) {
        auto& acc = cells[{o.group, o.phase, o.week, o.metric}][o.participant];
        acc.first += o.value;
        ++acc.second;
    }

    MeanOfMeans out;
    for (const auto& key : expected) {
        if (!cells.count(key))
            out.warnings.push_back("empty cell omitted: group=" + key.group + " phase=" + std::to_string(key.phase) +
                                   " week=" + std::to_string(key.week) + " metric=" + key.metric);
    }
    for (const auto& [key, participants] : cells) {
        SummaryRow row;
        row.group = key.group;
        row.phase = key.phase;
        row.week = key.week;
        row.metric = key.metric;
        for (const auto& [pid, acc] : participants)
            row.participant_means.push_back(acc.first / static_cast<double>(acc.second));
        row.n_participants = row.participant_means.size();
        row.mean = mean(row.participant_means);
        if (row.n_participants < 2) {
            row.ci_low = row.ci_high = row.mean;
            row.degenerate = true;
        } else {
            const double n = static_cast<double>(row.n_participants);
            const double half =
                student_t_quantile(0.975, n - 1.0) * std::sqrt(variance(row.participant_means) / n);
            row.ci_low = row.mean - half;
            row.ci_high = row.mean + half;
        }
        out.rows.push_back(std::move(row));
    }
    return out;
}

}  // namespace pcar::stats
