#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pobs::impact {

struct Sample {
    std::int64_t timestamp_ms = 0;
    double value = 0.0;

    friend bool operator==(const Sample&, const Sample&) = default;
};

struct MetricSeries {
    std::string metric_name;
    std::vector<Sample> samples;

    std::vector<double> values() const;
    std::vector<std::int64_t> timestamps() const;

    friend bool operator==(const MetricSeries&, const MetricSeries&) = default;
};

/// Throws Error(InvalidSeries) unless timestamps are strictly increasing and values finite.
void validate(const MetricSeries& series);

struct SplitSeries {
    MetricSeries pre;
    MetricSeries post;
};

/// pre: t < intervention_ts, post: the rest. Throws EmptyPre / EmptyPost.
SplitSeries split(const MetricSeries& series, std::int64_t intervention_ts);

/// Least-squares line through the pre-period, time measured in seconds from
/// the first pre sample.
struct TrendModel {
    std::int64_t origin_ms = 0;
    double intercept = 0.0;
    double slope_per_s = 0.0;
    std::vector<double> pre_times_s;
    std::vector<double> fitted;
    std::vector<double> residuals;
    /// sqrt(SSR / (n - 2)); 0 when n == 2.
    double residual_sd = 0.0;

    double predict(std::int64_t timestamp_ms) const;
};

/// Throws FitError for fewer than 2 samples or zero time spread.
TrendModel fit_trend(const MetricSeries& pre);

/// Counterfactual series at `post_timestamps` extrapolated from the pre-period trend.
MetricSeries fit_and_predict(const MetricSeries& pre, std::span<const std::int64_t> post_timestamps);

double mean(std::span<const double> values);

/// (mean(actual) - mean(predicted)) / |mean(predicted)|. Throws ZeroBaseline.
double relative_effect(std::span<const double> actual_post, std::span<const double> predicted_post);

/// Two-sided residual-bootstrap p-value of the mean post-period effect.
///
/// Each replicate rebuilds a pre-period from the fitted line plus resampled
/// (centered, degrees-of-freedom corrected) residuals, refits the trend, and
/// compares a resampled post-period against the refitted extrapolation, so the
/// uncertainty of the extrapolated trend enters the null distribution. Effects
/// are studentized by their replicate's own residual sd (bootstrap-t).
/// p = (1 + #{|replicate t| >= |observed t|}) / (n_boot + 1).
/// A pre-period fitted without residual error yields 1 for a zero effect and
/// the minimum 1 / (n_boot + 1) otherwise.
double p_value(const TrendModel& model, std::span<const std::int64_t> post_timestamps,
               std::span<const double> actual_post, std::size_t n_boot, std::uint64_t seed);

struct ImpactOptions {
    std::size_t n_boot = 1000;
    std::uint64_t seed = 42;
    double alpha = 0.05;
};

struct ImpactResult {
    double p_value = 1.0;
    double relative_effect = 0.0;
    MetricSeries predicted_post;
    bool significant = false;
    std::size_t pre_sample_count = 0;
    std::size_t post_sample_count = 0;
    std::int64_t intervention_ts = 0;
    double alpha = 0.05;
    double residual_sd = 0.0;

    friend bool operator==(const ImpactResult&, const ImpactResult&) = default;
};

ImpactResult analyze(const MetricSeries& series, std::int64_t intervention_ts, const ImpactOptions& options = {});

/// The exported monitoring document: metric name, timestamp-value pairs and
/// the activation timestamp.
struct ImpactInput {
    MetricSeries series;
    std::int64_t intervention_ts = 0;
};

ImpactInput parse_impact_input(std::string_view json_text);
std::string to_json(const ImpactInput& input);
std::string to_json(const ImpactResult& result);
ImpactResult parse_impact_result(std::string_view json_text);

/// CSV `timestamp,actual,predicted,period` covering both periods; `period`
/// switches from pre to post at the intervention marker.
std::string render_plot_data(const MetricSeries& series, const ImpactResult& result);

} // namespace pobs::impact
