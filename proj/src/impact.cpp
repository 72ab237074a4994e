#include "pobs/impact.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include <json.hpp>

#include "pobs/error.hpp"

namespace pobs::impact {

using nlohmann::json;

namespace {

std::size_t draw_index(std::mt19937_64& rng, std::size_t n) {
    return static_cast<std::size_t>((static_cast<unsigned __int128>(rng()) * n) >> 64);
}

MetricSeries series_from_json(const json& j) {
    MetricSeries series;
    series.metric_name = j.value("metric_name", std::string{});
    for (const auto& pair : j.at("samples")) {
        if (pair.is_array() && pair.size() == 2) {
            series.samples.push_back({pair[0].get<std::int64_t>(), pair[1].get<double>()});
        } else if (pair.is_object()) {
            series.samples.push_back({pair.at("timestamp").get<std::int64_t>(), pair.at("value").get<double>()});
        } else {
            throw Error(ErrorCode::InvalidSeries, "sample must be [timestamp, value]");
        }
    }
    return series;
}

json series_to_json(const MetricSeries& series) {
    json samples = json::array();
    for (const auto& s : series.samples) {
        samples.push_back({s.timestamp_ms, s.value});
    }
    return {{"metric_name", series.metric_name}, {"samples", samples}};
}

} // namespace

std::vector<double> MetricSeries::values() const {
    std::vector<double> out;
    out.reserve(samples.size());
    for (const auto& s : samples) {
        out.push_back(s.value);
    }
    return out;
}

std::vector<std::int64_t> MetricSeries::timestamps() const {
    std::vector<std::int64_t> out;
    out.reserve(samples.size());
    for (const auto& s : samples) {
        out.push_back(s.timestamp_ms);
    }
    return out;
}

void validate(const MetricSeries& series) {
    for (std::size_t i = 0; i < series.samples.size(); ++i) {
        if (!std::isfinite(series.samples[i].value)) {
            throw Error(ErrorCode::InvalidSeries, "non-finite value at sample " + std::to_string(i));
        }
        if (i > 0 && series.samples[i].timestamp_ms <= series.samples[i - 1].timestamp_ms) {
            throw Error(ErrorCode::InvalidSeries, "timestamps not strictly increasing at sample " + std::to_string(i));
        }
    }
}

SplitSeries split(const MetricSeries& series, std::int64_t intervention_ts) {
    SplitSeries out;
    out.pre.metric_name = series.metric_name;
    out.post.metric_name = series.metric_name;
    for (const auto& s : series.samples) {
        (s.timestamp_ms < intervention_ts ? out.pre : out.post).samples.push_back(s);
    }
    if (out.pre.samples.empty()) {
        throw Error(ErrorCode::EmptyPre, "no samples before the intervention");
    }
    if (out.post.samples.empty()) {
        throw Error(ErrorCode::EmptyPost, "no samples at or after the intervention");
    }
    return out;
}

double TrendModel::predict(std::int64_t timestamp_ms) const {
    return intercept + slope_per_s * (static_cast<double>(timestamp_ms - origin_ms) / 1000.0);
}

TrendModel fit_trend(const MetricSeries& pre) {
    const std::size_t n = pre.samples.size();
    if (n < 2) {
        throw Error(ErrorCode::FitError, "pre-period needs at least 2 samples");
    }
    TrendModel model;
    model.origin_ms = pre.samples.front().timestamp_ms;
    model.pre_times_s.reserve(n);
    for (const auto& s : pre.samples) {
        model.pre_times_s.push_back(static_cast<double>(s.timestamp_ms - model.origin_ms) / 1000.0);
    }
    const double x_mean = mean(model.pre_times_s);
    const auto y = pre.values();
    const double y_mean = mean(y);
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = model.pre_times_s[i] - x_mean;
        sxx += dx * dx;
        sxy += dx * (y[i] - y_mean);
    }
    if (!(sxx > 0.0)) {
        throw Error(ErrorCode::FitError, "pre-period timestamps have no spread");
    }
    model.slope_per_s = sxy / sxx;
    model.intercept = y_mean - model.slope_per_s * x_mean;

    double ssr = 0.0;
    model.fitted.reserve(n);
    model.residuals.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double fit = model.intercept + model.slope_per_s * model.pre_times_s[i];
        model.fitted.push_back(fit);
        model.residuals.push_back(y[i] - fit);
        ssr += (y[i] - fit) * (y[i] - fit);
    }
    model.residual_sd = n > 2 ? std::sqrt(ssr / static_cast<double>(n - 2)) : 0.0;
    return model;
}

MetricSeries fit_and_predict(const MetricSeries& pre, std::span<const std::int64_t> post_timestamps) {
    const auto model = fit_trend(pre);
    MetricSeries out;
    out.metric_name = pre.metric_name;
    out.samples.reserve(post_timestamps.size());
    for (auto ts : post_timestamps) {
        out.samples.push_back({ts, model.predict(ts)});
    }
    return out;
}

double mean(std::span<const double> values) {
    if (values.empty()) {
        return 0.0;
    }
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double relative_effect(std::span<const double> actual_post, std::span<const double> predicted_post) {
    if (actual_post.size() != predicted_post.size() || actual_post.empty()) {
        throw Error(ErrorCode::InvalidArgument, "actual and predicted series must be non-empty and of equal length");
    }
    const double baseline = mean(predicted_post);
    if (baseline == 0.0) {
        throw Error(ErrorCode::ZeroBaseline, "predicted post-period mean is zero");
    }
    return (mean(actual_post) - baseline) / std::abs(baseline);
}

double p_value(const TrendModel& model, std::span<const std::int64_t> post_timestamps,
               std::span<const double> actual_post, std::size_t n_boot, std::uint64_t seed) {
    if (n_boot < 100) {
        throw Error(ErrorCode::InvalidArgument, "n_boot must be at least 100");
    }
    if (post_timestamps.size() != actual_post.size() || actual_post.empty()) {
        throw Error(ErrorCode::InvalidArgument, "post timestamps and values must be non-empty and of equal length");
    }
    const std::size_t n = model.residuals.size();
    const std::size_t m = actual_post.size();

    double predicted_mean = 0.0;
    double post_x_mean = 0.0;
    for (auto ts : post_timestamps) {
        predicted_mean += model.predict(ts);
        post_x_mean += static_cast<double>(ts - model.origin_ms) / 1000.0;
    }
    predicted_mean /= static_cast<double>(m);
    post_x_mean /= static_cast<double>(m);

    const double x_mean = mean(model.pre_times_s);
    double sxx = 0.0;
    for (double x : model.pre_times_s) {
        sxx += (x - x_mean) * (x - x_mean);
    }
    const double lever = post_x_mean - x_mean;
    // Standard error factor of (post mean - extrapolated mean) per unit residual sd.
    const double se_factor =
        std::sqrt(1.0 / static_cast<double>(m) + 1.0 / static_cast<double>(n) + lever * lever / sxx);

    const double observed_effect = mean(actual_post) - predicted_mean;
    if (!(model.residual_sd > 0.0)) {
        // Perfect fit: any deviation is beyond the noise floor.
        return observed_effect == 0.0 ? 1.0 : 1.0 / static_cast<double>(n_boot + 1);
    }
    const double observed = std::abs(observed_effect) / (model.residual_sd * se_factor);
    const double dof = static_cast<double>(n - 2);

    // Centered residuals, inflated for the two fitted parameters.
    const double residual_mean = mean(model.residuals);
    const double inflate = std::sqrt(static_cast<double>(n) / dof);
    std::vector<double> pool(n);
    for (std::size_t i = 0; i < n; ++i) {
        pool[i] = (model.residuals[i] - residual_mean) * inflate;
    }

    std::mt19937_64 rng(seed);
    std::size_t extreme = 0;
    for (std::size_t b = 0; b < n_boot; ++b) {
        // Refit on a resampled pre-period. The fitted part is an exact line, so
        // the refit differs from the original only by the OLS fit of the noise.
        double noise_sum = 0.0;
        double noise_sq = 0.0;
        double noise_sxy = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double e = pool[draw_index(rng, n)];
            noise_sum += e;
            noise_sq += e * e;
            noise_sxy += (model.pre_times_s[i] - x_mean) * e;
        }
        const double slope_shift = noise_sxy / sxx;
        const double mean_shift = noise_sum / static_cast<double>(n);
        const double ssr = std::max(0.0, noise_sq - static_cast<double>(n) * mean_shift * mean_shift -
                                             slope_shift * slope_shift * sxx);
        const double sd = std::sqrt(ssr / dof);

        double post_noise = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            post_noise += pool[draw_index(rng, n)];
        }
        const double effect = post_noise / static_cast<double>(m) - mean_shift - slope_shift * lever;
        // Studentized replicate; a degenerate replicate counts as extreme.
        if (!(sd > 0.0) || std::abs(effect) / (sd * se_factor) >= observed) {
            ++extreme;
        }
    }
    return static_cast<double>(1 + extreme) / static_cast<double>(n_boot + 1);
}

ImpactResult analyze(const MetricSeries& series, std::int64_t intervention_ts, const ImpactOptions& options) {
    validate(series);
    auto parts = split(series, intervention_ts);
    const auto model = fit_trend(parts.pre);
    const auto post_ts = parts.post.timestamps();
    const auto actual = parts.post.values();

    ImpactResult result;
    result.predicted_post.metric_name = series.metric_name;
    for (auto ts : post_ts) {
        result.predicted_post.samples.push_back({ts, model.predict(ts)});
    }
    const auto predicted = result.predicted_post.values();
    result.relative_effect = relative_effect(actual, predicted);
    result.p_value = p_value(model, post_ts, actual, options.n_boot, options.seed);
    result.alpha = options.alpha;
    result.significant = result.p_value < options.alpha;
    result.pre_sample_count = parts.pre.samples.size();
    result.post_sample_count = parts.post.samples.size();
    result.intervention_ts = intervention_ts;
    result.residual_sd = model.residual_sd;
    return result;
}

ImpactInput parse_impact_input(std::string_view json_text) {
    try {
        auto j = json::parse(json_text);
        ImpactInput input;
        input.series = series_from_json(j);
        input.intervention_ts = j.at("intervention_ts").get<std::int64_t>();
        validate(input.series);
        return input;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidSeries, std::string("malformed metrics document: ") + e.what());
    }
}

std::string to_json(const ImpactInput& input) {
    auto j = series_to_json(input.series);
    j["intervention_ts"] = input.intervention_ts;
    return j.dump(2) + "\n";
}

std::string to_json(const ImpactResult& result) {
    json j = {
        {"p_value", result.p_value},
        {"relative_effect", result.relative_effect},
        {"significant", result.significant},
        {"alpha", result.alpha},
        {"pre_sample_count", result.pre_sample_count},
        {"post_sample_count", result.post_sample_count},
        {"intervention_ts", result.intervention_ts},
        {"residual_sd", result.residual_sd},
        {"predicted_post", series_to_json(result.predicted_post)},
    };
    return j.dump(2) + "\n";
}

ImpactResult parse_impact_result(std::string_view json_text) {
    try {
        auto j = json::parse(json_text);
        ImpactResult r;
        r.p_value = j.at("p_value").get<double>();
        r.relative_effect = j.at("relative_effect").get<double>();
        r.significant = j.at("significant").get<bool>();
        r.alpha = j.value("alpha", 0.05);
        r.pre_sample_count = j.value("pre_sample_count", std::size_t{0});
        r.post_sample_count = j.value("post_sample_count", std::size_t{0});
        r.intervention_ts = j.value("intervention_ts", std::int64_t{0});
        r.residual_sd = j.value("residual_sd", 0.0);
        if (j.contains("predicted_post")) {
            r.predicted_post = series_from_json(j["predicted_post"]);
        }
        return r;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidSeries, std::string("malformed impact result: ") + e.what());
    }
}

std::string render_plot_data(const MetricSeries& series, const ImpactResult& result) {
    std::string out = "timestamp,actual,predicted,period\n";
    auto parts = split(series, result.intervention_ts);
    const auto model = fit_trend(parts.pre);
    char buf[128];
    for (const auto& s : series.samples) {
        const bool post = s.timestamp_ms >= result.intervention_ts;
        std::snprintf(buf, sizeof buf, "%lld,%.6g,%.6g,%s\n", static_cast<long long>(s.timestamp_ms), s.value,
                      model.predict(s.timestamp_ms), post ? "post" : "pre");
        out += buf;
    }
    return out;
}

} // namespace pobs::impact
