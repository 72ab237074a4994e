#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pobs/orchestrator.hpp"

namespace pobs::report {

enum class Format { Text, Csv };

struct CampaignSummary {
    std::size_t total_points = 0;
    std::size_t covered = 0;
    std::size_t resilient = 0;
    std::size_t performance_issues = 0;

    friend bool operator==(const CampaignSummary&, const CampaignSummary&) = default;
};

/// Every verdict is a covered point. Throws Error(ConsistencyError) when more
/// points are covered than exist.
CampaignSummary summarize(const std::vector<orchestrator::PointVerdict>& verdicts, std::size_t total_points);

std::string render_summary(const CampaignSummary& summary, Format format);

/// Rounds half away from zero at `decimals` places.
double round_half_up(double value, int decimals);

/// "<0.01" below 0.01, otherwise two decimals.
std::string format_p_value(double p);
/// Signed percent with two decimals: -0.6239 -> "-62.39%".
std::string format_relative_effect(double re);

/// Columns: No., class, method, exception type, correctness rate, p-value, RE.
std::string render_point_table(const std::vector<orchestrator::PointVerdict>& verdicts, Format format);

enum class OverheadCategory { ImageSize, CpuUsage, MemoryUsage, ResponseTime };

std::string_view to_string(OverheadCategory category);

/// Values in the category's unit: MB (10^6 bytes) for size and memory,
/// percent for CPU, seconds for response time.
struct OverheadRow {
    OverheadCategory category = OverheadCategory::ImageSize;
    double original = 0.0;
    double augmented = 0.0;

    double absolute_increase() const { return augmented - original; }
    /// Relative increase in percent; nullopt for the CPU row and a zero original.
    std::optional<double> percent_increase() const;
};

struct OverheadReport {
    std::string application;
    std::vector<OverheadRow> rows;
};

OverheadReport make_overhead_report(const orchestrator::OverheadMeasurement& measurement,
                                    std::string application = {});

/// "1569MB", "3.34%", "0.099s".
std::string format_value(OverheadCategory category, double value);
/// "45MB (2.9%)", "1.57%", "0.01s (10.1%)"; "n/a" when the ratio is undefined.
std::string format_increase(const OverheadRow& row);

std::string render_overhead(const OverheadReport& report, Format format);

/// Machine-readable run summary: counts plus one entry per verdict.
std::string summary_json(const CampaignSummary& summary, const std::vector<orchestrator::PointVerdict>& verdicts);

/// Reads every points/*/verdict.json below `output_dir`, in directory order.
std::vector<orchestrator::PointVerdict> load_verdicts(const std::filesystem::path& output_dir);

} // namespace pobs::report
