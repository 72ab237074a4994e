#include "pobs/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "pobs/error.hpp"

namespace pobs::report {

using nlohmann::json;
using orchestrator::PointVerdict;

namespace {

std::string fixed(double value, int decimals) {
    value = round_half_up(value, decimals);
    if (value == 0.0) {
        value = 0.0; // no "-0.00"
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
    return buf;
}

std::string csv_field(const std::string& field) {
    if (field.find_first_of(",\"\n\r") == std::string::npos) {
        return field;
    }
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    return out + "\"";
}

std::string render_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows,
                         Format format) {
    std::string out;
    if (format == Format::Csv) {
        auto line = [&](const std::vector<std::string>& cells) {
            for (std::size_t i = 0; i < cells.size(); ++i) {
                out += (i ? "," : "") + csv_field(cells[i]);
            }
            out += "\n";
        };
        line(header);
        for (const auto& r : rows) {
            line(r);
        }
        return out;
    }
    std::vector<std::size_t> width(header.size());
    for (std::size_t i = 0; i < header.size(); ++i) {
        width[i] = header[i].size();
        for (const auto& r : rows) {
            width[i] = std::max(width[i], r[i].size());
        }
    }
    auto line = [&](const std::vector<std::string>& cells) {
        std::string l;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) {
                l += "  ";
            }
            l += cells[i];
            if (i + 1 < cells.size()) {
                l.append(width[i] - cells[i].size(), ' ');
            }
        }
        out += l + "\n";
    };
    line(header);
    std::vector<std::string> rule;
    for (auto w : width) {
        rule.emplace_back(w, '-');
    }
    line(rule);
    for (const auto& r : rows) {
        line(r);
    }
    return out;
}

std::string trim_zeros(std::string s) {
    if (s.find('.') == std::string::npos) {
        return s;
    }
    while (s.back() == '0') {
        s.pop_back();
    }
    if (s.back() == '.') {
        s.pop_back();
    }
    return s;
}

} // namespace

double round_half_up(double value, int decimals) {
    const double scale = std::pow(10.0, decimals);
    // The small epsilon keeps decimal ties such as 2.85 from rounding down
    // because of their binary representation.
    const double magnitude = std::floor(std::fabs(value) * scale + 0.5 + 1e-9) / scale;
    return std::signbit(value) ? -magnitude : magnitude;
}

CampaignSummary summarize(const std::vector<PointVerdict>& verdicts, std::size_t total_points) {
    CampaignSummary s;
    s.total_points = total_points;
    s.covered = verdicts.size();
    for (const auto& v : verdicts) {
        s.resilient += v.resilient ? 1 : 0;
        s.performance_issues += v.performance_issue ? 1 : 0;
    }
    if (s.covered > s.total_points) {
        throw Error(ErrorCode::ConsistencyError, std::to_string(s.covered) + " covered points exceed the total of " +
                                                     std::to_string(s.total_points));
    }
    return s;
}

std::string render_summary(const CampaignSummary& s, Format format) {
    return render_table({"Total FI Points", "Covered", "Resilient", "Performance Issues"},
                        {{std::to_string(s.total_points), std::to_string(s.covered), std::to_string(s.resilient),
                          std::to_string(s.performance_issues)}},
                        format);
}

std::string format_p_value(double p) {
    if (p < 0.01) {
        return "<0.01";
    }
    return fixed(p, 2);
}

std::string format_relative_effect(double re) {
    return fixed(re * 100.0, 2) + "%";
}

std::string render_point_table(const std::vector<PointVerdict>& verdicts, Format format) {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < verdicts.size(); ++i) {
        const auto& v = verdicts[i];
        std::vector<std::string> row = {std::to_string(i + 1), v.point.class_name, v.point.method_name,
                                        v.point.exception_type};
        if (v.error) {
            row.insert(row.end(), {"error", "-", "-"});
        } else {
            row.push_back(fixed(v.correctness_rate * 100.0, 0) + "%");
            row.push_back(format_p_value(v.impact.p_value));
            row.push_back(format_relative_effect(v.impact.relative_effect));
        }
        rows.push_back(std::move(row));
    }
    return render_table({"No.", "Full Class Name", "Method Name", "Exception Type", "C. Rate", "P-value", "RE"}, rows,
                        format);
}

std::string_view to_string(OverheadCategory category) {
    switch (category) {
    case OverheadCategory::ImageSize: return "Image Size";
    case OverheadCategory::CpuUsage: return "CPU Usage";
    case OverheadCategory::MemoryUsage: return "Memory Usage";
    case OverheadCategory::ResponseTime: return "Response Time";
    }
    return "Unknown";
}

std::optional<double> OverheadRow::percent_increase() const {
    if (category == OverheadCategory::CpuUsage || original == 0.0) {
        return std::nullopt;
    }
    return (augmented - original) / original * 100.0;
}

OverheadReport make_overhead_report(const orchestrator::OverheadMeasurement& m, std::string application) {
    OverheadReport r;
    r.application = std::move(application);
    r.rows = {
        {OverheadCategory::ImageSize, m.original.size_bytes / 1e6, m.augmented.size_bytes / 1e6},
        {OverheadCategory::CpuUsage, m.original.cpu_fraction * 100.0, m.augmented.cpu_fraction * 100.0},
        {OverheadCategory::MemoryUsage, m.original.memory_bytes / 1e6, m.augmented.memory_bytes / 1e6},
        {OverheadCategory::ResponseTime, m.original.response_time_s, m.augmented.response_time_s},
    };
    return r;
}

std::string format_value(OverheadCategory category, double value) {
    switch (category) {
    case OverheadCategory::ImageSize:
    case OverheadCategory::MemoryUsage: return fixed(value, 0) + "MB";
    case OverheadCategory::CpuUsage: return fixed(value, 2) + "%";
    case OverheadCategory::ResponseTime: return trim_zeros(fixed(value, 4)) + "s";
    }
    return {};
}

std::string format_increase(const OverheadRow& row) {
    if (row.category == OverheadCategory::CpuUsage) {
        return format_value(row.category, row.absolute_increase());
    }
    auto percent = row.percent_increase();
    if (!percent) {
        return "n/a";
    }
    return format_value(row.category, row.absolute_increase()) + " (" + fixed(*percent, 1) + "%)";
}

std::string render_overhead(const OverheadReport& report, Format format) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& row : report.rows) {
        rows.push_back({report.application, std::string(to_string(row.category)),
                        format_value(row.category, row.original), format_value(row.category, row.augmented),
                        format_increase(row)});
    }
    return render_table({"Application", "Category", "Original Image", "Augmented Image", "Increase"}, rows, format);
}

std::string summary_json(const CampaignSummary& summary, const std::vector<PointVerdict>& verdicts) {
    json points = json::array();
    for (const auto& v : verdicts) {
        points.push_back(json::parse(orchestrator::to_json(v)));
    }
    json j = {{"total_points", summary.total_points},
              {"covered", summary.covered},
              {"resilient", summary.resilient},
              {"performance_issues", summary.performance_issues},
              {"points", points}};
    return j.dump(2) + "\n";
}

std::vector<PointVerdict> load_verdicts(const std::filesystem::path& output_dir) {
    const auto dir = output_dir / "points";
    std::vector<std::filesystem::path> files;
    if (std::filesystem::is_directory(dir)) {
        for (const auto& entry : std::filesystem::directory_iterator(dir)) {
            auto file = entry.path() / "verdict.json";
            if (std::filesystem::is_regular_file(file)) {
                files.push_back(file);
            }
        }
    }
    std::sort(files.begin(), files.end());
    std::vector<PointVerdict> verdicts;
    for (const auto& f : files) {
        std::ifstream in(f, std::ios::binary);
        std::ostringstream buffer;
        buffer << in.rdbuf();
        verdicts.push_back(orchestrator::parse_verdict(buffer.str()));
    }
    return verdicts;
}

} // namespace pobs::report
