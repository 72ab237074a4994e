#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pobs/agent_protocol.hpp"
#include "pobs/clock.hpp"
#include "pobs/impact.hpp"

namespace pobs::sim {

/// The four observability layers. Metric names carry their layer as prefix:
/// `os.`, `jvm.`, `http.`/`db.` (library) and `app.`.
enum class MetricCategory { Os, Jvm, Library, Application };

std::string_view to_string(MetricCategory category);
std::optional<MetricCategory> category_of(std::string_view metric_name);

/// A method that declares an exception, as seen by the fault injector.
struct SimPoint {
    std::string key;
    std::string class_name;
    std::string method_name;
    std::string exception_type;
    /// Whether an injected exception escapes to the response (non-resilient).
    bool breaks_response = true;
    /// Metric whose level moves while this point keeps injecting.
    std::string metric = "jvm.cpu.load";
    /// Relative level change, e.g. -0.6239 for a 62.39% drop.
    double metric_shift = 0.0;
};

struct SimEndpoint {
    std::string method = "GET";
    std::string path;
    std::string response_body;
    /// Injection points reached, in call order, by one request.
    std::vector<std::string> points;
    int latency_ms = 0;
};

/// Behavior of a simulated application. Stored as JSON next to the "jar" in a
/// build context; see README for the schema.
struct SimulatorProfile {
    std::string app_name = "app";
    int app_port = 8080;
    int metrics_port = 4000;
    std::vector<SimEndpoint> endpoints;
    std::vector<SimPoint> points;
    /// Baseline level per metric; merged over the built-in catalog.
    std::map<std::string, double> metric_levels;
    double noise_rel = 0.01;
    int sample_interval_ms = 1000;
    /// A shift stays in effect this long after the point's last injection.
    int shift_hold_ms = 2000;
    bool emit_attach_logs = true;
    bool library_metrics = true;
    /// The process exits on its own after this long.
    std::optional<std::int64_t> exit_after_ms;

    double cpu_fraction = 0.03;
    double memory_mb = 512.0;
    int latency_ms = 0;
    /// Extra cost of the attached agents.
    double agent_cpu_delta = 0.0;
    double agent_memory_mb = 0.0;
    int agent_latency_ms = 0;
};

SimulatorProfile parse_profile(std::string_view json_text);
std::string to_json(const SimulatorProfile& profile);

/// Built-in metric catalog: at least one metric per observability layer.
std::map<std::string, double> default_metric_levels();

/// The augmented base image marks itself through the FI_MODE variable.
bool agents_attached(const std::map<std::string, std::string>& env);

struct SimulatorOptions {
    std::map<std::string, std::string> env;
    std::uint64_t seed = 1;
    std::string host = "127.0.0.1";
    /// Host ports; 0 picks a free one.
    int app_port = 0;
    int metrics_port = 0;
    /// Host directory standing in for the container's filesystem root;
    /// absolute CSVPATH values resolve under it. Empty: host paths as-is.
    std::filesystem::path root;
    /// Directory the relative CSVPATH resolves against.
    std::filesystem::path workdir;
    std::shared_ptr<Clock> clock;
    /// Receives every log line as it is written.
    std::function<void(const std::string&)> log_sink;
};

struct ResourceSample {
    double cpu_fraction = 0.0;
    double memory_bytes = 0.0;
};

/// In-process stand-in for an instrumented application. Honors the fault
/// injection protocol read from `env`, serves the workload endpoints and, when
/// the agents are attached, the metrics query endpoint.
class TargetSimulator {
public:
    /// Throws Error(StartupError) when a port cannot be bound.
    static std::unique_ptr<TargetSimulator> start(SimulatorProfile profile, SimulatorOptions options);

    ~TargetSimulator();
    TargetSimulator(const TargetSimulator&) = delete;
    TargetSimulator& operator=(const TargetSimulator&) = delete;

    void stop();
    bool running() const;

    int app_port() const;
    /// 0 when the observability agent is not attached.
    int metrics_port() const;
    bool attached() const;
    std::int64_t started_at_ms() const;

    std::string logs() const;
    ResourceSample sample_resources();

    /// Throws Error(UnknownMetric).
    impact::MetricSeries query_metric(const std::string& metric, std::int64_t start_ms, std::int64_t end_ms) const;

    /// Null when the fault injector is not attached.
    const agent::PointRegistry* registry() const;

private:
    struct Impl;
    explicit TargetSimulator(std::unique_ptr<Impl> impl);
    std::unique_ptr<Impl> impl_;
};

} // namespace pobs::sim
