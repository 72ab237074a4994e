#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pobs/agent_protocol.hpp"
#include "pobs/augmentor.hpp"
#include "pobs/clock.hpp"
#include "pobs/impact.hpp"
#include "pobs/runtime.hpp"
#include "pobs/workload.hpp"

namespace pobs::orchestrator {

enum class Phase { AugmentBase, BuildApp, RunApp, ModeA, ModeB, FiCampaign, Overhead };
enum class Status { Pass, Fail };

std::string_view to_string(Phase phase);
std::string_view to_string(Status status);

struct ExperimentOutcome {
    Phase phase = Phase::RunApp;
    Status status = Status::Pass;
    std::optional<std::string> failure_class;
    /// Log excerpts and paths of files written.
    std::vector<std::string> evidence;

    static ExperimentOutcome pass(Phase phase, std::vector<std::string> evidence = {});
    /// Throws Error(InvalidArgument) for an empty failure class.
    static ExperimentOutcome fail(Phase phase, std::string failure_class, std::vector<std::string> evidence = {});
};

std::string to_json(const ExperimentOutcome& outcome);

struct ExperimentConfig {
    std::shared_ptr<Clock> clock;
    std::string host = "127.0.0.1";
    int app_port = 8080;
    int metrics_port = 4000;
    /// Cadence of liveness checks and resource sampling.
    std::int64_t poll_interval_ms = 1000;
    std::int64_t startup_timeout_ms = 10000;
    /// Scratch space for generated Dockerfiles; a temporary directory when empty.
    std::filesystem::path work_dir;
    std::function<void(const std::string&)> progress;
};

/// Fault injector options for an activated point: always fire, never run out.
agent::FiConfig activation_config();

std::string sha256_hex(std::string_view data);

/// A small application built on the augmented base image whose artifact is
/// checked by checksum.
struct ProbeSpec {
    std::filesystem::path context_dir;
    /// Dockerfile text placed after the generated `FROM <augmented image>` line.
    std::string dockerfile_tail;
    std::string request_path = "/probe";
    std::string expected_sha256;
    /// Point activated in Mode B.
    std::string point_key;
    agent::FiConfig injection = activation_config();
};

/// Builds the augmented base from `module_context`, then runs the probe with
/// injection off (Mode A) and with its point active (Mode B). Failure classes:
/// build-error, no-attachment, probe-mismatch.
ExperimentOutcome validate_base_image(const augmentor::AugmentationPlan& plan,
                                      const std::filesystem::path& module_context, const ProbeSpec& probe,
                                      runtime::ContainerRuntime& runtime, const ExperimentConfig& config);

struct VerifyOptions {
    std::int64_t duration_ms = 60000;
    /// One metric checked per layer, as (category name, metric name).
    std::vector<std::pair<std::string, std::string>> required_metrics = {
        {"os", "os.cpu.system_load"},
        {"jvm", "jvm.cpu.load"},
        {"library", "http.response.time"},
    };
};

/// Failure classes: no-attachment, early-exit, metrics-missing:<category>.
ExperimentOutcome verify_observability(const std::string& app_image, runtime::ContainerRuntime& runtime,
                                       const ExperimentConfig& config, const VerifyOptions& options = {});

struct Discovery {
    /// Every row of the points CSV written by the fault injector.
    std::vector<agent::InjectionPoint> points;
    /// Points the workload reached, in CSV order.
    std::vector<agent::InjectionPoint> covered;
};

/// Runs the workload once with DEFAULTMODE=on and COUNTDOWN=1: every point the
/// workload reaches injects exactly once and is thereby marked covered.
Discovery discover_points(const std::string& app_image, const workload::WorkloadSpec& workload,
                          runtime::ContainerRuntime& runtime, const ExperimentConfig& config,
                          std::int64_t duration_ms);

inline constexpr std::string_view kPointsCsvInContainer = "/home/logs/perturbationPointsList.csv";

struct PointVerdict {
    agent::InjectionPoint point;
    double correctness_rate = 0.0;
    impact::ImpactResult impact;
    bool resilient = false;
    bool performance_issue = false;
    /// Set when the experiment for this point could not be completed.
    std::optional<std::string> error;
    std::size_t requests = 0;
    std::int64_t reference_start_ms = 0;
    std::int64_t reference_end_ms = 0;
    std::int64_t intervention_ts = 0;
    std::int64_t injection_end_ms = 0;

    friend bool operator==(const PointVerdict&, const PointVerdict&) = default;
};

/// Applies the flag definitions: resilient iff every response stayed correct,
/// performance issue iff the impact is significant.
PointVerdict classify(agent::InjectionPoint point, double correctness_rate, impact::ImpactResult impact);

std::string to_json(const PointVerdict& verdict);
PointVerdict parse_verdict(std::string_view json_text);

struct CampaignOptions {
    std::int64_t phase_ms = 300000;
    std::string metric = "jvm.cpu.load";
    impact::ImpactOptions impact;
    agent::FiConfig injection = activation_config();
    /// Receives points/NN-key/{metrics.json,responses.log,verdict.json} when set.
    std::filesystem::path output_dir;
};

/// For each point: a reference container with nothing active, then a fresh
/// container with only that point active, both under the same workload for
/// `phase_ms`. The metric series of the two phases is analyzed with the
/// intervention at the injection phase start. Failures are recorded per point.
std::vector<PointVerdict> run_fi_campaign(const std::string& app_image,
                                          const std::vector<agent::InjectionPoint>& points,
                                          const workload::WorkloadSpec& workload, runtime::ContainerRuntime& runtime,
                                          const ExperimentConfig& config, const CampaignOptions& options);

/// Directory name of the n-th (1-based) point under points/.
std::string point_directory_name(std::size_t index, const std::string& key);

struct OverheadOptions {
    int repeats = 30;
    int calls_per_api = 300;
};

struct ImageMeasurement {
    std::string image;
    double size_bytes = 0.0;
    double cpu_fraction = 0.0;
    double memory_bytes = 0.0;
    double response_time_s = 0.0;
    int completed_repeats = 0;
    std::vector<std::string> failures;
};

struct OverheadMeasurement {
    ImageMeasurement original;
    ImageMeasurement augmented;
};

OverheadMeasurement measure_overhead(const std::string& original_image, const std::string& augmented_image,
                                     const workload::WorkloadSpec& workload, runtime::ContainerRuntime& runtime,
                                     const ExperimentConfig& config, const OverheadOptions& options = {});

} // namespace pobs::orchestrator
