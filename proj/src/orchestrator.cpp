#include "pobs/orchestrator.hpp"

#include <openssl/evp.h>
#include <stdlib.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "pobs/dockerfile.hpp"
#include "pobs/error.hpp"
#include "pobs/metrics_client.hpp"

namespace pobs::orchestrator {

namespace fs = std::filesystem;
using nlohmann::json;
using runtime::ContainerHandle;
using runtime::ContainerRuntime;

namespace {

constexpr std::int64_t kLogPollMs = 100;

std::shared_ptr<Clock> clock_of(const ExperimentConfig& config) {
    return config.clock ? config.clock : std::make_shared<SystemClock>();
}

void progress(const ExperimentConfig& config, const std::string& message) {
    if (config.progress) {
        config.progress(message);
    }
}

// Scratch directory removed on scope exit unless the caller supplied one.
class Scratch {
public:
    explicit Scratch(const ExperimentConfig& config) {
        if (!config.work_dir.empty()) {
            path_ = config.work_dir;
            fs::create_directories(path_);
            return;
        }
        auto templ = (fs::temp_directory_path() / "pobs-work-XXXXXX").string();
        if (!mkdtemp(templ.data())) {
            throw Error(ErrorCode::IoError, "cannot create scratch directory");
        }
        path_ = templ;
        owned_ = true;
    }
    ~Scratch() {
        if (owned_) {
            std::error_code ec;
            fs::remove_all(path_, ec);
        }
    }
    Scratch(const Scratch&) = delete;
    Scratch& operator=(const Scratch&) = delete;
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
    bool owned_ = false;
};

// Stops the container when the experiment step leaves scope.
class Running {
public:
    Running(ContainerRuntime& runtime, ContainerHandle handle) : runtime_(runtime), handle_(std::move(handle)) {}
    ~Running() { stop(); }
    Running(const Running&) = delete;
    Running& operator=(const Running&) = delete;
    const ContainerHandle& handle() const { return handle_; }
    void stop() {
        if (!stopped_) {
            stopped_ = true;
            try {
                runtime_.stop(handle_);
            } catch (const Error&) {
            }
        }
    }

private:
    ContainerRuntime& runtime_;
    ContainerHandle handle_;
    bool stopped_ = false;
};

std::string sanitize(const std::string& text) {
    std::string out;
    for (char c : text) {
        const bool keep = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' ||
                          c == '_' || c == '-';
        out += keep ? c : '_';
    }
    return out;
}

void write_file(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorCode::IoError, "cannot write " + path.string());
    }
    out << content;
}

std::string last_lines(const std::string& text, std::size_t n) {
    std::size_t pos = text.size();
    if (pos > 0 && text[pos - 1] == '\n') {
        --pos;
    }
    for (std::size_t i = 0; i < n && pos > 0; ++i) {
        pos = text.rfind('\n', pos - 1);
        if (pos == std::string::npos) {
            return text;
        }
    }
    return pos == 0 ? text : text.substr(pos + 1);
}

struct AttachState {
    bool observability = false;
    bool fault_injector = false;
    bool both() const { return observability && fault_injector; }
};

AttachState attach_state(const std::string& logs) {
    AttachState s;
    for (const auto& e : agent::parse_log(logs)) {
        s.observability |= e.kind == agent::LogEventKind::ObservabilityAttached;
        s.fault_injector |= e.kind == agent::LogEventKind::FaultInjectorAttached;
    }
    return s;
}

bool wait_for_attachment(ContainerRuntime& runtime, const ContainerHandle& handle, Clock& clock,
                         const ExperimentConfig& config) {
    const auto deadline = clock.now_ms() + config.startup_timeout_ms;
    for (;;) {
        if (attach_state(runtime.logs(handle)).both()) {
            return true;
        }
        if (!runtime.running(handle) || clock.now_ms() >= deadline) {
            return false;
        }
        clock.sleep_for_ms(kLogPollMs);
    }
}

std::vector<std::string> injected_keys(const std::string& logs) {
    std::vector<std::string> keys;
    for (const auto& e : agent::parse_log(logs)) {
        if (e.kind == agent::LogEventKind::ExceptionInjected && e.point_key) {
            keys.push_back(*e.point_key);
        }
    }
    return keys;
}

int require_port(const ContainerHandle& handle, int container_port) {
    auto port = handle.host_port(container_port);
    if (!port) {
        throw Error(ErrorCode::RuntimeError,
                    "container " + handle.id + " does not publish port " + std::to_string(container_port));
    }
    return *port;
}

struct PhaseRun {
    std::vector<workload::Exchange> exchanges;
    std::vector<runtime::ContainerStats> stats;
    std::int64_t start_ms = 0;
    std::int64_t end_ms = 0;
    bool exited_early = false;
};

// Workload requests and resource sampling interleaved on one thread, each
// at its own cadence.
PhaseRun drive(ContainerRuntime& runtime, const ContainerHandle& handle, const workload::WorkloadSpec& spec,
               Clock& clock, const ExperimentConfig& config, std::int64_t duration_ms, bool sample_stats) {
    PhaseRun run;
    const int port = require_port(handle, spec.target_port);
    run.start_ms = clock.now_ms();
    const auto end = run.start_ms + duration_ms;
    auto next_request = run.start_ms;
    auto next_stats = run.start_ms;
    std::size_t index = 0;
    while (clock.now_ms() < end) {
        if (!runtime.running(handle)) {
            run.exited_early = true;
            break;
        }
        auto now = clock.now_ms();
        if (now >= next_request) {
            workload::Exchange e;
            e.index = index;
            e.request_slot = index % spec.requests.size();
            e.sent_ms = now;
            const auto t0 = clock.now_us();
            e.response = workload::send(spec, e.request_slot, handle.host, port);
            e.latency_ms = (clock.now_us() - t0) / 1000;
            run.exchanges.push_back(std::move(e));
            ++index;
            next_request += spec.interval_ms;
            if (next_request < clock.now_ms()) {
                next_request = clock.now_ms();
            }
        }
        if (sample_stats && clock.now_ms() >= next_stats) {
            run.stats.push_back(runtime.stats(handle));
            next_stats += config.poll_interval_ms;
        }
        auto wake = std::min(next_request, end);
        if (sample_stats) {
            wake = std::min(wake, next_stats);
        }
        clock.sleep_until_ms(wake);
    }
    run.end_ms = clock.now_ms();
    return run;
}

std::string exchange_lines(std::string_view phase, const std::vector<workload::Exchange>& exchanges,
                           const std::vector<std::optional<workload::Response>>* reference,
                           workload::Matcher matcher) {
    std::string out;
    for (const auto& e : exchanges) {
        std::string match = "-";
        if (reference) {
            const auto& ref = (*reference)[e.request_slot];
            match = ref && workload::responses_match(matcher, *ref, e.response) ? "match" : "mismatch";
        }
        out += std::string(phase) + "\t" + std::to_string(e.index) + "\t" + std::to_string(e.request_slot) + "\t" +
               std::to_string(e.sent_ms) + "\t" + std::to_string(e.response.status) + "\t" + match + "\t" +
               json(e.response.body).dump() + "\n";
    }
    return out;
}

std::vector<std::pair<std::string, std::string>> activation_env(const agent::FiConfig& config,
                                                                const std::string& key) {
    auto env = agent::to_env(config);
    env.emplace_back(std::string(agent::kActivePointsVar), key);
    return env;
}

} // namespace

std::string_view to_string(Phase phase) {
    switch (phase) {
    case Phase::AugmentBase: return "AugmentBase";
    case Phase::BuildApp: return "BuildApp";
    case Phase::RunApp: return "RunApp";
    case Phase::ModeA: return "ModeA";
    case Phase::ModeB: return "ModeB";
    case Phase::FiCampaign: return "FiCampaign";
    case Phase::Overhead: return "Overhead";
    }
    return "Unknown";
}

std::string_view to_string(Status status) {
    return status == Status::Pass ? "Pass" : "Fail";
}

ExperimentOutcome ExperimentOutcome::pass(Phase phase, std::vector<std::string> evidence) {
    return {phase, Status::Pass, std::nullopt, std::move(evidence)};
}

ExperimentOutcome ExperimentOutcome::fail(Phase phase, std::string failure_class, std::vector<std::string> evidence) {
    if (failure_class.empty()) {
        throw Error(ErrorCode::InvalidArgument, "a failed outcome needs a failure class");
    }
    return {phase, Status::Fail, std::move(failure_class), std::move(evidence)};
}

std::string to_json(const ExperimentOutcome& outcome) {
    json j = {{"phase", to_string(outcome.phase)},
              {"status", to_string(outcome.status)},
              {"failure_class", outcome.failure_class ? json(*outcome.failure_class) : json(nullptr)},
              {"evidence", outcome.evidence}};
    return j.dump(2) + "\n";
}

agent::FiConfig activation_config() {
    agent::FiConfig config;
    config.rate = 1.0;
    config.countdown = agent::kUnlimited;
    return config;
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
        throw Error(ErrorCode::InvalidArgument, "SHA-256 computation failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < length; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

ExperimentOutcome validate_base_image(const augmentor::AugmentationPlan& plan, const fs::path& module_context,
                                      const ProbeSpec& probe, ContainerRuntime& runtime,
                                      const ExperimentConfig& config) {
    auto clock = clock_of(config);
    Scratch scratch(config);
    const auto base_tag = plan.augmented.reference();
    std::vector<std::string> evidence;

    const auto base_file = scratch.path() / ("Dockerfile." + sanitize(base_tag));
    write_file(base_file, dockerfile::emit(plan.generated_dockerfile));
    progress(config, "building " + base_tag);
    auto base = runtime.build(base_tag, base_file, module_context);
    if (!base.ok) {
        return ExperimentOutcome::fail(Phase::AugmentBase, "build-error", {last_lines(base.log, 5)});
    }
    evidence.push_back("built " + base_tag);

    const auto probe_tag = "pobs-probe-" + sanitize(plan.augmented.name) + ":latest";
    const auto probe_file = scratch.path() / ("Dockerfile.probe." + sanitize(base_tag));
    write_file(probe_file, "FROM " + base_tag + "\n" + probe.dockerfile_tail);
    auto built = runtime.build(probe_tag, probe_file, probe.context_dir);
    if (!built.ok) {
        return ExperimentOutcome::fail(Phase::BuildApp, "build-error", {last_lines(built.log, 5)});
    }
    evidence.push_back("built " + probe_tag);

    struct ProbeRun {
        bool attached = false;
        bool artifact_ok = false;
        bool injected = false;
        std::string detail;
    };
    auto exercise = [&](std::vector<std::pair<std::string, std::string>> env) {
        ProbeRun r;
        Running container(runtime, runtime.run({probe_tag, std::move(env), {config.app_port}}));
        const auto& h = container.handle();
        r.attached = wait_for_attachment(runtime, h, *clock, config);
        if (!r.attached) {
            r.detail = last_lines(runtime.logs(h), 5);
            return r;
        }
        auto response = workload::send({{{"GET", probe.request_path, {}, {}}}, 0, workload::Matcher::Exact,
                                        config.app_port},
                                       0, h.host, require_port(h, config.app_port));
        const auto checksum = sha256_hex(response.body);
        r.artifact_ok = response.status == 200 && checksum == probe.expected_sha256;
        auto keys = injected_keys(runtime.logs(h));
        r.injected = std::find(keys.begin(), keys.end(), probe.point_key) != keys.end();
        r.detail = "status=" + std::to_string(response.status) + " sha256=" + checksum +
                   (r.injected ? " injection logged" : " no injection logged");
        return r;
    };

    progress(config, "mode A: injection off");
    auto a = exercise({});
    if (!a.attached) {
        return ExperimentOutcome::fail(Phase::ModeA, "no-attachment", {a.detail});
    }
    if (!a.artifact_ok) {
        return ExperimentOutcome::fail(Phase::ModeA, "probe-mismatch", {a.detail});
    }
    evidence.push_back("mode A: " + a.detail);

    progress(config, "mode B: " + probe.point_key + " active");
    auto b = exercise(activation_env(probe.injection, probe.point_key));
    if (!b.attached) {
        return ExperimentOutcome::fail(Phase::ModeB, "no-attachment", {b.detail});
    }
    if (b.artifact_ok || !b.injected) {
        return ExperimentOutcome::fail(Phase::ModeB, "probe-mismatch", {b.detail});
    }
    evidence.push_back("mode B: " + b.detail);
    return ExperimentOutcome::pass(Phase::ModeB, std::move(evidence));
}

ExperimentOutcome verify_observability(const std::string& app_image, ContainerRuntime& runtime,
                                       const ExperimentConfig& config, const VerifyOptions& options) {
    auto clock = clock_of(config);
    Running container(runtime, runtime.run({app_image, {}, {config.app_port, config.metrics_port}}));
    const auto& h = container.handle();
    if (!wait_for_attachment(runtime, h, *clock, config)) {
        return ExperimentOutcome::fail(Phase::RunApp, "no-attachment", {last_lines(runtime.logs(h), 5)});
    }
    const auto start = clock->now_ms();
    const auto end = start + options.duration_ms;
    while (clock->now_ms() < end) {
        if (!runtime.running(h)) {
            return ExperimentOutcome::fail(
                Phase::RunApp, "early-exit",
                {"exited after " + std::to_string(clock->now_ms() - start) + " ms", last_lines(runtime.logs(h), 5)});
        }
        clock->sleep_until_ms(std::min(end, clock->now_ms() + config.poll_interval_ms));
    }
    if (!runtime.running(h)) {
        return ExperimentOutcome::fail(Phase::RunApp, "early-exit", {last_lines(runtime.logs(h), 5)});
    }

    std::vector<std::string> evidence;
    const auto metrics_port = h.host_port(config.metrics_port);
    for (const auto& [category, metric] : options.required_metrics) {
        std::string problem;
        if (!metrics_port) {
            problem = "metrics port not published";
        } else {
            try {
                auto series = metrics::fetch_metrics({h.host, *metrics_port}, metric, start, clock->now_ms());
                if (series.samples.empty()) {
                    problem = metric + ": no samples";
                } else {
                    evidence.push_back(metric + ": " + std::to_string(series.samples.size()) + " samples");
                }
            } catch (const Error& e) {
                problem = e.what();
            }
        }
        if (!problem.empty()) {
            return ExperimentOutcome::fail(Phase::RunApp, "metrics-missing:" + category, {problem});
        }
    }
    return ExperimentOutcome::pass(Phase::RunApp, std::move(evidence));
}

Discovery discover_points(const std::string& app_image, const workload::WorkloadSpec& spec,
                          ContainerRuntime& runtime, const ExperimentConfig& config, std::int64_t duration_ms) {
    auto clock = clock_of(config);
    agent::FiConfig fi;
    fi.default_mode = agent::DefaultMode::On;
    fi.countdown = 1;
    fi.csv_path = std::string(kPointsCsvInContainer);
    Running container(runtime, runtime.run({app_image, agent::to_env(fi), {spec.target_port}}));
    const auto& h = container.handle();
    if (!wait_for_attachment(runtime, h, *clock, config)) {
        throw Error(ErrorCode::RuntimeError, "fault injector did not attach: " + last_lines(runtime.logs(h), 3));
    }
    drive(runtime, h, spec, *clock, config, duration_ms, false);
    auto csv = runtime.copy_from(h, std::string(kPointsCsvInContainer));
    if (!csv) {
        throw Error(ErrorCode::RuntimeError, "points list not found at " + std::string(kPointsCsvInContainer));
    }
    Discovery d;
    d.points = agent::parse_points_csv(*csv);
    auto keys = injected_keys(runtime.logs(h));
    for (const auto& p : d.points) {
        if (std::find(keys.begin(), keys.end(), p.key) != keys.end()) {
            d.covered.push_back(p);
        }
    }
    return d;
}

PointVerdict classify(agent::InjectionPoint point, double correctness_rate, impact::ImpactResult impact) {
    PointVerdict v;
    v.point = std::move(point);
    v.correctness_rate = correctness_rate;
    v.resilient = correctness_rate == 1.0;
    v.performance_issue = impact.significant;
    v.impact = std::move(impact);
    return v;
}

std::string to_json(const PointVerdict& v) {
    json j = {
        {"point",
         {{"key", v.point.key},
          {"class_name", v.point.class_name},
          {"method_name", v.point.method_name},
          {"exception_type", v.point.exception_type}}},
        {"correctness_rate", v.correctness_rate},
        {"impact", json::parse(impact::to_json(v.impact))},
        {"resilient", v.resilient},
        {"performance_issue", v.performance_issue},
        {"error", v.error ? json(*v.error) : json(nullptr)},
        {"requests", v.requests},
        {"reference_start_ms", v.reference_start_ms},
        {"reference_end_ms", v.reference_end_ms},
        {"intervention_ts", v.intervention_ts},
        {"injection_end_ms", v.injection_end_ms},
    };
    return j.dump(2) + "\n";
}

PointVerdict parse_verdict(std::string_view json_text) {
    try {
        auto j = json::parse(json_text);
        PointVerdict v;
        const auto& p = j.at("point");
        v.point.key = p.at("key").get<std::string>();
        v.point.class_name = p.value("class_name", std::string{});
        v.point.method_name = p.value("method_name", std::string{});
        v.point.exception_type = p.value("exception_type", std::string{});
        v.correctness_rate = j.at("correctness_rate").get<double>();
        v.impact = impact::parse_impact_result(j.at("impact").dump());
        v.resilient = j.at("resilient").get<bool>();
        v.performance_issue = j.at("performance_issue").get<bool>();
        if (j.contains("error") && !j["error"].is_null()) {
            v.error = j["error"].get<std::string>();
        }
        v.requests = j.value("requests", std::size_t{0});
        v.reference_start_ms = j.value("reference_start_ms", std::int64_t{0});
        v.reference_end_ms = j.value("reference_end_ms", std::int64_t{0});
        v.intervention_ts = j.value("intervention_ts", std::int64_t{0});
        v.injection_end_ms = j.value("injection_end_ms", std::int64_t{0});
        return v;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::MalformedResponse, std::string("malformed verdict: ") + e.what());
    }
}

std::string point_directory_name(std::size_t index, const std::string& key) {
    char prefix[16];
    std::snprintf(prefix, sizeof prefix, "%02zu-", index);
    return prefix + sanitize(key);
}

std::vector<PointVerdict> run_fi_campaign(const std::string& app_image, const std::vector<agent::InjectionPoint>& points,
                                          const workload::WorkloadSpec& spec, ContainerRuntime& runtime,
                                          const ExperimentConfig& config, const CampaignOptions& options) {
    auto clock = clock_of(config);
    std::vector<PointVerdict> verdicts;
    const std::vector<int> ports = {spec.target_port, config.metrics_port};
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& point = points[i];
        progress(config, "point " + std::to_string(i + 1) + "/" + std::to_string(points.size()) + ": " + point.key);
        PointVerdict verdict;
        verdict.point = point;
        impact::MetricSeries series;
        series.metric_name = options.metric;
        std::string responses;
        std::int64_t intervention = 0;
        try {
            auto fetch = [&](const ContainerHandle& h, std::int64_t from, std::int64_t to) {
                auto port = h.host_port(config.metrics_port);
                if (!port) {
                    throw Error(ErrorCode::RuntimeError, "metrics port not published");
                }
                return metrics::fetch_metrics({h.host, *port}, options.metric, from, to);
            };

            Running reference(runtime, runtime.run({app_image, {}, ports}));
            if (!wait_for_attachment(runtime, reference.handle(), *clock, config)) {
                throw Error(ErrorCode::RuntimeError, "no-attachment in reference phase");
            }
            auto ref_run = drive(runtime, reference.handle(), spec, *clock, config, options.phase_ms, false);
            if (ref_run.exited_early) {
                throw Error(ErrorCode::RuntimeError, "early-exit in reference phase");
            }
            auto ref_series = fetch(reference.handle(), ref_run.start_ms, ref_run.end_ms);
            reference.stop();

            // The injection phase starts strictly after the last reference sample.
            if (clock->now_ms() <= ref_run.end_ms) {
                clock->sleep_for_ms(ref_run.end_ms - clock->now_ms() + 1);
            }
            intervention = clock->now_ms();
            Running injected(runtime, runtime.run({app_image, activation_env(options.injection, point.key), ports}));
            if (!wait_for_attachment(runtime, injected.handle(), *clock, config)) {
                throw Error(ErrorCode::RuntimeError, "no-attachment in injection phase");
            }
            auto inj_run = drive(runtime, injected.handle(), spec, *clock, config, options.phase_ms, false);
            auto inj_series = fetch(injected.handle(), intervention, inj_run.end_ms);
            injected.stop();

            series.samples = ref_series.samples;
            series.samples.insert(series.samples.end(), inj_series.samples.begin(), inj_series.samples.end());

            const auto reference_responses = workload::reference_responses(ref_run.exchanges, spec.requests.size());
            const auto correctness = workload::judge(spec.matcher, reference_responses, inj_run.exchanges);
            responses = exchange_lines("reference", ref_run.exchanges, nullptr, spec.matcher) +
                        exchange_lines("injection", inj_run.exchanges, &reference_responses, spec.matcher);
            if (correctness.total == 0) {
                throw Error(ErrorCode::RuntimeError, "no requests completed in the injection phase");
            }

            auto impact_options = options.impact;
            impact_options.seed += i;
            auto result = impact::analyze(series, intervention, impact_options);
            verdict = classify(point, correctness.rate(), std::move(result));
            verdict.requests = correctness.total;
            verdict.reference_start_ms = ref_run.start_ms;
            verdict.reference_end_ms = ref_run.end_ms;
            verdict.intervention_ts = intervention;
            verdict.injection_end_ms = inj_run.end_ms;
            if (inj_run.exited_early) {
                verdict.error = "early-exit in injection phase";
            }
        } catch (const Error& e) {
            verdict.error = e.what();
            verdict.intervention_ts = intervention;
        }

        if (!options.output_dir.empty()) {
            const auto dir = options.output_dir / "points" / point_directory_name(i + 1, point.key);
            write_file(dir / "metrics.json", impact::to_json(impact::ImpactInput{series, intervention}));
            write_file(dir / "responses.log", responses);
            write_file(dir / "verdict.json", to_json(verdict));
        }
        verdicts.push_back(std::move(verdict));
    }
    return verdicts;
}

OverheadMeasurement measure_overhead(const std::string& original_image, const std::string& augmented_image,
                                     const workload::WorkloadSpec& spec, ContainerRuntime& runtime,
                                     const ExperimentConfig& config, const OverheadOptions& options) {
    auto clock = clock_of(config);
    auto measure = [&](const std::string& image) {
        ImageMeasurement m;
        m.image = image;
        auto size = runtime.image_size(image);
        if (!size) {
            throw Error(ErrorCode::RuntimeError, "image " + image + " not found");
        }
        m.size_bytes = static_cast<double>(*size);
        double cpu_sum = 0.0;
        double memory_sum = 0.0;
        double latency_sum = 0.0;
        for (int r = 0; r < options.repeats; ++r) {
            try {
                Running container(runtime, runtime.run({image, {}, {spec.target_port}}));
                const auto& h = container.handle();
                const int port = require_port(h, spec.target_port);
                std::vector<runtime::ContainerStats> stats;
                double latency_us = 0.0;
                std::size_t calls = 0;
                auto next_stats = clock->now_ms();
                for (std::size_t slot = 0; slot < spec.requests.size(); ++slot) {
                    for (int c = 0; c < options.calls_per_api; ++c) {
                        if (clock->now_ms() >= next_stats) {
                            stats.push_back(runtime.stats(h));
                            next_stats += config.poll_interval_ms;
                        }
                        const auto t0 = clock->now_us();
                        auto response = workload::send(spec, slot, h.host, port);
                        latency_us += static_cast<double>(clock->now_us() - t0);
                        ++calls;
                        if (response.status == 0) {
                            throw Error(ErrorCode::RuntimeError, "request failed: " + response.body);
                        }
                    }
                }
                if (stats.empty()) {
                    stats.push_back(runtime.stats(h));
                }
                double cpu = 0.0;
                double memory = 0.0;
                for (const auto& s : stats) {
                    cpu += s.cpu_fraction;
                    memory += s.memory_bytes;
                }
                cpu_sum += cpu / static_cast<double>(stats.size());
                memory_sum += memory / static_cast<double>(stats.size());
                latency_sum += calls == 0 ? 0.0 : latency_us / static_cast<double>(calls) / 1e6;
                ++m.completed_repeats;
            } catch (const Error& e) {
                m.failures.push_back("repeat " + std::to_string(r + 1) + ": " + e.what());
            }
        }
        if (m.completed_repeats > 0) {
            const double n = m.completed_repeats;
            m.cpu_fraction = cpu_sum / n;
            m.memory_bytes = memory_sum / n;
            m.response_time_s = latency_sum / n;
        }
        return m;
    };
    progress(config, "measuring " + original_image);
    OverheadMeasurement result;
    result.original = measure(original_image);
    progress(config, "measuring " + augmented_image);
    result.augmented = measure(augmented_image);
    return result;
}

} // namespace pobs::orchestrator
