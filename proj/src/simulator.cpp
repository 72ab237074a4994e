#include "pobs/simulator.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numbers>
#include <regex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "pobs/error.hpp"

namespace pobs::sim {

using nlohmann::json;

namespace {

double standard_normal(std::uint64_t key) {
    const double u1 = agent::unit_interval(agent::mix64(key)) + 0x1.0p-54;
    const double u2 = agent::unit_interval(agent::mix64(key ^ 0x5851f42d4c957f2dULL));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::string escape_regex(const std::string& path) {
    static const std::string special = R"(\^$.|?*+()[]{})";
    std::string out;
    for (char c : path) {
        if (special.find(c) != std::string::npos) {
            out += '\\';
        }
        out += c;
    }
    return out;
}

bool is_library_metric(const std::string& name) {
    return category_of(name) == MetricCategory::Library;
}

} // namespace

std::string_view to_string(MetricCategory category) {
    switch (category) {
    case MetricCategory::Os: return "os";
    case MetricCategory::Jvm: return "jvm";
    case MetricCategory::Library: return "library";
    case MetricCategory::Application: return "application";
    }
    return "unknown";
}

std::optional<MetricCategory> category_of(std::string_view name) {
    if (name.starts_with("os.")) return MetricCategory::Os;
    if (name.starts_with("jvm.")) return MetricCategory::Jvm;
    if (name.starts_with("http.") || name.starts_with("db.")) return MetricCategory::Library;
    if (name.starts_with("app.")) return MetricCategory::Application;
    return std::nullopt;
}

std::map<std::string, double> default_metric_levels() {
    return {
        {"os.cpu.system_load", 0.25},
        {"os.disk.usage", 0.40},
        {"jvm.cpu.load", 0.20},
        {"jvm.heap.used", 2.5e8},
        {"jvm.classes.loaded", 8000.0},
        {"jvm.gc.count", 12.0},
        {"http.response.time", 0.05},
        {"http.responses.2xx", 20.0},
    };
}

bool agents_attached(const std::map<std::string, std::string>& env) {
    return env.contains("FI_MODE");
}

SimulatorProfile parse_profile(std::string_view json_text) {
    try {
        auto j = json::parse(json_text);
        SimulatorProfile p;
        p.app_name = j.value("app_name", p.app_name);
        p.app_port = j.value("app_port", p.app_port);
        p.metrics_port = j.value("metrics_port", p.metrics_port);
        for (const auto& e : j.value("endpoints", json::array())) {
            SimEndpoint endpoint;
            endpoint.method = e.value("method", endpoint.method);
            endpoint.path = e.at("path").get<std::string>();
            endpoint.response_body = e.value("response_body", std::string{});
            endpoint.points = e.value("points", std::vector<std::string>{});
            endpoint.latency_ms = e.value("latency_ms", 0);
            p.endpoints.push_back(std::move(endpoint));
        }
        for (const auto& e : j.value("points", json::array())) {
            SimPoint point;
            point.key = e.at("key").get<std::string>();
            point.class_name = e.value("class_name", std::string{});
            point.method_name = e.value("method_name", std::string{});
            point.exception_type = e.value("exception_type", std::string{"java/lang/Exception"});
            point.breaks_response = e.value("breaks_response", true);
            point.metric = e.value("metric", point.metric);
            point.metric_shift = e.value("metric_shift", 0.0);
            p.points.push_back(std::move(point));
        }
        p.metric_levels = j.value("metric_levels", std::map<std::string, double>{});
        p.noise_rel = j.value("noise_rel", p.noise_rel);
        p.sample_interval_ms = j.value("sample_interval_ms", p.sample_interval_ms);
        p.shift_hold_ms = j.value("shift_hold_ms", p.shift_hold_ms);
        p.emit_attach_logs = j.value("emit_attach_logs", p.emit_attach_logs);
        p.library_metrics = j.value("library_metrics", p.library_metrics);
        if (j.contains("exit_after_ms") && !j["exit_after_ms"].is_null()) {
            p.exit_after_ms = j["exit_after_ms"].get<std::int64_t>();
        }
        p.cpu_fraction = j.value("cpu_fraction", p.cpu_fraction);
        p.memory_mb = j.value("memory_mb", p.memory_mb);
        p.latency_ms = j.value("latency_ms", p.latency_ms);
        p.agent_cpu_delta = j.value("agent_cpu_delta", p.agent_cpu_delta);
        p.agent_memory_mb = j.value("agent_memory_mb", p.agent_memory_mb);
        p.agent_latency_ms = j.value("agent_latency_ms", p.agent_latency_ms);

        if (p.sample_interval_ms <= 0) {
            throw Error(ErrorCode::InvalidArgument, "sample_interval_ms must be positive");
        }
        for (const auto& endpoint : p.endpoints) {
            for (const auto& key : endpoint.points) {
                auto declared = std::any_of(p.points.begin(), p.points.end(),
                                            [&](const SimPoint& sp) { return sp.key == key; });
                if (!declared) {
                    throw Error(ErrorCode::InvalidArgument, "endpoint " + endpoint.path + " reaches undeclared point " + key);
                }
            }
        }
        return p;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("malformed simulator profile: ") + e.what());
    }
}

std::string to_json(const SimulatorProfile& p) {
    json endpoints = json::array();
    for (const auto& e : p.endpoints) {
        endpoints.push_back({{"method", e.method},
                             {"path", e.path},
                             {"response_body", e.response_body},
                             {"points", e.points},
                             {"latency_ms", e.latency_ms}});
    }
    json points = json::array();
    for (const auto& sp : p.points) {
        points.push_back({{"key", sp.key},
                          {"class_name", sp.class_name},
                          {"method_name", sp.method_name},
                          {"exception_type", sp.exception_type},
                          {"breaks_response", sp.breaks_response},
                          {"metric", sp.metric},
                          {"metric_shift", sp.metric_shift}});
    }
    json j = {
        {"app_name", p.app_name},
        {"app_port", p.app_port},
        {"metrics_port", p.metrics_port},
        {"endpoints", endpoints},
        {"points", points},
        {"metric_levels", p.metric_levels},
        {"noise_rel", p.noise_rel},
        {"sample_interval_ms", p.sample_interval_ms},
        {"shift_hold_ms", p.shift_hold_ms},
        {"emit_attach_logs", p.emit_attach_logs},
        {"library_metrics", p.library_metrics},
        {"cpu_fraction", p.cpu_fraction},
        {"memory_mb", p.memory_mb},
        {"latency_ms", p.latency_ms},
        {"agent_cpu_delta", p.agent_cpu_delta},
        {"agent_memory_mb", p.agent_memory_mb},
        {"agent_latency_ms", p.agent_latency_ms},
    };
    if (p.exit_after_ms) {
        j["exit_after_ms"] = *p.exit_after_ms;
    }
    return j.dump(2) + "\n";
}

struct TargetSimulator::Impl {
    struct Window {
        std::atomic<std::int64_t> first{-1};
        std::atomic<std::int64_t> last{-1};
    };

    SimulatorProfile profile;
    SimulatorOptions options;
    std::shared_ptr<Clock> clock;
    bool attached = false;
    agent::FiConfig config;
    bool injection_enabled = false;
    std::unique_ptr<agent::PointRegistry> registry;
    std::vector<SimPoint> instrumented;
    std::map<std::string, std::unique_ptr<Window>> windows;
    std::map<std::string, double> levels;

    mutable std::mutex log_mutex;
    std::vector<std::string> log_lines;

    httplib::Server app_server;
    httplib::Server metrics_server;
    std::thread app_thread;
    std::thread metrics_thread;
    std::thread watcher;
    int app_port = 0;
    int metrics_port = 0;
    std::int64_t start_ms = 0;
    std::atomic<bool> stopped{false};
    std::atomic<std::uint64_t> resource_samples{0};
    std::mutex stop_mutex;

    void log(const std::string& line) {
        {
            std::lock_guard lock(log_mutex);
            log_lines.push_back(line);
        }
        if (options.log_sink) {
            options.log_sink(line);
        }
    }

    std::optional<std::int64_t> exit_time() const {
        if (!profile.exit_after_ms) {
            return std::nullopt;
        }
        return start_ms + *profile.exit_after_ms;
    }

    bool alive() const {
        if (stopped.load()) {
            return false;
        }
        auto deadline = exit_time();
        return !deadline || clock->now_ms() < *deadline;
    }

    void record_injection(const std::string& key) {
        auto now = clock->now_ms();
        auto& w = *windows.at(key);
        std::int64_t expected = -1;
        w.first.compare_exchange_strong(expected, now);
        std::int64_t last = w.last.load();
        while (last < now && !w.last.compare_exchange_weak(last, now)) {
        }
    }

    double shift_at(const std::string& metric, std::int64_t ts) const {
        double shift = 0.0;
        for (const auto& p : instrumented) {
            if (p.metric != metric || p.metric_shift == 0.0) {
                continue;
            }
            const auto& w = *windows.at(p.key);
            auto first = w.first.load();
            auto last = w.last.load();
            if (first >= 0 && ts >= first && ts <= last + profile.shift_hold_ms) {
                shift += p.metric_shift;
            }
        }
        return shift;
    }

    void handle_endpoint(const SimEndpoint& endpoint, httplib::Response& res) {
        if (!alive()) {
            res.status = 503;
            return;
        }
        int latency = endpoint.latency_ms + profile.latency_ms + (attached ? profile.agent_latency_ms : 0);
        clock->sleep_for_ms(latency);
        for (const auto& key : endpoint.points) {
            if (!injection_enabled || !registry->reach(key)) {
                continue;
            }
            log(agent::format_log_line({clock->now_ms(), agent::LogEventKind::ExceptionInjected, key}));
            record_injection(key);
            const auto& point = *std::find_if(instrumented.begin(), instrumented.end(),
                                              [&](const SimPoint& p) { return p.key == key; });
            if (point.breaks_response) {
                res.status = 500;
                res.set_content(json{{"error", point.exception_type}, {"point", key}}.dump(), "application/json");
                return;
            }
        }
        res.status = 200;
        res.set_content(endpoint.response_body, "text/plain");
    }

    void handle_query(const httplib::Request& req, httplib::Response& res) {
        if (!alive()) {
            res.status = 503;
            return;
        }
        json body;
        try {
            body = json::parse(req.body);
        } catch (const json::exception&) {
            res.status = 400;
            res.set_content(json{{"error", "MalformedRequest"}}.dump(), "application/json");
            return;
        }
        if (!body.contains("metric") || !body["metric"].is_string() || !body.contains("start") ||
            !body["start"].is_number_integer() || !body.contains("end") || !body["end"].is_number_integer()) {
            res.status = 400;
            res.set_content(json{{"error", "MalformedRequest"}}.dump(), "application/json");
            return;
        }
        try {
            auto series = query(body["metric"].get<std::string>(), body["start"].get<std::int64_t>(),
                                body["end"].get<std::int64_t>());
            json samples = json::array();
            for (const auto& s : series.samples) {
                samples.push_back({s.timestamp_ms, s.value});
            }
            res.status = 200;
            res.set_content(json{{"metric", series.metric_name}, {"samples", samples}}.dump(), "application/json");
        } catch (const Error& e) {
            res.status = 404;
            res.set_content(json{{"error", std::string(to_string(e.code()))}, {"message", e.what()}}.dump(),
                            "application/json");
        }
    }

    impact::MetricSeries query(const std::string& metric, std::int64_t from, std::int64_t to) const {
        auto level = levels.find(metric);
        if (!attached || level == levels.end()) {
            throw Error(ErrorCode::UnknownMetric, "unknown metric '" + metric + "'");
        }
        impact::MetricSeries series;
        series.metric_name = metric;
        if (to < from) {
            return series;
        }
        std::int64_t horizon = std::min(to, clock->now_ms());
        if (auto deadline = exit_time()) {
            horizon = std::min(horizon, *deadline);
        }
        const std::int64_t interval = profile.sample_interval_ms;
        // Samples sit on the grid start + (k + 1) * interval.
        std::int64_t k = from <= start_ms + interval ? 0 : (from - start_ms + interval - 1) / interval - 1;
        const auto metric_hash = agent::hash_string(metric);
        for (;; ++k) {
            const std::int64_t ts = start_ms + (k + 1) * interval;
            if (ts > horizon) {
                break;
            }
            if (ts < from) {
                continue;
            }
            const double z = standard_normal(options.seed ^ agent::mix64(metric_hash + static_cast<std::uint64_t>(k)));
            const double value = level->second * (1.0 + shift_at(metric, ts)) * (1.0 + profile.noise_rel * z);
            series.samples.push_back({ts, value});
        }
        return series;
    }

    void shutdown() {
        std::lock_guard lock(stop_mutex);
        stopped = true;
        app_server.stop();
        metrics_server.stop();
    }
};

TargetSimulator::TargetSimulator(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}

std::unique_ptr<TargetSimulator> TargetSimulator::start(SimulatorProfile profile, SimulatorOptions options) {
    auto impl = std::make_unique<Impl>();
    impl->clock = options.clock ? options.clock : std::make_shared<SystemClock>();
    impl->attached = agents_attached(options.env);

    if (impl->attached) {
        auto env = options.env;
        if (!env.contains("MODE")) {
            env["MODE"] = env.at("FI_MODE");
        }
        try {
            impl->config = agent::parse_env(env);
        } catch (const Error& e) {
            throw Error(ErrorCode::StartupError, std::string("fault injector rejected its options: ") + e.what());
        }
    }

    impl->levels = default_metric_levels();
    for (const auto& [name, level] : profile.metric_levels) {
        impl->levels[name] = level;
    }
    if (!profile.library_metrics) {
        std::erase_if(impl->levels, [](const auto& kv) { return is_library_metric(kv.first); });
    }

    auto& app = impl->app_server;
    for (std::size_t i = 0; i < profile.endpoints.size(); ++i) {
        const auto pattern = escape_regex(profile.endpoints[i].path);
        Impl* self = impl.get();
        auto handler = [self, i](const httplib::Request&, httplib::Response& res) {
            self->handle_endpoint(self->profile.endpoints[i], res);
        };
        if (profile.endpoints[i].method == "POST") {
            app.Post(pattern, handler);
        } else if (profile.endpoints[i].method == "PUT") {
            app.Put(pattern, handler);
        } else {
            app.Get(pattern, handler);
        }
    }
    auto bind = [&](httplib::Server& server, int port) {
        int bound = port == 0 ? server.bind_to_any_port(options.host) : (server.bind_to_port(options.host, port) ? port : -1);
        if (bound < 0) {
            throw Error(ErrorCode::StartupError, "cannot bind " + options.host + ":" + std::to_string(port));
        }
        return bound;
    };
    impl->app_port = bind(app, options.app_port);
    if (impl->attached) {
        Impl* self = impl.get();
        impl->metrics_server.Post("/metrics/query", [self](const httplib::Request& req, httplib::Response& res) {
            self->handle_query(req, res);
        });
        impl->metrics_server.Get("/metrics", [self](const httplib::Request&, httplib::Response& res) {
            json names = json::array();
            for (const auto& [name, level] : self->levels) {
                auto category = category_of(name);
                names.push_back({{"name", name}, {"category", category ? to_string(*category) : "unknown"}});
            }
            res.set_content(names.dump(), "application/json");
        });
        try {
            impl->metrics_port = bind(impl->metrics_server, options.metrics_port);
        } catch (...) {
            impl->app_server.stop();
            throw;
        }
    }

    impl->profile = std::move(profile);
    impl->options = std::move(options);
    impl->start_ms = impl->clock->now_ms();

    if (impl->attached) {
        if (impl->profile.emit_attach_logs) {
            impl->log(agent::format_log_line({impl->start_ms, agent::LogEventKind::ObservabilityAttached, {}}));
            impl->log(agent::format_log_line({impl->start_ms, agent::LogEventKind::FaultInjectorAttached, {}}));
        }
        // FILTER selects classes, EFILTER declared exception types.
        const std::regex filter(impl->config.filter);
        const std::regex efilter(impl->config.efilter);
        std::vector<agent::InjectionPoint> points;
        for (const auto& p : impl->profile.points) {
            if (!std::regex_match(p.class_name, filter) || !std::regex_match(p.exception_type, efilter)) {
                continue;
            }
            impl->instrumented.push_back(p);
            impl->windows.emplace(p.key, std::make_unique<Impl::Window>());
            points.push_back({p.key, p.class_name, p.method_name, p.exception_type, false, impl->config.countdown});
        }
        impl->registry = std::make_unique<agent::PointRegistry>(points, impl->config, impl->options.seed);
        auto active = impl->options.env.find(std::string(agent::kActivePointsVar));
        if (active != impl->options.env.end()) {
            for (const auto& key : agent::parse_active_points(active->second)) {
                impl->registry->set_active(key, true);
            }
        }
        impl->injection_enabled = impl->config.mode == "throw_e";
        if (!impl->injection_enabled) {
            impl->log("[POBS-FI] unsupported mode=" + impl->config.mode);
        }

        auto csv_path = std::filesystem::path(impl->config.csv_path);
        if (csv_path.is_absolute() && !impl->options.root.empty()) {
            csv_path = impl->options.root / csv_path.relative_path();
        } else if (csv_path.is_relative() && !impl->options.workdir.empty()) {
            csv_path = impl->options.workdir / csv_path;
        }
        std::error_code ec;
        if (csv_path.has_parent_path()) {
            std::filesystem::create_directories(csv_path.parent_path(), ec);
        }
        std::ofstream csv(csv_path, std::ios::binary);
        csv << agent::write_points_csv(points);
        for (const auto& p : points) {
            impl->log(agent::format_log_line({impl->start_ms, agent::LogEventKind::PointRegistered, p.key}));
        }
    }

    Impl* self = impl.get();
    impl->app_thread = std::thread([self] { self->app_server.listen_after_bind(); });
    if (impl->attached) {
        impl->metrics_thread = std::thread([self] { self->metrics_server.listen_after_bind(); });
    }
    impl->app_server.wait_until_ready();
    if (impl->attached) {
        impl->metrics_server.wait_until_ready();
    }
    if (impl->profile.exit_after_ms) {
        impl->watcher = std::thread([self] {
            while (!self->stopped.load()) {
                if (!self->alive()) {
                    self->log("[" + self->profile.app_name + "] exited");
                    self->shutdown();
                    break;
                }
                std::this_thread::sleep_for(std::chrono::milliseconds(5));
            }
        });
    }
    return std::unique_ptr<TargetSimulator>(new TargetSimulator(std::move(impl)));
}

TargetSimulator::~TargetSimulator() {
    stop();
}

void TargetSimulator::stop() {
    if (!impl_) {
        return;
    }
    impl_->shutdown();
    for (auto* t : {&impl_->app_thread, &impl_->metrics_thread, &impl_->watcher}) {
        if (t->joinable() && t->get_id() != std::this_thread::get_id()) {
            t->join();
        }
    }
}

bool TargetSimulator::running() const {
    return impl_->alive();
}

int TargetSimulator::app_port() const {
    return impl_->app_port;
}

int TargetSimulator::metrics_port() const {
    return impl_->metrics_port;
}

bool TargetSimulator::attached() const {
    return impl_->attached;
}

std::int64_t TargetSimulator::started_at_ms() const {
    return impl_->start_ms;
}

std::string TargetSimulator::logs() const {
    std::lock_guard lock(impl_->log_mutex);
    std::string out;
    for (const auto& line : impl_->log_lines) {
        out += line;
        out += '\n';
    }
    return out;
}

ResourceSample TargetSimulator::sample_resources() {
    const auto n = impl_->resource_samples.fetch_add(1);
    const auto& p = impl_->profile;
    const double cpu = p.cpu_fraction + (impl_->attached ? p.agent_cpu_delta : 0.0);
    const double mem = (p.memory_mb + (impl_->attached ? p.agent_memory_mb : 0.0)) * 1e6;
    const double z_cpu = standard_normal(impl_->options.seed ^ agent::mix64(0xc0ffeeULL + n));
    const double z_mem = standard_normal(impl_->options.seed ^ agent::mix64(0xbeefULL + n));
    return {std::max(0.0, cpu * (1.0 + p.noise_rel * z_cpu)), std::max(0.0, mem * (1.0 + p.noise_rel * z_mem))};
}

impact::MetricSeries TargetSimulator::query_metric(const std::string& metric, std::int64_t start_ms,
                                                   std::int64_t end_ms) const {
    return impl_->query(metric, start_ms, end_ms);
}

const agent::PointRegistry* TargetSimulator::registry() const {
    return impl_->registry.get();
}

} // namespace pobs::sim
