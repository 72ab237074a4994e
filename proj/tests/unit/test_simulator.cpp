#include <doctest.h>

#include <algorithm>
#include <set>
#include <thread>

#include <json.hpp>

#include "pobs/agent_protocol.hpp"
#include "pobs/error.hpp"
#include "pobs/http.hpp"
#include "pobs/metrics_client.hpp"
#include "pobs/simulator.hpp"
#include "support.hpp"

using namespace pobs;
using namespace pobs::sim;

namespace {

constexpr const char* kActivate = "o/s/core/WorkerPool.activateObject";

struct Started {
    std::shared_ptr<ManualClock> clock = std::make_shared<ManualClock>();
    testing::TempDir dir;
    std::unique_ptr<TargetSimulator> sim;

    explicit Started(std::map<std::string, std::string> env, SimulatorProfile profile = testing::shop_profile()) {
        SimulatorOptions options;
        options.env = std::move(env);
        options.clock = clock;
        options.workdir = dir.path();
        options.seed = 3;
        sim = TargetSimulator::start(std::move(profile), std::move(options));
    }

    http::Response get(const std::string& path = "/api/orders") {
        return http::request("127.0.0.1", sim->app_port(), "GET", path);
    }
};

std::map<std::string, std::string> attached_env(std::map<std::string, std::string> extra = {}) {
    std::map<std::string, std::string> env = {{"FI_MODE", "throw_e"}};
    env.insert(extra.begin(), extra.end());
    return env;
}

} // namespace

TEST_CASE("profile documents round-trip") {
    auto profile = testing::shop_profile();
    auto back = parse_profile(to_json(profile));
    CHECK(back.app_name == "shop");
    CHECK(back.points.size() == 4);
    CHECK(back.endpoints.size() == 2);
    CHECK(back.points[1].metric_shift == doctest::Approx(-0.6239));
    CHECK(to_json(back) == to_json(profile));
    CHECK_THROWS_AS(parse_profile(R"({"endpoints": [{"path": "/x", "points": ["missing"]}]})"), Error);
    CHECK_THROWS_AS(parse_profile(R"({"sample_interval_ms": 0})"), Error);
}

TEST_CASE("metric categories") {
    CHECK(category_of("os.cpu.system_load") == MetricCategory::Os);
    CHECK(category_of("jvm.heap.used") == MetricCategory::Jvm);
    CHECK(category_of("http.response.time") == MetricCategory::Library);
    CHECK(category_of("db.pool.active") == MetricCategory::Library);
    CHECK(category_of("app.orders.count") == MetricCategory::Application);
    CHECK_FALSE(category_of("unprefixed"));
    std::set<MetricCategory> seen;
    for (const auto& [name, level] : default_metric_levels()) {
        seen.insert(*category_of(name));
    }
    CHECK(seen.size() >= 3);
}

TEST_CASE("a plain image serves requests without agents") {
    Started s({});
    CHECK_FALSE(s.sim->attached());
    CHECK(s.sim->metrics_port() == 0);
    CHECK(s.sim->registry() == nullptr);
    auto r = s.get();
    CHECK(r.status == 200);
    CHECK(r.body == "{\"orders\": [1, 2, 3]}");
    CHECK(s.get("/nope").status == 404);
    CHECK(agent::parse_log(s.sim->logs()).empty());
    CHECK_THROWS_AS(s.sim->query_metric("jvm.cpu.load", 0, s.clock->now_ms()), Error);
}

TEST_CASE("attached agents register points and inject on activation") {
    Started s(attached_env({{"COUNTDOWN", "-1"}, {std::string(agent::kActivePointsVar), kActivate}}));
    REQUIRE(s.sim->attached());
    auto events = agent::parse_log(s.sim->logs());
    REQUIRE(events.size() == 6);
    CHECK(events[0].kind == agent::LogEventKind::ObservabilityAttached);
    CHECK(events[1].kind == agent::LogEventKind::FaultInjectorAttached);

    auto csv = agent::parse_points_csv(testing::read_file(s.dir.path() / "logs/perturbationPointsList.csv"));
    CHECK(csv.size() == 4);

    const auto t0 = s.clock->now_ms();
    for (int i = 0; i < 5; ++i) {
        auto r = s.get();
        CHECK(r.status == 500);
        auto body = nlohmann::json::parse(r.body);
        CHECK(body["point"] == kActivate);
        CHECK(body["error"] == "java/lang/Exception");
        s.clock->advance_ms(100);
    }
    // The agent adds its latency to every request.
    CHECK(s.clock->now_ms() - t0 == 5 * (100 + 10));
    CHECK(s.sim->registry()->injections(kActivate) == 5);
    CHECK(s.sim->registry()->injections("o/s/cache/OrderCache.evict") == 0);
    CHECK(http::request("127.0.0.1", s.sim->app_port(), "POST", "/api/orders", "{}").status == 200);

    auto injected = agent::parse_log(s.sim->logs());
    CHECK(std::count_if(injected.begin(), injected.end(), [](const auto& e) {
              return e.kind == agent::LogEventKind::ExceptionInjected && e.point_key == kActivate;
          }) == 5);
}

TEST_CASE("metrics are served over http") {
    auto profile = testing::shop_profile();
    profile.shift_hold_ms = 500;
    Started s(attached_env({{"COUNTDOWN", "-1"}}), profile);
    const auto start = s.sim->started_at_ms();
    s.clock->advance_ms(2000);
    CHECK(s.get().status == 200);
    s.clock->advance_ms(2000);

    metrics::Endpoint endpoint{"127.0.0.1", s.sim->metrics_port()};
    auto series = metrics::fetch_metrics(endpoint, "jvm.cpu.load", start, s.clock->now_ms());
    CHECK(series.samples.size() == 40);
    CHECK(series == s.sim->query_metric("jvm.cpu.load", start, s.clock->now_ms()));
    double sum = 0;
    for (const auto& v : series.values()) {
        sum += v;
    }
    CHECK(sum / 40.0 == doctest::Approx(0.2).epsilon(0.01));
    CHECK_THROWS_AS(metrics::fetch_metrics(endpoint, "no.such.metric", start, s.clock->now_ms()), Error);

    auto malformed = http::request("127.0.0.1", s.sim->metrics_port(), "POST", "/metrics/query", "{\"metric\": 1}");
    CHECK(malformed.status == 400);
}

TEST_CASE("shifted samples during continuous injection") {
    auto profile = testing::shop_profile();
    profile.shift_hold_ms = 0;
    Started s(attached_env({{"COUNTDOWN", "-1"}, {std::string(agent::kActivePointsVar), kActivate}}), profile);
    s.clock->advance_ms(1000);
    const auto first = s.clock->now_ms();
    for (int i = 0; i < 20; ++i) {
        s.get();
        s.clock->advance_ms(90);
    }
    const auto last_fire = first + 19 * 100 + 10;
    s.clock->advance_ms(1000);
    auto series = s.sim->query_metric("jvm.cpu.load", s.sim->started_at_ms(), s.clock->now_ms());
    double inside = 0, outside = 0;
    int n_in = 0, n_out = 0;
    for (const auto& sample : series.samples) {
        if (sample.timestamp_ms >= first + 10 && sample.timestamp_ms <= last_fire) {
            inside += sample.value;
            ++n_in;
        } else if (sample.timestamp_ms < first || sample.timestamp_ms > last_fire) {
            outside += sample.value;
            ++n_out;
        }
    }
    REQUIRE(n_in > 10);
    REQUIRE(n_out > 10);
    CHECK(inside / n_in == doctest::Approx(0.2 * (1.0 - 0.6239)).epsilon(0.02));
    CHECK(outside / n_out == doctest::Approx(0.2).epsilon(0.02));
}

TEST_CASE("filters restrict the instrumented points") {
    Started s(attached_env({{"FILTER", "o/s/web/.*"}, {"DEFAULTMODE", "on"}, {"COUNTDOWN", "-1"}}));
    auto csv = agent::parse_points_csv(testing::read_file(s.dir.path() / "logs/perturbationPointsList.csv"));
    REQUIRE(csv.size() == 1);
    CHECK(csv[0].key == "o/s/web/AuditFilter.doFilter");
    auto body = nlohmann::json::parse(s.get().body);
    CHECK(body["point"] == "o/s/web/AuditFilter.doFilter");

    Started e(attached_env({{"EFILTER", "java/io/.*"}}));
    auto csv2 = agent::parse_points_csv(testing::read_file(e.dir.path() / "logs/perturbationPointsList.csv"));
    CHECK(csv2.size() == 2);
}

TEST_CASE("unsupported modes and invalid options") {
    Started s(attached_env({{"MODE", "timeout"}, {"DEFAULTMODE", "on"}}));
    CHECK(s.sim->logs().find("[POBS-FI] unsupported mode=timeout") != std::string::npos);
    CHECK(s.get().status == 200);

    SimulatorOptions bad;
    bad.env = attached_env({{"RATE", "2"}});
    bad.clock = std::make_shared<ManualClock>();
    try {
        TargetSimulator::start(testing::shop_profile(), bad);
        FAIL("expected a startup error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::StartupError);
    }
}

TEST_CASE("library metrics can be absent") {
    auto profile = testing::shop_profile();
    profile.library_metrics = false;
    Started s(attached_env(), profile);
    s.clock->advance_ms(1000);
    CHECK_THROWS_AS(s.sim->query_metric("http.response.time", 0, s.clock->now_ms()), Error);
    CHECK(s.sim->query_metric("jvm.heap.used", 0, s.clock->now_ms()).samples.size() == 10);
    auto listing = nlohmann::json::parse(http::request("127.0.0.1", s.sim->metrics_port(), "GET", "/metrics").body);
    CHECK(listing.dump().find("http.") == std::string::npos);
}

TEST_CASE("a process that exits on its own") {
    auto profile = testing::shop_profile();
    profile.exit_after_ms = 1000;
    Started s(attached_env(), profile);
    CHECK(s.sim->running());
    s.clock->advance_ms(1500);
    for (int i = 0; i < 200 && s.sim->logs().find("[shop] exited") == std::string::npos; ++i) {
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    CHECK_FALSE(s.sim->running());
    CHECK(s.sim->logs().find("[shop] exited") != std::string::npos);
    // Samples end with the process.
    auto series = s.sim->query_metric("jvm.cpu.load", 0, s.clock->now_ms());
    CHECK(series.samples.back().timestamp_ms <= s.sim->started_at_ms() + 1000);
}

TEST_CASE("resource samples include the agent overhead") {
    Started plain({});
    Started attached(attached_env());
    double cpu_plain = 0, cpu_attached = 0, mem_plain = 0, mem_attached = 0;
    for (int i = 0; i < 200; ++i) {
        auto a = plain.sim->sample_resources();
        auto b = attached.sim->sample_resources();
        cpu_plain += a.cpu_fraction;
        cpu_attached += b.cpu_fraction;
        mem_plain += a.memory_bytes;
        mem_attached += b.memory_bytes;
    }
    CHECK(cpu_plain / 200 == doctest::Approx(0.0334).epsilon(0.01));
    CHECK(cpu_attached / 200 == doctest::Approx(0.0491).epsilon(0.01));
    CHECK(mem_plain / 200 == doctest::Approx(3838e6).epsilon(0.01));
    CHECK(mem_attached / 200 == doctest::Approx(4038e6).epsilon(0.01));
}
