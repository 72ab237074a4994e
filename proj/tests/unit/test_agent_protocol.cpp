#include <doctest.h>

#include <cmath>
#include <random>
#include <thread>

#include "pobs/agent_protocol.hpp"
#include "pobs/error.hpp"

using namespace pobs;
using namespace pobs::agent;

namespace {

std::vector<InjectionPoint> three_points() {
    return {
        {"a/B.c", "a.B", "c", "java.io.IOException", true, 1},
        {"a/B.d", "a.B", "d", "java.lang.IllegalStateException", false, 1},
        {"x/Y.z", "x.Y", "z", "java.net.SocketException", false, 1},
    };
}

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::InvalidArgument;
}

} // namespace

TEST_CASE("defaults and the environment contract") {
    FiConfig defaults;
    auto env = to_env(defaults);
    REQUIRE(env.size() == 8);
    const std::vector<std::string> names = {"FILTER", "EFILTER", "RATE", "MODE",
                                            "INJECTPOSITION", "DEFAULTMODE", "CSVPATH", "COUNTDOWN"};
    for (std::size_t i = 0; i < names.size(); ++i) {
        CHECK(env[i].first == names[i]);
    }
    CHECK(parse_env(EnvPairs{}) == defaults);
    CHECK(parse_env(EnvPairs{{"UNRELATED", "1"}, {"RATE", "0.5"}, {"RATE", "0.25"}}).rate == 0.25);
    CHECK(parse_env(EnvPairs{{"DEFAULTMODE", "on"}}).default_mode == DefaultMode::On);
}

TEST_CASE("random configurations survive the environment round trip") {
    std::mt19937_64 rng(11);
    const std::vector<std::string> filters = {".*", "com\\.acme\\..*", "Order.*|Audit.*", "x"};
    for (int i = 0; i < 100; ++i) {
        FiConfig c;
        c.filter = filters[rng() % filters.size()];
        c.efilter = filters[rng() % filters.size()];
        c.rate = static_cast<double>(rng() % 1001) / 1000.0;
        if (rng() % 5 == 0) {
            c.rate = unit_interval(rng());
        }
        c.mode = rng() % 2 ? "throw_e" : "timeout";
        c.inject_position = static_cast<int>(rng() % 5);
        c.default_mode = rng() % 2 ? DefaultMode::On : DefaultMode::Off;
        c.csv_path = "/home/logs/p" + std::to_string(i) + ".csv";
        c.countdown = static_cast<int>(rng() % 7) - 1;
        CAPTURE(c.rate);
        CHECK(parse_env(to_env(c)) == c);
    }
}

TEST_CASE("invalid values are rejected") {
    CHECK(code_of([] { parse_env(EnvPairs{{"RATE", "1.5"}}); }) == ErrorCode::InvalidRate);
    CHECK(code_of([] { parse_env(EnvPairs{{"RATE", "abc"}}); }) == ErrorCode::InvalidRate);
    CHECK(code_of([] { parse_env(EnvPairs{{"COUNTDOWN", "-2"}}); }) == ErrorCode::InvalidCountdown);
    CHECK(code_of([] { parse_env(EnvPairs{{"INJECTPOSITION", "-1"}}); }) == ErrorCode::InvalidInjectPosition);
    CHECK(code_of([] { parse_env(EnvPairs{{"DEFAULTMODE", "maybe"}}); }) == ErrorCode::InvalidDefaultMode);
    CHECK(code_of([] { parse_env(EnvPairs{{"FILTER", "("}}); }) == ErrorCode::InvalidFilter);
}

TEST_CASE("countdown limits injections per point") {
    FiConfig config;
    config.countdown = 2;
    PointRegistry registry(three_points(), config, 5);
    int thrown = 0;
    for (int i = 0; i < 10; ++i) {
        thrown += registry.reach("a/B.c") ? 1 : 0;
    }
    CHECK(thrown == 2);
    CHECK(registry.invocations("a/B.c") == 10);
    CHECK(registry.injections("a/B.c") == 2);
    // Inactive points never fire while DEFAULTMODE is off.
    CHECK_FALSE(registry.reach("a/B.d"));
    CHECK_FALSE(registry.reach("unknown"));
    registry.set_active("a/B.d", true);
    CHECK(registry.reach("a/B.d"));
}

TEST_CASE("unlimited countdown with DEFAULTMODE on") {
    FiConfig config;
    config.countdown = kUnlimited;
    config.default_mode = DefaultMode::On;
    PointRegistry registry(three_points(), config, 5);
    for (int i = 0; i < 50; ++i) {
        CHECK(registry.reach("x/Y.z"));
    }
    CHECK(registry.snapshot()[2].remaining == kUnlimited);
}

TEST_CASE("rate zero never injects") {
    FiConfig config;
    config.rate = 0.0;
    config.countdown = kUnlimited;
    PointRegistry registry(three_points(), config, 1);
    for (int i = 0; i < 1000; ++i) {
        CHECK_FALSE(registry.reach("a/B.c"));
    }
}

TEST_CASE("injection frequency tracks the rate") {
    FiConfig config;
    config.rate = 0.3;
    config.countdown = kUnlimited;
    const int n = 3000;
    const double sigma = std::sqrt(n * 0.3 * 0.7);
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        PointRegistry registry(three_points(), config, seed);
        int thrown = 0;
        for (int i = 0; i < n; ++i) {
            thrown += registry.reach("a/B.c") ? 1 : 0;
        }
        CAPTURE(seed);
        CHECK(std::abs(thrown - n * 0.3) < 3.0 * sigma);
    }

    std::mt19937_64 rng(3);
    InjectionPoint point{"k", "C", "m", "E", true, kUnlimited};
    int thrown = 0;
    for (int i = 0; i < n; ++i) {
        thrown += should_inject(point, config, rng) ? 1 : 0;
    }
    CHECK(std::abs(thrown - n * 0.3) < 3.0 * sigma);
}

TEST_CASE("concurrent reaches never exceed the countdown") {
    FiConfig config;
    config.countdown = 25;
    PointRegistry registry(three_points(), config, 9);
    std::atomic<int> thrown{0};
    std::vector<std::thread> threads;
    for (int t = 0; t < 4; ++t) {
        threads.emplace_back([&] {
            for (int i = 0; i < 500; ++i) {
                if (registry.reach("a/B.c")) {
                    ++thrown;
                }
            }
        });
    }
    for (auto& th : threads) {
        th.join();
    }
    CHECK(thrown == 25);
    CHECK(registry.invocations("a/B.c") == 2000);
    CHECK(registry.snapshot()[0].remaining == 0);
}

TEST_CASE("points csv") {
    auto points = three_points();
    points.push_back({"q/\"Quoted\",Key", "q.Quoted", "run", "E", false, 1});
    auto text = write_points_csv(points);
    CHECK(text.starts_with(std::string(kPointsCsvHeader) + "\n"));
    auto parsed = parse_points_csv(text);
    REQUIRE(parsed.size() == points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        CHECK(parsed[i].key == points[i].key);
        CHECK(parsed[i].class_name == points[i].class_name);
        CHECK(parsed[i].method_name == points[i].method_name);
        CHECK(parsed[i].exception_type == points[i].exception_type);
        CHECK_FALSE(parsed[i].active);
    }
    CHECK(parse_points_csv(text, 4)[0].remaining == 4);

    auto row_of = [](std::string_view bad) -> std::size_t {
        try {
            parse_points_csv(bad);
        } catch (const RowError& e) {
            return e.line();
        }
        return 0;
    };
    CHECK(row_of("key,className,methodName,exceptionType\na,b,c,d\nbroken\n") == 3);
    CHECK(row_of("key,className,methodName,exceptionType\na,b,c,d\na,b,c,d\n") == 3);
    CHECK(row_of("nonsense\n") == 1);
    CHECK(row_of("") == 1);
    CHECK(parse_points_csv("key,className,methodName,exceptionType\r\na,b,c,d\r\n").size() == 1);
}

TEST_CASE("active point lists") {
    CHECK(parse_active_points("a, b,,c ") == std::vector<std::string>{"a", "b", "c"});
    CHECK(parse_active_points("").empty());
}

TEST_CASE("log lines") {
    const std::vector<AgentLogEvent> events = {
        {0, LogEventKind::ObservabilityAttached, std::nullopt},
        {0, LogEventKind::FaultInjectorAttached, std::nullopt},
        {0, LogEventKind::ExceptionInjected, "a/B.c"},
        {0, LogEventKind::PointRegistered, "x/Y.z"},
    };
    std::string log;
    for (const auto& e : events) {
        auto line = format_log_line(e);
        auto parsed = parse_log_line(line);
        REQUIRE(parsed);
        CHECK(*parsed == e);
        log += "2024-01-01T00:00:00Z " + line + "\r\n" + "app noise\n";
    }
    CHECK(parse_log(log) == events);
    CHECK_FALSE(parse_log_line("[POBS-FI] injected key="));
    CHECK_FALSE(parse_log_line("plain output"));
}
