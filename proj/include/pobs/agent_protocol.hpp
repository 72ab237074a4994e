#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace pobs::agent {

/// COUNTDOWN value meaning "keep injecting every time the point is reached".
inline constexpr int kUnlimited = -1;

/// Supplementary variable listing the point keys to activate (comma-separated).
inline constexpr std::string_view kActivePointsVar = "POBS_ACTIVE_POINTS";

enum class DefaultMode { Off, On };

/// Fault-injection options, one per environment variable. Defaults are the
/// documented defaults of the fault injection module.
struct FiConfig {
    std::string filter = ".*";
    std::string efilter = ".*";
    double rate = 1.0;
    std::string mode = "throw_e";
    int inject_position = 0;
    DefaultMode default_mode = DefaultMode::Off;
    std::string csv_path = "logs/perturbationPointsList.csv";
    int countdown = 1;

    friend bool operator==(const FiConfig&, const FiConfig&) = default;
};

using EnvPairs = std::vector<std::pair<std::string, std::string>>;

/// Throws the matching Error code when a field is out of range.
void validate(const FiConfig& config);

/// Exactly 8 pairs: FILTER, EFILTER, RATE, MODE, INJECTPOSITION, DEFAULTMODE, CSVPATH, COUNTDOWN.
EnvPairs to_env(const FiConfig& config);

/// Missing names take defaults; unknown names are ignored.
FiConfig parse_env(const EnvPairs& pairs);
FiConfig parse_env(const std::map<std::string, std::string>& env);

std::vector<std::string> parse_active_points(std::string_view value);

struct InjectionPoint {
    std::string key;
    std::string class_name;
    std::string method_name;
    std::string exception_type;
    bool active = false;
    /// Injections left; kUnlimited never decrements.
    int remaining = 1;

    friend bool operator==(const InjectionPoint&, const InjectionPoint&) = default;
};

inline constexpr std::string_view kPointsCsvHeader = "key,className,methodName,exceptionType";

/// Throws RowError with the 1-based line number of a malformed row.
std::vector<InjectionPoint> parse_points_csv(std::string_view text, int countdown = 1);
std::string write_points_csv(const std::vector<InjectionPoint>& points);

/// Maps 64 random bits to a double in [0, 1).
inline double unit_interval(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Decides whether a reached point throws. On true the countdown is consumed.
template <class Rng>
bool should_inject(InjectionPoint& point, const FiConfig& config, Rng& rng) {
    if (!point.active && config.default_mode != DefaultMode::On) {
        return false;
    }
    if (point.remaining == 0) {
        return false;
    }
    if (!(unit_interval(static_cast<std::uint64_t>(rng())) < config.rate)) {
        return false;
    }
    if (point.remaining != kUnlimited) {
        --point.remaining;
    }
    return true;
}

/// Thread-safe registry of injection points with per-point atomic countdown.
/// Draws come from a counter-based generator keyed by (seed, point, invocation),
/// so the outcome of the n-th invocation of a point does not depend on thread
/// interleaving.
class PointRegistry {
public:
    PointRegistry(const std::vector<InjectionPoint>& points, FiConfig config, std::uint64_t seed);

    /// Records an invocation of `key` and returns true when an exception is injected.
    /// Unknown keys never inject.
    bool reach(std::string_view key);

    void set_active(std::string_view key, bool active);
    bool contains(std::string_view key) const;
    std::uint64_t invocations(std::string_view key) const;
    std::uint64_t injections(std::string_view key) const;
    const FiConfig& config() const noexcept { return config_; }

    /// Current state of every point, in registration order.
    std::vector<InjectionPoint> snapshot() const;

private:
    struct Slot {
        InjectionPoint point;
        std::uint64_t key_hash = 0;
        std::atomic<bool> active{false};
        std::atomic<int> remaining{0};
        std::atomic<std::uint64_t> invocations{0};
        std::atomic<std::uint64_t> injections{0};
    };

    Slot* find(std::string_view key);
    const Slot* find(std::string_view key) const;

    FiConfig config_;
    std::uint64_t seed_;
    std::vector<std::unique_ptr<Slot>> slots_;
};

enum class LogEventKind { ObservabilityAttached, FaultInjectorAttached, ExceptionInjected, PointRegistered };

struct AgentLogEvent {
    std::int64_t timestamp_ms = 0;
    LogEventKind kind = LogEventKind::ObservabilityAttached;
    std::optional<std::string> point_key;

    friend bool operator==(const AgentLogEvent&, const AgentLogEvent&) = default;
};

/// `[POBS-OBS] attached`, `[POBS-FI] attached`, `[POBS-FI] injected key=<k>`,
/// `[POBS-FI] registered key=<k>`.
std::string format_log_line(const AgentLogEvent& event);

/// Recognizes a tagged line anywhere in `line` (container runtimes may prefix output).
std::optional<AgentLogEvent> parse_log_line(std::string_view line);
std::vector<AgentLogEvent> parse_log(std::string_view text);

/// splitmix64 finalizer, used for counter-based draws.
std::uint64_t mix64(std::uint64_t x);
std::uint64_t hash_string(std::string_view s);

} // namespace pobs::agent
