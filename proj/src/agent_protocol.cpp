#include "pobs/agent_protocol.hpp"

#include <charconv>
#include <cmath>
#include <regex>

#include "pobs/error.hpp"

namespace pobs::agent {

namespace {

std::string format_double(double value) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, end);
}

std::string_view trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) {
        return {};
    }
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

template <class T>
std::optional<T> parse_number(std::string_view text) {
    text = trim(text);
    T value{};
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
        return std::nullopt;
    }
    return value;
}

void check_regex(const std::string& pattern, const char* name) {
    try {
        std::regex re(pattern);
    } catch (const std::regex_error&) {
        throw Error(ErrorCode::InvalidFilter, std::string(name) + " is not a valid regex: " + pattern);
    }
}

// Splits one CSV record. Supports double-quoted fields with "" escapes.
std::optional<std::vector<std::string>> split_csv(std::string_view line) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    bool was_quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"' && field.empty() && !was_quoted) {
            quoted = true;
            was_quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
            was_quoted = false;
        } else {
            field += c;
        }
    }
    if (quoted) {
        return std::nullopt;
    }
    fields.push_back(std::move(field));
    return fields;
}

std::string csv_field(const std::string& value) {
    if (value.find_first_of(",\"\n\r") == std::string::npos) {
        return value;
    }
    std::string out = "\"";
    for (char c : value) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    return out + "\"";
}

} // namespace

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t hash_string(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

void validate(const FiConfig& config) {
    if (!(config.rate >= 0.0 && config.rate <= 1.0)) {
        throw Error(ErrorCode::InvalidRate, "RATE must lie in [0,1], got " + format_double(config.rate));
    }
    if (config.countdown < kUnlimited) {
        throw Error(ErrorCode::InvalidCountdown, "COUNTDOWN must be >= -1, got " + std::to_string(config.countdown));
    }
    if (config.inject_position < 0) {
        throw Error(ErrorCode::InvalidInjectPosition,
                    "INJECTPOSITION must be >= 0, got " + std::to_string(config.inject_position));
    }
    check_regex(config.filter, "FILTER");
    check_regex(config.efilter, "EFILTER");
}

EnvPairs to_env(const FiConfig& config) {
    return {
        {"FILTER", config.filter},
        {"EFILTER", config.efilter},
        {"RATE", format_double(config.rate)},
        {"MODE", config.mode},
        {"INJECTPOSITION", std::to_string(config.inject_position)},
        {"DEFAULTMODE", config.default_mode == DefaultMode::On ? "on" : "off"},
        {"CSVPATH", config.csv_path},
        {"COUNTDOWN", std::to_string(config.countdown)},
    };
}

FiConfig parse_env(const std::map<std::string, std::string>& env) {
    FiConfig config;
    auto get = [&](const char* name) -> const std::string* {
        auto it = env.find(name);
        return it == env.end() ? nullptr : &it->second;
    };
    if (auto v = get("FILTER")) config.filter = *v;
    if (auto v = get("EFILTER")) config.efilter = *v;
    if (auto v = get("RATE")) {
        auto rate = parse_number<double>(*v);
        if (!rate) {
            throw Error(ErrorCode::InvalidRate, "RATE is not a number: '" + *v + "'");
        }
        config.rate = *rate;
    }
    if (auto v = get("MODE")) config.mode = *v;
    if (auto v = get("INJECTPOSITION")) {
        auto position = parse_number<int>(*v);
        if (!position) {
            throw Error(ErrorCode::InvalidInjectPosition, "INJECTPOSITION is not an integer: '" + *v + "'");
        }
        config.inject_position = *position;
    }
    if (auto v = get("DEFAULTMODE")) {
        auto value = trim(*v);
        if (value == "on") {
            config.default_mode = DefaultMode::On;
        } else if (value == "off") {
            config.default_mode = DefaultMode::Off;
        } else {
            throw Error(ErrorCode::InvalidDefaultMode, "DEFAULTMODE must be on|off, got '" + *v + "'");
        }
    }
    if (auto v = get("CSVPATH")) config.csv_path = *v;
    if (auto v = get("COUNTDOWN")) {
        auto countdown = parse_number<int>(*v);
        if (!countdown) {
            throw Error(ErrorCode::InvalidCountdown, "COUNTDOWN is not an integer: '" + *v + "'");
        }
        config.countdown = *countdown;
    }
    validate(config);
    return config;
}

FiConfig parse_env(const EnvPairs& pairs) {
    // Later assignments win, as with repeated `-e` flags.
    std::map<std::string, std::string> env;
    for (const auto& [name, value] : pairs) {
        env[name] = value;
    }
    return parse_env(env);
}

std::vector<std::string> parse_active_points(std::string_view value) {
    std::vector<std::string> keys;
    while (!value.empty()) {
        auto comma = value.find(',');
        auto key = trim(value.substr(0, comma));
        if (!key.empty()) {
            keys.emplace_back(key);
        }
        if (comma == std::string_view::npos) {
            break;
        }
        value.remove_prefix(comma + 1);
    }
    return keys;
}

std::vector<InjectionPoint> parse_points_csv(std::string_view text, int countdown) {
    std::vector<InjectionPoint> points;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (!text.empty()) {
        auto nl = text.find('\n');
        auto line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        if (trim(line).empty()) {
            continue;
        }
        if (!header_seen) {
            if (trim(line) != kPointsCsvHeader) {
                throw RowError(line_no, "expected header '" + std::string(kPointsCsvHeader) + "'");
            }
            header_seen = true;
            continue;
        }
        auto fields = split_csv(line);
        if (!fields || fields->size() != 4) {
            throw RowError(line_no, "expected 4 fields");
        }
        if ((*fields)[0].empty()) {
            throw RowError(line_no, "empty key");
        }
        for (const auto& existing : points) {
            if (existing.key == (*fields)[0]) {
                throw RowError(line_no, "duplicate key '" + existing.key + "'");
            }
        }
        InjectionPoint point;
        point.key = (*fields)[0];
        point.class_name = (*fields)[1];
        point.method_name = (*fields)[2];
        point.exception_type = (*fields)[3];
        point.remaining = countdown;
        points.push_back(std::move(point));
    }
    if (!header_seen) {
        throw RowError(1, "missing header");
    }
    return points;
}

std::string write_points_csv(const std::vector<InjectionPoint>& points) {
    std::string out(kPointsCsvHeader);
    out += '\n';
    for (const auto& p : points) {
        out += csv_field(p.key) + ',' + csv_field(p.class_name) + ',' + csv_field(p.method_name) + ',' +
               csv_field(p.exception_type) + '\n';
    }
    return out;
}

PointRegistry::PointRegistry(const std::vector<InjectionPoint>& points, FiConfig config, std::uint64_t seed)
    : config_(std::move(config)), seed_(seed) {
    validate(config_);
    for (const auto& p : points) {
        auto slot = std::make_unique<Slot>();
        slot->point = p;
        slot->key_hash = hash_string(p.key);
        slot->active = p.active;
        slot->remaining = config_.countdown;
        slots_.push_back(std::move(slot));
    }
}

PointRegistry::Slot* PointRegistry::find(std::string_view key) {
    for (auto& slot : slots_) {
        if (slot->point.key == key) {
            return slot.get();
        }
    }
    return nullptr;
}

const PointRegistry::Slot* PointRegistry::find(std::string_view key) const {
    return const_cast<PointRegistry*>(this)->find(key);
}

bool PointRegistry::reach(std::string_view key) {
    Slot* slot = find(key);
    if (!slot) {
        return false;
    }
    const std::uint64_t n = slot->invocations.fetch_add(1);
    if (!slot->active.load() && config_.default_mode != DefaultMode::On) {
        return false;
    }
    const double draw = unit_interval(mix64(seed_ ^ mix64(slot->key_hash + n)));
    if (!(draw < config_.rate)) {
        return false;
    }
    int remaining = slot->remaining.load();
    while (true) {
        if (remaining == 0) {
            return false;
        }
        if (remaining == kUnlimited) {
            break;
        }
        if (slot->remaining.compare_exchange_weak(remaining, remaining - 1)) {
            break;
        }
    }
    slot->injections.fetch_add(1);
    return true;
}

void PointRegistry::set_active(std::string_view key, bool active) {
    if (Slot* slot = find(key)) {
        slot->active = active;
    }
}

bool PointRegistry::contains(std::string_view key) const {
    return find(key) != nullptr;
}

std::uint64_t PointRegistry::invocations(std::string_view key) const {
    const Slot* slot = find(key);
    return slot ? slot->invocations.load() : 0;
}

std::uint64_t PointRegistry::injections(std::string_view key) const {
    const Slot* slot = find(key);
    return slot ? slot->injections.load() : 0;
}

std::vector<InjectionPoint> PointRegistry::snapshot() const {
    std::vector<InjectionPoint> out;
    for (const auto& slot : slots_) {
        InjectionPoint p = slot->point;
        p.active = slot->active.load();
        p.remaining = slot->remaining.load();
        out.push_back(std::move(p));
    }
    return out;
}

std::string format_log_line(const AgentLogEvent& event) {
    switch (event.kind) {
    case LogEventKind::ObservabilityAttached: return "[POBS-OBS] attached";
    case LogEventKind::FaultInjectorAttached: return "[POBS-FI] attached";
    case LogEventKind::ExceptionInjected: return "[POBS-FI] injected key=" + event.point_key.value_or("");
    case LogEventKind::PointRegistered: return "[POBS-FI] registered key=" + event.point_key.value_or("");
    }
    return {};
}

std::optional<AgentLogEvent> parse_log_line(std::string_view line) {
    if (!line.empty() && line.back() == '\r') {
        line.remove_suffix(1);
    }
    auto take_key = [](std::string_view rest) -> std::optional<std::string> {
        constexpr std::string_view prefix = "key=";
        if (!rest.starts_with(prefix) || rest.size() == prefix.size()) {
            return std::nullopt;
        }
        return std::string(trim(rest.substr(prefix.size())));
    };
    if (auto pos = line.find("[POBS-OBS] attached"); pos != std::string_view::npos) {
        return AgentLogEvent{0, LogEventKind::ObservabilityAttached, std::nullopt};
    }
    auto pos = line.find("[POBS-FI] ");
    if (pos == std::string_view::npos) {
        return std::nullopt;
    }
    auto rest = line.substr(pos + 10);
    if (rest == "attached") {
        return AgentLogEvent{0, LogEventKind::FaultInjectorAttached, std::nullopt};
    }
    if (rest.starts_with("injected ")) {
        if (auto key = take_key(rest.substr(9))) {
            return AgentLogEvent{0, LogEventKind::ExceptionInjected, key};
        }
    } else if (rest.starts_with("registered ")) {
        if (auto key = take_key(rest.substr(11))) {
            return AgentLogEvent{0, LogEventKind::PointRegistered, key};
        }
    }
    return std::nullopt;
}

std::vector<AgentLogEvent> parse_log(std::string_view text) {
    std::vector<AgentLogEvent> events;
    while (!text.empty()) {
        auto nl = text.find('\n');
        if (auto event = parse_log_line(text.substr(0, nl))) {
            events.push_back(std::move(*event));
        }
        if (nl == std::string_view::npos) {
            break;
        }
        text.remove_prefix(nl + 1);
    }
    return events;
}

} // namespace pobs::agent
