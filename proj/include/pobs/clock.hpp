#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <thread>

namespace pobs {

/// Millisecond wall clock used by the simulator and the orchestrator. Tests
/// substitute ManualClock so experiments of several minutes run instantly.
class Clock {
public:
    virtual ~Clock() = default;
    virtual std::int64_t now_ms() const = 0;
    /// Finer reading for latency measurement; same epoch as now_ms.
    virtual std::int64_t now_us() const { return now_ms() * 1000; }
    virtual void sleep_for_ms(std::int64_t ms) = 0;

    void sleep_until_ms(std::int64_t deadline) {
        auto now = now_ms();
        if (deadline > now) {
            sleep_for_ms(deadline - now);
        }
    }
};

class SystemClock final : public Clock {
public:
    std::int64_t now_ms() const override {
        using namespace std::chrono;
        return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
    }
    std::int64_t now_us() const override {
        using namespace std::chrono;
        return duration_cast<microseconds>(system_clock::now().time_since_epoch()).count();
    }
    void sleep_for_ms(std::int64_t ms) override {
        if (ms > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(ms));
        }
    }
};

/// Virtual time: sleeping advances the clock immediately.
class ManualClock final : public Clock {
public:
    explicit ManualClock(std::int64_t start_ms = 1'600'000'000'000) : now_(start_ms) {}

    std::int64_t now_ms() const override { return now_.load(); }
    void sleep_for_ms(std::int64_t ms) override {
        if (ms > 0) {
            now_.fetch_add(ms);
        }
    }
    void advance_ms(std::int64_t ms) { sleep_for_ms(ms); }

private:
    std::atomic<std::int64_t> now_;
};

} // namespace pobs
