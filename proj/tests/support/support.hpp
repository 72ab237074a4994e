#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "pobs/augmentor.hpp"
#include "pobs/clock.hpp"
#include "pobs/fake_runtime.hpp"
#include "pobs/orchestrator.hpp"
#include "pobs/simulator.hpp"
#include "pobs/workload.hpp"

namespace pobs::testing {

std::filesystem::path fixtures();
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& content);

class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

/// Round-trip fixtures, sorted by name.
std::vector<std::filesystem::path> dockerfile_fixtures();

inline constexpr const char* kShopOriginal = "shop:1.0";
inline constexpr const char* kShopAugmented = "shop-pobs:1.0";
inline constexpr std::uint64_t kOpenJdkSize = 510'000'000;

sim::SimulatorProfile shop_profile();
workload::WorkloadSpec shop_workload();
orchestrator::ProbeSpec probe_spec();
augmentor::AugmentationPlan default_plan(const std::string& image = "openjdk:8-jdk");

/// A fake engine holding the base images, the augmented openjdk base and the
/// shop application in original and augmented form.
struct World {
    explicit World(std::shared_ptr<Clock> clock = std::make_shared<ManualClock>(), std::uint64_t seed = 7);

    /// Builds `tag` FROM the augmented base with `profile` as its application.
    void build_app(const std::string& tag, const sim::SimulatorProfile& profile,
                   const std::string& base = "openjdk-pobs:8-jdk");

    std::shared_ptr<Clock> clock;
    TempDir scratch;
    std::unique_ptr<runtime::FakeRuntime> runtime;
    orchestrator::ExperimentConfig config;
};

} // namespace pobs::testing
