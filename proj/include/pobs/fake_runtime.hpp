#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "pobs/clock.hpp"
#include "pobs/runtime.hpp"
#include "pobs/simulator.hpp"

namespace pobs::runtime {

struct FakeRuntimeOptions {
    std::shared_ptr<Clock> clock;
    /// Container k (0-based) runs its simulator with seed + k.
    std::uint64_t seed = 1;
    /// Holds container filesystems; a fresh temporary directory when empty.
    std::filesystem::path state_dir;
    /// Bytes each RUN layer adds to the image.
    std::uint64_t run_layer_bytes = 0;
};

/// In-process engine. Builds interpret the Dockerfile against registered base
/// images and the build context; containers are TargetSimulator instances
/// configured by a `*.simprofile.json` file copied into the image.
class FakeRuntime final : public ContainerRuntime {
public:
    explicit FakeRuntime(FakeRuntimeOptions options = {});
    ~FakeRuntime() override;

    void register_image(const std::string& reference, std::uint64_t size_bytes,
                        std::vector<std::pair<std::string, std::string>> env = {},
                        std::optional<sim::SimulatorProfile> profile = std::nullopt);
    bool has_image(const std::string& reference) const;
    std::vector<std::pair<std::string, std::string>> image_env(const std::string& reference) const;
    std::size_t containers_started() const;
    const std::shared_ptr<Clock>& clock() const { return clock_; }

    BuildOutcome build(const std::string& tag, const std::filesystem::path& dockerfile,
                       const std::filesystem::path& context) override;
    ContainerHandle run(const RunRequest& request) override;
    std::string logs(const ContainerHandle& handle) override;
    bool running(const ContainerHandle& handle) override;
    void stop(const ContainerHandle& handle) override;
    std::optional<std::uint64_t> image_size(const std::string& image) override;
    ContainerStats stats(const ContainerHandle& handle) override;
    std::optional<std::string> copy_from(const ContainerHandle& handle, const std::string& path) override;

private:
    struct Image {
        std::uint64_t size = 0;
        std::vector<std::pair<std::string, std::string>> env;
        std::optional<sim::SimulatorProfile> profile;
        std::string workdir = "/";
    };
    struct Container {
        std::unique_ptr<sim::TargetSimulator> simulator;
        std::filesystem::path root;
        std::string workdir;
    };

    Container& container(const ContainerHandle& handle);
    static void set_env(Image& image, const std::string& key, const std::string& value);

    FakeRuntimeOptions options_;
    std::shared_ptr<Clock> clock_;
    std::filesystem::path state_dir_;
    bool owns_state_dir_ = false;
    mutable std::mutex mutex_;
    std::map<std::string, Image> images_;
    std::map<std::string, Container> containers_;
    std::size_t started_ = 0;
};

} // namespace pobs::runtime
