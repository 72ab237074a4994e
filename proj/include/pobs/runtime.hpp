#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace pobs::runtime {

struct BuildOutcome {
    bool ok = false;
    std::string image;
    std::string log;
};

struct RunRequest {
    std::string image;
    /// Passed as `-e NAME=VALUE`, in order.
    std::vector<std::pair<std::string, std::string>> env;
    /// Container ports to publish on free host ports.
    std::vector<int> ports;
};

struct ContainerHandle {
    std::string id;
    std::string host = "127.0.0.1";
    /// container port -> host port
    std::map<int, int> ports;

    std::optional<int> host_port(int container_port) const;
};

struct ContainerStats {
    double cpu_fraction = 0.0;
    double memory_bytes = 0.0;
};

/// Container engine seen by the orchestrator. Failures to talk to the engine
/// throw Error(RuntimeError); a failed build is a normal outcome.
class ContainerRuntime {
public:
    virtual ~ContainerRuntime() = default;

    virtual BuildOutcome build(const std::string& tag, const std::filesystem::path& dockerfile,
                               const std::filesystem::path& context) = 0;
    virtual ContainerHandle run(const RunRequest& request) = 0;
    virtual std::string logs(const ContainerHandle& handle) = 0;
    virtual bool running(const ContainerHandle& handle) = 0;
    virtual void stop(const ContainerHandle& handle) = 0;
    virtual std::optional<std::uint64_t> image_size(const std::string& image) = 0;
    virtual ContainerStats stats(const ContainerHandle& handle) = 0;
    /// Contents of a file inside the container, nullopt if absent.
    virtual std::optional<std::string> copy_from(const ContainerHandle& handle, const std::string& path) = 0;
};

/// `name` and `name:latest` denote the same image.
std::string normalize_image(const std::string& reference);

} // namespace pobs::runtime
