#pragma once

#include <functional>
#include <string>
#include <vector>

#include "pobs/runtime.hpp"

namespace pobs::runtime {

struct CommandResult {
    int exit_code = 0;
    std::string out;
    std::string err;
};

using CommandRunner = std::function<CommandResult(const std::vector<std::string>& argv)>;

/// Runs argv directly (no shell) and captures both streams.
CommandResult run_command(const std::vector<std::string>& argv);

/// Docker engine driven through its command-line client.
class DockerRuntime final : public ContainerRuntime {
public:
    explicit DockerRuntime(CommandRunner runner = run_command, std::string executable = "docker");

    static std::vector<std::string> build_argv(const std::string& executable, const std::string& tag,
                                               const std::string& dockerfile, const std::string& context);
    static std::vector<std::string> run_argv(const std::string& executable, const RunRequest& request);

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
    CommandResult exec(const std::vector<std::string>& argv);
    CommandResult checked(const std::vector<std::string>& argv);

    CommandRunner runner_;
    std::string executable_;
};

/// "512MiB", "1.5GB", "300kB" -> bytes. Throws Error(MalformedResponse).
double parse_byte_size(const std::string& text);

} // namespace pobs::runtime
