#include "pobs/docker_runtime.hpp"

#include <poll.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>

#include "pobs/error.hpp"

extern char** environ;

namespace pobs::runtime {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) {
        return {};
    }
    return s.substr(first, s.find_last_not_of(" \t\r\n") - first + 1);
}

std::string join(const std::vector<std::string>& argv) {
    std::string out;
    for (const auto& a : argv) {
        if (!out.empty()) {
            out += ' ';
        }
        out += a;
    }
    return out;
}

} // namespace

CommandResult run_command(const std::vector<std::string>& argv) {
    if (argv.empty()) {
        throw Error(ErrorCode::InvalidArgument, "empty command");
    }
    int out_pipe[2];
    int err_pipe[2];
    if (pipe(out_pipe) != 0 || pipe(err_pipe) != 0) {
        throw Error(ErrorCode::RuntimeError, std::string("pipe: ") + std::strerror(errno));
    }
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);
    posix_spawn_file_actions_adddup2(&actions, err_pipe[1], STDERR_FILENO);
    posix_spawn_file_actions_addclose(&actions, out_pipe[0]);
    posix_spawn_file_actions_addclose(&actions, err_pipe[0]);

    std::vector<char*> args;
    for (const auto& a : argv) {
        args.push_back(const_cast<char*>(a.c_str()));
    }
    args.push_back(nullptr);

    pid_t pid = 0;
    const int rc = posix_spawnp(&pid, args[0], &actions, nullptr, args.data(), environ);
    posix_spawn_file_actions_destroy(&actions);
    close(out_pipe[1]);
    close(err_pipe[1]);
    if (rc != 0) {
        close(out_pipe[0]);
        close(err_pipe[0]);
        throw Error(ErrorCode::RuntimeError, "cannot execute " + argv[0] + ": " + std::strerror(rc));
    }

    CommandResult result;
    pollfd fds[2] = {{out_pipe[0], POLLIN, 0}, {err_pipe[0], POLLIN, 0}};
    std::string* sinks[2] = {&result.out, &result.err};
    int open_fds = 2;
    char buffer[4096];
    while (open_fds > 0) {
        if (poll(fds, 2, -1) < 0) {
            if (errno == EINTR) {
                continue;
            }
            break;
        }
        for (int i = 0; i < 2; ++i) {
            if (fds[i].fd < 0 || !(fds[i].revents & (POLLIN | POLLHUP | POLLERR))) {
                continue;
            }
            auto n = read(fds[i].fd, buffer, sizeof buffer);
            if (n > 0) {
                sinks[i]->append(buffer, static_cast<std::size_t>(n));
            } else {
                close(fds[i].fd);
                fds[i].fd = -1;
                --open_fds;
            }
        }
    }
    int status = 0;
    waitpid(pid, &status, 0);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
    return result;
}

DockerRuntime::DockerRuntime(CommandRunner runner, std::string executable)
    : runner_(std::move(runner)), executable_(std::move(executable)) {}

std::vector<std::string> DockerRuntime::build_argv(const std::string& executable, const std::string& tag,
                                                   const std::string& dockerfile, const std::string& context) {
    return {executable, "build", "-t", tag, "-f", dockerfile, context};
}

std::vector<std::string> DockerRuntime::run_argv(const std::string& executable, const RunRequest& request) {
    std::vector<std::string> argv = {executable, "run", "-d"};
    for (const auto& [name, value] : request.env) {
        argv.push_back("-e");
        argv.push_back(name + "=" + value);
    }
    for (int port : request.ports) {
        argv.push_back("-p");
        argv.push_back(std::to_string(port));
    }
    argv.push_back(request.image);
    return argv;
}

CommandResult DockerRuntime::exec(const std::vector<std::string>& argv) {
    return runner_(argv);
}

CommandResult DockerRuntime::checked(const std::vector<std::string>& argv) {
    auto result = exec(argv);
    if (result.exit_code != 0) {
        throw Error(ErrorCode::RuntimeError, join(argv) + " exited with " + std::to_string(result.exit_code) + ": " +
                                                 trim(result.err));
    }
    return result;
}

BuildOutcome DockerRuntime::build(const std::string& tag, const std::filesystem::path& dockerfile,
                                  const std::filesystem::path& context) {
    auto result = exec(build_argv(executable_, tag, dockerfile.string(), context.string()));
    return {result.exit_code == 0, tag, result.out + result.err};
}

ContainerHandle DockerRuntime::run(const RunRequest& request) {
    auto result = checked(run_argv(executable_, request));
    ContainerHandle handle;
    handle.id = trim(result.out);
    for (int port : request.ports) {
        // "0.0.0.0:49153" (possibly followed by an IPv6 line)
        auto mapping = checked({executable_, "port", handle.id, std::to_string(port)});
        auto line = trim(mapping.out.substr(0, mapping.out.find('\n')));
        auto colon = line.rfind(':');
        int host_port = 0;
        if (colon == std::string::npos ||
            std::from_chars(line.data() + colon + 1, line.data() + line.size(), host_port).ec != std::errc{}) {
            throw Error(ErrorCode::MalformedResponse, "cannot parse port mapping '" + line + "'");
        }
        handle.ports[port] = host_port;
    }
    return handle;
}

std::string DockerRuntime::logs(const ContainerHandle& handle) {
    auto result = checked({executable_, "logs", handle.id});
    return result.out + result.err;
}

bool DockerRuntime::running(const ContainerHandle& handle) {
    auto result = exec({executable_, "inspect", "-f", "{{.State.Running}}", handle.id});
    return result.exit_code == 0 && trim(result.out) == "true";
}

void DockerRuntime::stop(const ContainerHandle& handle) {
    checked({executable_, "stop", handle.id});
}

std::optional<std::uint64_t> DockerRuntime::image_size(const std::string& image) {
    auto result = exec({executable_, "image", "inspect", "-f", "{{.Size}}", image});
    if (result.exit_code != 0) {
        return std::nullopt;
    }
    auto text = trim(result.out);
    std::uint64_t size = 0;
    if (std::from_chars(text.data(), text.data() + text.size(), size).ec != std::errc{}) {
        throw Error(ErrorCode::MalformedResponse, "cannot parse image size '" + text + "'");
    }
    return size;
}

double parse_byte_size(const std::string& text) {
    auto t = trim(text);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (ec != std::errc{}) {
        throw Error(ErrorCode::MalformedResponse, "cannot parse size '" + text + "'");
    }
    std::string unit = trim(std::string(ptr, static_cast<const char*>(t.data() + t.size())));
    static const std::pair<const char*, double> units[] = {
        {"B", 1.0},     {"kB", 1e3},           {"KB", 1e3},           {"MB", 1e6},
        {"GB", 1e9},    {"TB", 1e12},          {"KiB", 1024.0},       {"MiB", 1024.0 * 1024},
        {"GiB", 1024.0 * 1024 * 1024},         {"TiB", 1024.0 * 1024 * 1024 * 1024},
    };
    if (unit.empty()) {
        return value;
    }
    for (const auto& [name, factor] : units) {
        if (unit == name) {
            return value * factor;
        }
    }
    throw Error(ErrorCode::MalformedResponse, "unknown size unit '" + unit + "'");
}

ContainerStats DockerRuntime::stats(const ContainerHandle& handle) {
    auto result =
        checked({executable_, "stats", "--no-stream", "--format", "{{.CPUPerc}},{{.MemUsage}}", handle.id});
    // "3.34%,512MiB / 2GiB"
    auto line = trim(result.out);
    auto comma = line.find(',');
    auto slash = line.find('/');
    if (comma == std::string::npos) {
        throw Error(ErrorCode::MalformedResponse, "cannot parse stats '" + line + "'");
    }
    auto cpu_text = trim(line.substr(0, comma));
    if (cpu_text.ends_with('%')) {
        cpu_text.pop_back();
    }
    double cpu = 0.0;
    if (std::from_chars(cpu_text.data(), cpu_text.data() + cpu_text.size(), cpu).ec != std::errc{}) {
        throw Error(ErrorCode::MalformedResponse, "cannot parse cpu '" + cpu_text + "'");
    }
    auto mem_text = line.substr(comma + 1, slash == std::string::npos ? std::string::npos : slash - comma - 1);
    return {cpu / 100.0, parse_byte_size(mem_text)};
}

std::optional<std::string> DockerRuntime::copy_from(const ContainerHandle& handle, const std::string& path) {
    auto result = exec({executable_, "exec", handle.id, "cat", path});
    if (result.exit_code != 0) {
        return std::nullopt;
    }
    return result.out;
}

} // namespace pobs::runtime
