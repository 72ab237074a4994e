// Runs a simulated instrumented application until SIGINT/SIGTERM. Reads the
// fault injection options from the process environment, like the agents do.

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "pobs/error.hpp"
#include "pobs/simulator.hpp"

extern char** environ;

namespace {

volatile std::sig_atomic_t g_stop = 0;

void on_signal(int) {
    g_stop = 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulated instrumented application"};
    std::string profile_path;
    std::string host = "0.0.0.0";
    std::uint64_t seed = 1;
    app.add_option("profile", profile_path, "Application profile (JSON)")->required()->check(CLI::ExistingFile);
    app.add_option("--host", host);
    app.add_option("--seed", seed);
    CLI11_PARSE(app, argc, argv);

    try {
        std::ifstream in(profile_path, std::ios::binary);
        std::ostringstream buffer;
        buffer << in.rdbuf();
        auto profile = pobs::sim::parse_profile(buffer.str());

        pobs::sim::SimulatorOptions options;
        for (char** e = environ; *e; ++e) {
            std::string entry(*e);
            auto eq = entry.find('=');
            if (eq != std::string::npos) {
                options.env[entry.substr(0, eq)] = entry.substr(eq + 1);
            }
        }
        options.seed = seed;
        options.host = host;
        options.app_port = profile.app_port;
        options.metrics_port = profile.metrics_port;
        options.log_sink = [](const std::string& line) { std::cout << line << std::endl; };

        std::signal(SIGINT, on_signal);
        std::signal(SIGTERM, on_signal);
        auto simulator = pobs::sim::TargetSimulator::start(profile, options);
        while (!g_stop && simulator->running()) {
            std::this_thread::sleep_for(std::chrono::milliseconds(50));
        }
        simulator->stop();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
