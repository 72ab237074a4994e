#include "support.hpp"

#include <stdlib.h>

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "pobs/dockerfile.hpp"

namespace pobs::testing {

namespace fs = std::filesystem;

fs::path fixtures() {
    return POBS_FIXTURES_DIR;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot read " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    out << content;
}

TempDir::TempDir() {
    auto templ = (fs::temp_directory_path() / "pobs-test-XXXXXX").string();
    if (!mkdtemp(templ.data())) {
        throw std::runtime_error("mkdtemp failed");
    }
    path_ = templ;
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

std::vector<fs::path> dockerfile_fixtures() {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(fixtures() / "dockerfiles")) {
        files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

sim::SimulatorProfile shop_profile() {
    return sim::parse_profile(read_file(fixtures() / "apps/shop/shop.simprofile.json"));
}

workload::WorkloadSpec shop_workload() {
    return workload::parse_workload(read_file(fixtures() / "apps/shop/workload.json"));
}

orchestrator::ProbeSpec probe_spec() {
    orchestrator::ProbeSpec probe;
    probe.context_dir = fixtures() / "apps/probe";
    probe.dockerfile_tail = "COPY probe.jar probe.simprofile.json /home/probe/\n"
                            "CMD [\"java\", \"-jar\", \"/home/probe/probe.jar\"]\n";
    probe.request_path = "/probe";
    probe.expected_sha256 = "cd12a7c6584c1895153c617a84bbbccda08d3a69a297b20f3045bcc4f0ff0e20";
    probe.point_key = "probe/Downloader.fetch";
    return probe;
}

augmentor::AugmentationPlan default_plan(const std::string& image) {
    auto ref = dockerfile::parse_image_ref(image);
    augmentor::RuleBook book;
    return augmentor::generate_augmented_base(ref, augmentor::match_rule(book, ref));
}

World::World(std::shared_ptr<Clock> c, std::uint64_t seed) : clock(std::move(c)) {
    runtime::FakeRuntimeOptions options;
    options.clock = clock;
    options.seed = seed;
    options.state_dir = scratch.path() / "engine";
    runtime = std::make_unique<runtime::FakeRuntime>(options);
    runtime->register_image("openjdk:8-jdk", kOpenJdkSize);
    runtime->register_image("openjdk:8-jdk-alpine", 105'000'000);
    runtime->register_image("java:8", 643'000'000);

    const auto plan = default_plan();
    write_file(scratch.path() / "openjdk-pobs.Dockerfile", dockerfile::emit(plan.generated_dockerfile));
    auto base = runtime->build("openjdk-pobs:8-jdk", scratch.path() / "openjdk-pobs.Dockerfile", fixtures() / "modules");
    if (!base.ok) {
        throw std::runtime_error(base.log);
    }
    const auto shop = fixtures() / "apps/shop";
    auto original = runtime->build(kShopOriginal, shop / "Dockerfile", shop);
    auto augmented = runtime->build(kShopAugmented, fixtures() / "world/shop-pobs.Dockerfile", shop);
    if (!original.ok || !augmented.ok) {
        throw std::runtime_error(original.log + augmented.log);
    }

    config.clock = clock;
    config.poll_interval_ms = 500;
    config.startup_timeout_ms = 5000;
    config.work_dir = scratch.path() / "work";
}

void World::build_app(const std::string& tag, const sim::SimulatorProfile& profile, const std::string& base) {
    const auto dir = scratch.path() / "apps" / tag;
    write_file(dir / "app.jar", "jar\n");
    write_file(dir / "app.simprofile.json", sim::to_json(profile));
    write_file(dir / "Dockerfile", "FROM " + base + "\nCOPY app.jar app.simprofile.json /home/app/\n");
    auto outcome = runtime->build(tag, dir / "Dockerfile", dir);
    if (!outcome.ok) {
        throw std::runtime_error(outcome.log);
    }
}

} // namespace pobs::testing
