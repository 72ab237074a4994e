#include <doctest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>

#include <json.hpp>

#include "pobs/agent_protocol.hpp"
#include "pobs/orchestrator.hpp"
#include "support.hpp"

using namespace pobs;
namespace fs = std::filesystem;

namespace {

struct Run {
    int exit_code = -1;
    std::string out;
};

// Runs the CLI through the shell; stderr goes to the log so stdout stays parseable.
Run pobs_cli(const std::string& args) {
    const std::string command = std::string(POBS_CLI) + " " + args + " 2>/dev/null";
    FILE* pipe = ::popen(command.c_str(), "r");
    REQUIRE(pipe != nullptr);
    Run r;
    std::array<char, 4096> buffer{};
    std::size_t n = 0;
    while ((n = std::fread(buffer.data(), 1, buffer.size(), pipe)) > 0) {
        r.out.append(buffer.data(), n);
    }
    const int status = ::pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string quoted(const fs::path& p) {
    return "'" + p.string() + "'";
}

} // namespace

TEST_CASE("parse lists instructions and base images") {
    auto r = pobs_cli("parse " + quoted(testing::fixtures() / "dockerfiles/05-multistage.Dockerfile") + " --json");
    REQUIRE(r.exit_code == 0);
    auto doc = nlohmann::json::parse(r.out);
    CHECK(doc["base_images"].size() == 2);
    CHECK(doc["instructions"][0]["kind"] == "FROM");

    auto text = pobs_cli("parse " + quoted(testing::fixtures() / "apps/shop/Dockerfile"));
    CHECK(text.exit_code == 0);
    CHECK(text.out.find("base image: openjdk:8-jdk\n") != std::string::npos);
}

TEST_CASE("augment and rewrite write Dockerfiles") {
    auto aug = pobs_cli("augment openjdk:8-jdk");
    REQUIRE(aug.exit_code == 0);
    CHECK(aug.out == testing::read_file(testing::fixtures() / "world/openjdk-pobs.Dockerfile"));

    testing::TempDir dir;
    const auto target = dir.path() / "Dockerfile";
    fs::copy_file(testing::fixtures() / "apps/shop/Dockerfile", target);
    REQUIRE(pobs_cli("rewrite -i " + quoted(target)).exit_code == 0);
    CHECK(testing::read_file(target).starts_with("FROM openjdk-pobs:8-jdk\nCOPY shop.jar"));

    CHECK(pobs_cli("rewrite " + quoted(testing::fixtures() / "dockerfiles/06-variable-from.Dockerfile")).exit_code ==
          2);
}

TEST_CASE("analyze-corpus renders the frequency table") {
    auto r = pobs_cli("analyze-corpus " + quoted(testing::fixtures() / "corpus") + " -k 3 --format csv --allowlist " +
                      quoted(testing::fixtures() / "official-images.txt"));
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.find("openjdk:8-jdk,4") != std::string::npos);
}

TEST_CASE("report reads a campaign directory") {
    testing::TempDir dir;
    impact::ImpactResult significant;
    significant.p_value = 0.001;
    significant.significant = true;
    auto a = orchestrator::classify({"c/A.m", "c/A", "m", "java/lang/Exception", false, 1}, 1.0, significant);
    auto b = orchestrator::classify({"c/B.n", "c/B", "n", "java/io/IOException", false, 1}, 0.5, impact::ImpactResult{});
    testing::write_file(dir.path() / "points" / orchestrator::point_directory_name(1, a.point.key) / "verdict.json",
                        orchestrator::to_json(a));
    testing::write_file(dir.path() / "points" / orchestrator::point_directory_name(2, b.point.key) / "verdict.json",
                        orchestrator::to_json(b));
    std::vector<agent::InjectionPoint> all = {a.point, b.point};
    for (int i = 0; i < 3; ++i) {
        all.push_back({"c/D.m" + std::to_string(i), "c/D", "m" + std::to_string(i), "java/lang/Exception", false, 1});
    }
    testing::write_file(dir.path() / "points.csv", agent::write_points_csv(all));

    auto r = pobs_cli("report " + quoted(dir.path()) + " --format csv");
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.starts_with("Total FI Points,Covered,Resilient,Performance Issues\n5,2,1,1\n"));
    CHECK(r.out.find("2,c/B,n,java/io/IOException,50%,") != std::string::npos);
}

TEST_CASE("impact reads a metrics document") {
    testing::TempDir dir;
    nlohmann::json samples = nlohmann::json::array();
    for (int i = 0; i < 60; ++i) {
        samples.push_back({{"timestamp", i * 1000}, {"value", i < 30 ? 10.0 + (i % 3) * 0.1 : 4.0 + (i % 3) * 0.1}});
    }
    nlohmann::json doc = {{"metric_name", "jvm.cpu.load"}, {"intervention_ts", 30000}, {"samples", samples}};
    testing::write_file(dir.path() / "m.json", doc.dump());
    auto r = pobs_cli("--seed 3 impact " + quoted(dir.path() / "m.json") + " --n-boot 199");
    REQUIRE(r.exit_code == 0);
    auto result = nlohmann::json::parse(r.out);
    CHECK(result["relative_effect"].get<double>() < -0.5);
}

TEST_CASE("campaign on the fake engine") {
    testing::TempDir dir;
    const auto config = testing::fixtures() / "world/world.json";
    auto r = pobs_cli("--config " + quoted(config) + " campaign shop-pobs:1.0 --workload " +
                      quoted(testing::fixtures() / "apps/shop/workload.json") +
                      " --discover-s 1 --phase-s 2 --n-boot 199 --out " + quoted(dir.path()));
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("Total FI Points") != std::string::npos);
    CHECK(fs::exists(dir.path() / "summary.json"));
    CHECK(agent::parse_points_csv(testing::read_file(dir.path() / "points.csv")).size() == 4);

    auto verify = pobs_cli("--config " + quoted(config) + " verify-observability shop:1.0 --duration-s 1");
    CHECK(verify.exit_code == 1);
    CHECK(verify.out.find("no-attachment") != std::string::npos);
}

TEST_CASE("argument errors exit with the infrastructure code") {
    CHECK(pobs_cli("").exit_code == 2);
    CHECK(pobs_cli("parse /no/such/file").exit_code == 2);
    CHECK(pobs_cli("--runtime podman parse x").exit_code == 2);
    CHECK(pobs_cli("--help").exit_code == 0);
}
