#include <doctest.h>

#include <random>

#include "pobs/dockerfile.hpp"
#include "pobs/error.hpp"
#include "support.hpp"

using namespace pobs;
using namespace pobs::dockerfile;

TEST_CASE("every fixture re-emits byte-identically") {
    auto files = testing::dockerfile_fixtures();
    REQUIRE(files.size() >= 30);
    for (const auto& path : files) {
        CAPTURE(path.filename().string());
        const auto bytes = testing::read_file(path);
        CHECK(emit(parse(bytes)) == bytes);
    }
}

TEST_CASE("random documents round-trip") {
    const std::vector<std::string> pieces = {
        "FROM openjdk:8-jdk", "from java:8 AS build", "RUN echo a \\", "    && echo b", "# comment", "",
        "   ", "\t# indented comment", "COPY a b", "ENV A=1 \\", "EXPOSE 8080", "FROM", "FROM ${X}",
        "# escape=`", "RUN x `", "weird line", "CMD [\"java\"]", "RUN \\", "\\",
    };
    const std::vector<std::string> endings = {"\n", "\r\n", "\r", ""};
    std::mt19937_64 rng(20240601);
    for (int trial = 0; trial < 500; ++trial) {
        std::string doc;
        const int n = static_cast<int>(rng() % 12);
        for (int i = 0; i < n; ++i) {
            doc += pieces[rng() % pieces.size()];
            doc += endings[rng() % endings.size()];
        }
        CAPTURE(doc);
        CHECK(emit(parse(doc)) == doc);
    }
}

TEST_CASE("trivia attaches to the following instruction") {
    auto file = parse("# header\n\nFROM alpine\n# about run\nRUN true\n# tail\n");
    REQUIRE(file.instructions.size() == 2);
    CHECK(file.instructions[0].leading_trivia() == "# header\n\n");
    CHECK(file.instructions[0].line_range().first == 3);
    CHECK(file.instructions[1].leading_trivia() == "# about run\n");
    CHECK(file.instructions[1].line_range().first == 5);
    CHECK(file.trailing_text == "# tail\n");
}

TEST_CASE("continuation lines join into one logical instruction") {
    auto file = parse("RUN apt-get update \\\n# note\n\n    && apt-get install -y curl\nCMD x\n");
    REQUIRE(file.instructions.size() == 2);
    const auto& run = file.instructions[0];
    CHECK(run.kind() == InstructionKind::Run);
    CHECK(run.arguments() == "apt-get update     && apt-get install -y curl");
    CHECK(run.line_range().first == 1);
    CHECK(run.line_range().last == 4);
    CHECK(file.instructions[1].line_range().first == 5);
}

TEST_CASE("escape directive selects the backtick") {
    auto file = parse("# escape=`\nRUN dir `\n    c:\\\nCMD x\n");
    REQUIRE(file.instructions.size() == 2);
    CHECK(file.instructions[0].arguments() == "dir     c:\\");
}

TEST_CASE("line endings") {
    auto crlf = parse("FROM a\r\nRUN b\r\n");
    REQUIRE(crlf.instructions.size() == 2);
    CHECK(crlf.instructions[1].arguments() == "b");
    auto cr = parse("FROM a\rRUN b\r");
    REQUIRE(cr.instructions.size() == 2);
    CHECK(cr.instructions[0].arguments() == "a");
}

TEST_CASE("classification is total") {
    auto file = parse("FROM\nfrom alpine\nFOO bar\n123 x\nHEALTHCHECK NONE\n");
    REQUIRE(file.instructions.size() == 5);
    CHECK(file.instructions[0].kind() == InstructionKind::Other);
    CHECK(file.instructions[1].kind() == InstructionKind::From);
    CHECK(file.instructions[1].keyword() == "from");
    CHECK(file.instructions[2].kind() == InstructionKind::Other);
    CHECK(file.instructions[3].kind() == InstructionKind::Other);
    CHECK(file.instructions[4].kind() == InstructionKind::Other);
}

TEST_CASE("image references") {
    SUBCASE("name and tag") {
        auto r = parse_image_ref("openjdk:8-jdk");
        CHECK(r.repository_prefix.empty());
        CHECK(r.name == "openjdk");
        CHECK(r.tag == "8-jdk");
        CHECK_FALSE(r.digest);
        CHECK(r.reference() == "openjdk:8-jdk");
    }
    SUBCASE("registry with port") {
        auto r = parse_image_ref("registry.example.com:5000/team/java-base:1.2.3");
        CHECK(r.repository_prefix == "registry.example.com:5000/team");
        CHECK(r.name == "java-base");
        CHECK(r.tag == "1.2.3");
        auto untagged = parse_image_ref("localhost:5000/app");
        CHECK(untagged.repository_prefix == "localhost:5000");
        CHECK(untagged.name == "app");
        CHECK_FALSE(untagged.tag);
    }
    SUBCASE("digest, with and without tag") {
        auto r = parse_image_ref("openjdk@sha256:abc");
        CHECK(r.digest == "sha256:abc");
        CHECK_FALSE(r.tag);
        auto both = parse_image_ref("openjdk:8@sha256:abc");
        CHECK(both.tag == "8");
        CHECK(both.digest == "sha256:abc");
        CHECK(both.reference() == "openjdk:8@sha256:abc");
    }
    SUBCASE("variables") {
        auto r = parse_image_ref("openjdk:${V}-jdk");
        CHECK(r.has_variable);
        CHECK(r.reference() == "openjdk:${V}-jdk");
        CHECK(parse_image_ref("$BASE").has_variable);
    }
    SUBCASE("flags and alias") {
        auto r = parse_image_ref("--platform=linux/amd64 maven:3 as build");
        CHECK(r.flags == std::vector<std::string>{"--platform=linux/amd64"});
        CHECK(r.stage_alias == "build");
        CHECK(render_from_arguments(r) == "--platform=linux/amd64 maven:3 AS build");
    }
    SUBCASE("missing reference") {
        CHECK_THROWS_AS(parse_image_ref("   "), Error);
        try {
            parse_image_ref("--platform=x");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::EmptyReference);
        }
    }
}

TEST_CASE("rendered references parse back to the same value") {
    std::mt19937_64 rng(7);
    const std::vector<std::string> prefixes = {"", "library", "quay.io/org", "localhost:5000", "a.b:1/c/d"};
    const std::vector<std::string> names = {"openjdk", "java", "alpine-java", "x_y", "m.n"};
    const std::vector<std::string> tags = {"", "8", "8-jdk", "3.1-alpine", "latest"};
    const std::vector<std::string> digests = {"", "sha256:0123abcd"};
    const std::vector<std::string> aliases = {"", "build", "runtime"};
    for (int i = 0; i < 200; ++i) {
        ImageRef ref;
        ref.repository_prefix = prefixes[rng() % prefixes.size()];
        ref.name = names[rng() % names.size()];
        if (auto t = tags[rng() % tags.size()]; !t.empty()) {
            ref.tag = t;
        }
        if (auto d = digests[rng() % digests.size()]; !d.empty()) {
            ref.digest = d;
        }
        if (auto a = aliases[rng() % aliases.size()]; !a.empty()) {
            ref.stage_alias = a;
        }
        if (rng() % 3 == 0) {
            ref.flags.push_back("--platform=linux/arm64");
        }
        ref.source_text = ref.reference();
        CAPTURE(ref.source_text);
        CHECK(parse_image_ref(render_from_arguments(ref)) == ref);
    }
}

TEST_CASE("modified instructions render canonically and keep trivia") {
    auto file = parse("# base\nFROM  openjdk:8 \\\n   AS build\nRUN x");
    auto& from = file.instructions[0];
    from.set_arguments("openjdk-pobs:8 AS build");
    CHECK(from.modified());
    CHECK(from.render() == "# base\nFROM openjdk-pobs:8 AS build\n");
    auto& run = file.instructions[1];
    run.set_arguments("y");
    CHECK(run.render() == "RUN y");
}

TEST_CASE("base images are listed per FROM") {
    auto file = parse(testing::read_file(testing::fixtures() / "dockerfiles/23-three-stages.Dockerfile"));
    auto refs = extract_base_images(file);
    REQUIRE(refs.size() == 3);
    CHECK(refs[0].reference() == "gradle:6-jdk11");
    CHECK(refs[1].reference() == "deps");
    CHECK(refs[2].reference() == "openjdk:11-jre-slim");
    CHECK(from_indices(file) == std::vector<std::size_t>{0, 2, 5});
}
