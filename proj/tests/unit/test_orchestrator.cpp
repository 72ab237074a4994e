#include <doctest.h>

#include "pobs/error.hpp"
#include "pobs/orchestrator.hpp"
#include "support.hpp"

using namespace pobs;
using namespace pobs::orchestrator;
using testing::World;

namespace {

constexpr const char* kEvict = "o/s/cache/OrderCache.evict";
constexpr const char* kActivate = "o/s/core/WorkerPool.activateObject";
constexpr const char* kFilter = "o/s/web/AuditFilter.doFilter";

std::vector<agent::InjectionPoint> covered_points(World& w) {
    return discover_points(testing::kShopAugmented, testing::shop_workload(), *w.runtime, w.config, 2000).covered;
}

const PointVerdict& verdict_for(const std::vector<PointVerdict>& verdicts, const std::string& key) {
    for (const auto& v : verdicts) {
        if (v.point.key == key) {
            return v;
        }
    }
    throw std::runtime_error("no verdict for " + key);
}

} // namespace

TEST_CASE("outcome factories") {
    auto pass = ExperimentOutcome::pass(Phase::ModeB, {"ok"});
    CHECK(pass.status == Status::Pass);
    CHECK_FALSE(pass.failure_class);
    auto fail = ExperimentOutcome::fail(Phase::RunApp, "early-exit");
    CHECK(fail.failure_class == "early-exit");
    CHECK_THROWS_AS(ExperimentOutcome::fail(Phase::RunApp, ""), Error);
    CHECK(to_json(fail).find("\"early-exit\"") != std::string::npos);
    CHECK(to_string(Phase::FiCampaign) == "FiCampaign");
}

TEST_CASE("activation and checksums") {
    auto c = activation_config();
    CHECK(c.rate == 1.0);
    CHECK(c.countdown == agent::kUnlimited);
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("probe-artifact-v1\n") == testing::probe_spec().expected_sha256);
    CHECK(point_directory_name(3, "o/s/web/AuditFilter.doFilter") == "03-o_s_web_AuditFilter.doFilter");
}

TEST_CASE("base image validation") {
    World w;
    const auto modules = testing::fixtures() / "modules";

    SUBCASE("a correct augmentation passes both modes") {
        auto outcome = validate_base_image(testing::default_plan(), modules, testing::probe_spec(), *w.runtime, w.config);
        CHECK(outcome.status == Status::Pass);
        CHECK(outcome.phase == Phase::ModeB);
    }
    SUBCASE("an image without agents is not attached") {
        augmentor::TemplateRule rule;
        rule.env_defaults.clear();
        auto plan = augmentor::generate_augmented_base(dockerfile::parse_image_ref("openjdk:8-jdk"), rule);
        auto outcome = validate_base_image(plan, modules, testing::probe_spec(), *w.runtime, w.config);
        CHECK(outcome.status == Status::Fail);
        CHECK(outcome.phase == Phase::ModeA);
        CHECK(outcome.failure_class == "no-attachment");
    }
    SUBCASE("an injector that never fires is a mismatch") {
        auto probe = testing::probe_spec();
        probe.injection.rate = 0.0;
        auto outcome = validate_base_image(testing::default_plan(), modules, probe, *w.runtime, w.config);
        CHECK(outcome.phase == Phase::ModeB);
        CHECK(outcome.failure_class == "probe-mismatch");
    }
    SUBCASE("a wrong artifact is a mismatch") {
        auto probe = testing::probe_spec();
        probe.expected_sha256 = std::string(64, '0');
        auto outcome = validate_base_image(testing::default_plan(), modules, probe, *w.runtime, w.config);
        CHECK(outcome.phase == Phase::ModeA);
        CHECK(outcome.failure_class == "probe-mismatch");
    }
    SUBCASE("build errors") {
        testing::TempDir empty;
        auto base = validate_base_image(testing::default_plan(), empty.path(), testing::probe_spec(), *w.runtime,
                                        w.config);
        CHECK(base.phase == Phase::AugmentBase);
        CHECK(base.failure_class == "build-error");
        CHECK(base.evidence.front().find("COPY failed") != std::string::npos);

        auto probe = testing::probe_spec();
        probe.dockerfile_tail = "RUN false\n";
        auto app = validate_base_image(testing::default_plan(), modules, probe, *w.runtime, w.config);
        CHECK(app.phase == Phase::BuildApp);
        CHECK(app.failure_class == "build-error");

        auto unknown = validate_base_image(testing::default_plan("nosuch:1"), modules, testing::probe_spec(),
                                           *w.runtime, w.config);
        CHECK(unknown.failure_class == "build-error");
    }
}

TEST_CASE("observability verification") {
    World w;
    VerifyOptions options;
    options.duration_ms = 60000;

    CHECK(verify_observability(testing::kShopAugmented, *w.runtime, w.config, options).status == Status::Pass);

    auto plain = verify_observability(testing::kShopOriginal, *w.runtime, w.config, options);
    CHECK(plain.failure_class == "no-attachment");

    auto exiting = testing::shop_profile();
    exiting.exit_after_ms = 10000;
    w.build_app("exits:1", exiting);
    auto early = verify_observability("exits:1", *w.runtime, w.config, options);
    CHECK(early.failure_class == "early-exit");

    auto quiet = testing::shop_profile();
    quiet.library_metrics = false;
    w.build_app("quiet:1", quiet);
    auto missing = verify_observability("quiet:1", *w.runtime, w.config, options);
    CHECK(missing.failure_class == "metrics-missing:library");
}

TEST_CASE("discovery marks reached points as covered") {
    World w;
    auto d = discover_points(testing::kShopAugmented, testing::shop_workload(), *w.runtime, w.config, 2000);
    REQUIRE(d.points.size() == 4);
    REQUIRE(d.covered.size() == 3);
    CHECK(d.covered[0].key == kEvict);
    CHECK(d.covered[1].key == kActivate);
    CHECK(d.covered[2].key == kFilter);
    CHECK_THROWS_AS(discover_points(testing::kShopOriginal, testing::shop_workload(), *w.runtime, w.config, 1000),
                    Error);
}

TEST_CASE("verdict flags follow their definitions") {
    impact::ImpactResult significant;
    significant.p_value = 0.001;
    significant.significant = true;
    auto v = classify({"k", "C", "m", "E", false, 1}, 1.0, significant);
    CHECK(v.resilient);
    CHECK(v.performance_issue);
    auto w = classify({"k", "C", "m", "E", false, 1}, 0.999, impact::ImpactResult{});
    CHECK_FALSE(w.resilient);
    CHECK_FALSE(w.performance_issue);
    CHECK(parse_verdict(to_json(v)) == v);
    CHECK_THROWS_AS(parse_verdict("{}"), Error);
}

TEST_CASE("fault injection campaign") {
    World w;
    testing::TempDir out;
    const auto points = covered_points(w);
    REQUIRE(points.size() == 3);

    CampaignOptions options;
    options.phase_ms = 30000;
    options.impact.n_boot = 499;
    options.output_dir = out.path();
    auto verdicts = run_fi_campaign(testing::kShopAugmented, points, testing::shop_workload(), *w.runtime, w.config,
                                    options);
    REQUIRE(verdicts.size() == 3);

    const auto& evict = verdict_for(verdicts, kEvict);
    const auto& activate = verdict_for(verdicts, kActivate);
    const auto& filter = verdict_for(verdicts, kFilter);
    for (const auto* v : {&evict, &activate, &filter}) {
        CAPTURE(v->point.key);
        CHECK_FALSE(v->error);
        CHECK(v->reference_start_ms < v->reference_end_ms);
        CHECK(v->reference_end_ms < v->intervention_ts);
        CHECK(v->intervention_ts < v->injection_end_ms);
        CHECK(v->requests >= 290);
    }
    CHECK(evict.resilient);
    CHECK(evict.correctness_rate == 1.0);
    CHECK_FALSE(evict.performance_issue);

    CHECK_FALSE(activate.resilient);
    CHECK(activate.correctness_rate == doctest::Approx(0.5));
    CHECK(activate.performance_issue);
    CHECK(activate.impact.relative_effect == doctest::Approx(-0.6239).epsilon(0.03));

    CHECK_FALSE(filter.resilient);
    CHECK(filter.correctness_rate == 0.0);
    CHECK_FALSE(filter.performance_issue);

    SUBCASE("files on disk reproduce the verdicts") {
        for (std::size_t i = 0; i < verdicts.size(); ++i) {
            const auto dir = out.path() / "points" / point_directory_name(i + 1, verdicts[i].point.key);
            auto stored = parse_verdict(testing::read_file(dir / "verdict.json"));
            CHECK(stored == verdicts[i]);
            CHECK(stored.resilient == (stored.correctness_rate == 1.0));
            CHECK(stored.performance_issue == (stored.impact.p_value < stored.impact.alpha));

            auto input = impact::parse_impact_input(testing::read_file(dir / "metrics.json"));
            CHECK(input.intervention_ts == stored.intervention_ts);
            auto recomputed = impact::analyze(input.series, input.intervention_ts,
                                              {options.impact.n_boot, options.impact.seed + i, options.impact.alpha});
            CHECK(recomputed == stored.impact);

            auto log = testing::read_file(dir / "responses.log");
            CHECK(log.find("reference\t0\t0\t") == 0);
            CHECK(log.find("injection\t") != std::string::npos);
        }
    }

    SUBCASE("a second run with the same seed is identical") {
        World again;
        auto rerun = run_fi_campaign(testing::kShopAugmented, covered_points(again), testing::shop_workload(),
                                     *again.runtime, again.config, {options.phase_ms, options.metric, options.impact,
                                                                    options.injection, {}});
        CHECK(rerun == verdicts);
    }
}

TEST_CASE("campaign edge cases") {
    World w;
    CampaignOptions options;
    options.phase_ms = 2000;
    CHECK(run_fi_campaign(testing::kShopAugmented, {}, testing::shop_workload(), *w.runtime, w.config, options).empty());

    auto failed = run_fi_campaign("missing:1", {{"k", "C", "m", "E", false, 1}}, testing::shop_workload(), *w.runtime,
                                  w.config, options);
    REQUIRE(failed.size() == 1);
    CHECK(failed[0].error);
    CHECK_FALSE(failed[0].resilient);
}

TEST_CASE("overhead measurement") {
    World w;
    OverheadOptions options{3, 20};

    auto same = measure_overhead(testing::kShopAugmented, testing::kShopAugmented, testing::shop_workload(),
                                 *w.runtime, w.config, options);
    CHECK(same.original.size_bytes == same.augmented.size_bytes);
    CHECK(same.original.response_time_s == same.augmented.response_time_s);
    CHECK(same.original.completed_repeats == 3);

    auto m = measure_overhead(testing::kShopOriginal, testing::kShopAugmented, testing::shop_workload(), *w.runtime,
                              w.config, options);
    CHECK(m.augmented.response_time_s - m.original.response_time_s == doctest::Approx(0.010));
    CHECK(m.augmented.cpu_fraction - m.original.cpu_fraction == doctest::Approx(0.0157).epsilon(0.1));
    CHECK(m.augmented.memory_bytes - m.original.memory_bytes == doctest::Approx(200e6).epsilon(0.25));
    CHECK(m.augmented.size_bytes > m.original.size_bytes);

    w.runtime->register_image("grobid:0.5.1", 1'569'000'000, {}, testing::shop_profile());
    w.runtime->register_image("grobid-pobs:0.5.1", 1'614'000'000, {{"FI_MODE", "throw_e"}}, testing::shop_profile());
    auto g = measure_overhead("grobid:0.5.1", "grobid-pobs:0.5.1", testing::shop_workload(), *w.runtime, w.config,
                              options);
    CHECK(g.augmented.size_bytes - g.original.size_bytes == 45e6);

    CHECK_THROWS_AS(measure_overhead(testing::kShopOriginal, "absent:1", testing::shop_workload(), *w.runtime,
                                     w.config, options),
                    Error);
}
