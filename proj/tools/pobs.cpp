// Command-line front end: Dockerfile tooling, experiments and reports.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "pobs/augmentor.hpp"
#include "pobs/corpus.hpp"
#include "pobs/docker_runtime.hpp"
#include "pobs/dockerfile.hpp"
#include "pobs/error.hpp"
#include "pobs/fake_runtime.hpp"
#include "pobs/impact.hpp"
#include "pobs/orchestrator.hpp"
#include "pobs/report.hpp"
#include "pobs/workload.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pobs;

namespace {

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitInfrastructure = 2;

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot read " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_output(const std::string& path, const std::string& content) {
    if (path.empty() || path == "-") {
        std::cout << content;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorCode::IoError, "cannot write " + path);
    }
    out << content;
}

struct Globals {
    std::string config_path;
    std::uint64_t seed = 1;
    bool seed_given = false;
    std::string runtime;
    json config = json::object();
    fs::path config_dir = ".";

    void load() {
        if (!config_path.empty()) {
            config = json::parse(read_file(config_path));
            config_dir = fs::path(config_path).parent_path();
        }
        if (!seed_given) {
            seed = config.value("seed", seed);
        }
        if (runtime.empty()) {
            runtime = config.value("runtime", std::string("fake"));
        }
    }

    fs::path resolve(const std::string& p) const { return fs::path(p).is_absolute() ? fs::path(p) : config_dir / p; }

    std::optional<std::string> setting(const std::string& key) const {
        if (config.contains(key) && config[key].is_string()) {
            return resolve(config[key].get<std::string>()).string();
        }
        return std::nullopt;
    }
};

orchestrator::ExperimentConfig experiment_config(const Globals& g, const std::shared_ptr<Clock>& clock) {
    orchestrator::ExperimentConfig c;
    c.clock = clock;
    const auto e = g.config.value("experiment", json::object());
    c.app_port = e.value("app_port", c.app_port);
    c.metrics_port = e.value("metrics_port", c.metrics_port);
    c.poll_interval_ms = e.value("poll_interval_ms", c.poll_interval_ms);
    c.startup_timeout_ms = e.value("startup_timeout_ms", c.startup_timeout_ms);
    c.progress = [](const std::string& m) { std::cerr << "[pobs] " << m << "\n"; };
    return c;
}

// The fake engine starts empty in every process; the configuration seeds it
// with base images and builds the application images experiments refer to.
std::unique_ptr<runtime::ContainerRuntime> make_runtime(const Globals& g, const std::shared_ptr<Clock>& clock) {
    if (g.runtime == "real") {
        return std::make_unique<runtime::DockerRuntime>();
    }
    if (g.runtime != "fake") {
        throw Error(ErrorCode::InvalidArgument, "--runtime must be real or fake");
    }
    const auto f = g.config.value("fake", json::object());
    runtime::FakeRuntimeOptions options;
    options.clock = clock;
    options.seed = g.seed;
    options.run_layer_bytes = f.value("run_layer_bytes", std::uint64_t{0});
    auto rt = std::make_unique<runtime::FakeRuntime>(options);
    for (const auto& image : f.value("images", json::array())) {
        std::vector<std::pair<std::string, std::string>> env;
        for (const auto& [k, v] : image.value("env", json::object()).items()) {
            env.emplace_back(k, v.get<std::string>());
        }
        std::optional<sim::SimulatorProfile> profile;
        if (image.contains("profile")) {
            profile = sim::parse_profile(read_file(g.resolve(image["profile"].get<std::string>())));
        }
        rt->register_image(image.at("reference").get<std::string>(), image.value("size_bytes", std::uint64_t{0}),
                           env, profile);
    }
    for (const auto& b : f.value("builds", json::array())) {
        const auto tag = b.at("tag").get<std::string>();
        auto outcome = rt->build(tag, g.resolve(b.at("dockerfile").get<std::string>()),
                                 g.resolve(b.at("context").get<std::string>()));
        if (!outcome.ok) {
            throw Error(ErrorCode::RuntimeError, "preparing " + tag + " failed:\n" + outcome.log);
        }
    }
    return rt;
}

augmentor::RuleBook rulebook(const Globals& g, const std::string& flag) {
    if (!flag.empty()) {
        return augmentor::load_rulebook(flag);
    }
    if (auto path = g.setting("rulebook")) {
        return augmentor::load_rulebook(*path);
    }
    return {};
}

report::Format parse_format(const std::string& s) {
    return s == "csv" ? report::Format::Csv : report::Format::Text;
}

int outcome_exit(const orchestrator::ExperimentOutcome& outcome) {
    std::cout << orchestrator::to_json(outcome);
    return outcome.status == orchestrator::Status::Pass ? kExitPass : kExitFail;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Observability and fault injection for containerized Java applications"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config_path, "JSON configuration file")->check(CLI::ExistingFile);
    app.add_option_function<std::uint64_t>(
        "--seed", [&](std::uint64_t s) { g.seed = s, g.seed_given = true; }, "Seed for simulators and bootstraps");
    app.add_option("--runtime", g.runtime, "Container engine: real or fake")->check(CLI::IsMember({"real", "fake"}));

    int exit_code = kExitPass;
    std::function<int()> action;

    auto* parse = app.add_subcommand("parse", "Parse a Dockerfile and list its instructions");
    std::string parse_file;
    bool parse_json = false;
    parse->add_option("dockerfile", parse_file)->required()->check(CLI::ExistingFile);
    parse->add_flag("--json", parse_json, "Emit JSON");
    parse->callback([&] {
        action = [&] {
            auto file = dockerfile::parse(read_file(parse_file));
            json items = json::array();
            std::string text;
            for (const auto& ins : file.instructions) {
                auto range = ins.line_range();
                items.push_back({{"kind", dockerfile::to_string(ins.kind())},
                                 {"keyword", ins.keyword()},
                                 {"arguments", ins.arguments()},
                                 {"lines", {range.first, range.last}}});
                text += std::to_string(range.first) + "-" + std::to_string(range.last) + "\t" +
                        std::string(dockerfile::to_string(ins.kind())) + "\t" + ins.arguments() + "\n";
            }
            json bases = json::array();
            for (const auto& ref : dockerfile::extract_base_images(file)) {
                bases.push_back(ref.reference());
                text += "base image: " + ref.reference() + (ref.has_variable ? " (variable)" : "") + "\n";
            }
            std::cout << (parse_json ? json{{"instructions", items}, {"base_images", bases}}.dump(2) + "\n" : text);
            return kExitPass;
        };
    });

    auto* corpus_cmd = app.add_subcommand("analyze-corpus", "Base image statistics over a Dockerfile corpus");
    std::string corpus_root, allowlist_path, corpus_format = "table", corpus_out;
    std::size_t top_k = 10;
    corpus_cmd->add_option("root", corpus_root)->required()->check(CLI::ExistingDirectory);
    corpus_cmd->add_option("-k,--top-k", top_k, "Number of most frequent images");
    corpus_cmd->add_option("--allowlist", allowlist_path, "Official image names, one per line");
    corpus_cmd->add_option("--format", corpus_format)->check(CLI::IsMember({"table", "csv"}));
    corpus_cmd->add_option("-o,--output", corpus_out);
    corpus_cmd->callback([&] {
        action = [&] {
            std::set<std::string> allowlist;
            if (!allowlist_path.empty()) {
                allowlist = corpus::load_allowlist(allowlist_path);
            } else if (auto p = g.setting("allowlist")) {
                allowlist = corpus::load_allowlist(*p);
            }
            auto stats = corpus::scan_corpus(corpus_root, top_k, allowlist);
            auto format = corpus_format == "csv" ? corpus::StatsFormat::Csv : corpus::StatsFormat::Table;
            write_output(corpus_out, corpus::render_stats(stats, format));
            std::cerr << corpus::render_summary(stats);
            return kExitPass;
        };
    });

    auto* augment = app.add_subcommand("augment", "Generate the augmented base image Dockerfile");
    std::string augment_image, augment_rules, augment_out;
    augment->add_option("image", augment_image)->required();
    augment->add_option("--rulebook", augment_rules)->check(CLI::ExistingFile);
    augment->add_option("-o,--output", augment_out);
    augment->callback([&] {
        action = [&] {
            auto ref = dockerfile::parse_image_ref(augment_image);
            auto book = rulebook(g, augment_rules);
            auto plan = augmentor::generate_augmented_base(ref, augmentor::match_rule(book, ref));
            write_output(augment_out, dockerfile::emit(plan.generated_dockerfile));
            std::cerr << "augmented image: " << plan.augmented.reference() << "\n";
            return kExitPass;
        };
    });

    auto* rewrite = app.add_subcommand("rewrite", "Point an application Dockerfile at its augmented base image");
    std::string rewrite_file, rewrite_out;
    bool in_place = false;
    rewrite->add_option("dockerfile", rewrite_file)->required()->check(CLI::ExistingFile);
    rewrite->add_option("-o,--output", rewrite_out);
    rewrite->add_flag("-i,--in-place", in_place);
    rewrite->callback([&] {
        action = [&] {
            auto out = dockerfile::emit(augmentor::rewrite_application(dockerfile::parse(read_file(rewrite_file))));
            write_output(in_place ? rewrite_file : rewrite_out, out);
            return kExitPass;
        };
    });

    auto* validate = app.add_subcommand("validate-base", "Build and validate an augmented base image");
    std::string validate_image, validate_rules, modules_dir, probe_path;
    validate->add_option("image", validate_image, "Original base image")->required();
    validate->add_option("--modules", modules_dir, "Directory holding the agent modules")
        ->required()
        ->check(CLI::ExistingDirectory);
    validate->add_option("--probe", probe_path, "Probe description (JSON)")->required()->check(CLI::ExistingFile);
    validate->add_option("--rulebook", validate_rules)->check(CLI::ExistingFile);
    validate->callback([&] {
        action = [&] {
            auto clock = std::make_shared<SystemClock>();
            auto rt = make_runtime(g, clock);
            auto ref = dockerfile::parse_image_ref(validate_image);
            auto plan = augmentor::generate_augmented_base(ref, augmentor::match_rule(rulebook(g, validate_rules), ref));
            auto pj = json::parse(read_file(probe_path));
            const auto probe_dir = fs::path(probe_path).parent_path();
            orchestrator::ProbeSpec probe;
            probe.context_dir = probe_dir / pj.at("context_dir").get<std::string>();
            probe.dockerfile_tail = pj.value("dockerfile_tail", std::string{});
            probe.request_path = pj.value("request_path", probe.request_path);
            probe.expected_sha256 = pj.at("expected_sha256").get<std::string>();
            probe.point_key = pj.at("point_key").get<std::string>();
            return outcome_exit(
                orchestrator::validate_base_image(plan, modules_dir, probe, *rt, experiment_config(g, clock)));
        };
    });

    auto* verify = app.add_subcommand("verify-observability", "Check attachment and metric availability");
    std::string verify_image;
    double verify_seconds = 60;
    verify->add_option("image", verify_image)->required();
    verify->add_option("--duration-s", verify_seconds);
    verify->callback([&] {
        action = [&] {
            auto clock = std::make_shared<SystemClock>();
            auto rt = make_runtime(g, clock);
            orchestrator::VerifyOptions options;
            options.duration_ms = static_cast<std::int64_t>(verify_seconds * 1000);
            return outcome_exit(orchestrator::verify_observability(verify_image, *rt, experiment_config(g, clock), options));
        };
    });

    auto* campaign = app.add_subcommand("campaign", "Fault injection campaign over the covered points");
    std::string campaign_image, workload_path, points_path, out_dir = "pobs-out", metric = "jvm.cpu.load";
    double phase_s = 300, discover_s = 30;
    std::size_t n_boot = 1000;
    campaign->add_option("image", campaign_image)->required();
    campaign->add_option("--workload", workload_path)->required()->check(CLI::ExistingFile);
    campaign->add_option("--points", points_path, "Points CSV; discovered with a coverage run when absent");
    campaign->add_option("--discover-s", discover_s, "Length of the coverage run");
    campaign->add_option("--phase-s", phase_s, "Length of each reference and injection phase");
    campaign->add_option("--metric", metric);
    campaign->add_option("--n-boot", n_boot);
    campaign->add_option("--out", out_dir);
    campaign->callback([&] {
        action = [&] {
            auto clock = std::make_shared<SystemClock>();
            auto rt = make_runtime(g, clock);
            auto config = experiment_config(g, clock);
            auto spec = workload::parse_workload(read_file(workload_path));
            std::vector<agent::InjectionPoint> all;
            std::vector<agent::InjectionPoint> covered;
            if (!points_path.empty()) {
                all = covered = agent::parse_points_csv(read_file(points_path));
            } else {
                auto d = orchestrator::discover_points(campaign_image, spec, *rt, config,
                                                       static_cast<std::int64_t>(discover_s * 1000));
                all = d.points;
                covered = d.covered;
            }
            orchestrator::CampaignOptions options;
            options.phase_ms = static_cast<std::int64_t>(phase_s * 1000);
            options.metric = metric;
            options.impact.n_boot = n_boot;
            options.impact.seed = g.seed;
            options.output_dir = out_dir;
            fs::create_directories(out_dir);
            write_output((fs::path(out_dir) / "points.csv").string(), agent::write_points_csv(all));
            auto verdicts = orchestrator::run_fi_campaign(campaign_image, covered, spec, *rt, config, options);
            auto summary = report::summarize(verdicts, all.size());
            write_output((fs::path(out_dir) / "summary.json").string(), report::summary_json(summary, verdicts));
            std::cout << report::render_summary(summary, report::Format::Text) << "\n"
                      << report::render_point_table(verdicts, report::Format::Text);
            bool any_error = std::any_of(verdicts.begin(), verdicts.end(), [](const auto& v) { return v.error; });
            return any_error ? kExitFail : kExitPass;
        };
    });

    auto* overhead = app.add_subcommand("overhead", "Compare an original and an augmented application image");
    std::string original_image, augmented_image, overhead_workload, overhead_format = "text", app_name;
    orchestrator::OverheadOptions overhead_options;
    overhead->add_option("original", original_image)->required();
    overhead->add_option("augmented", augmented_image)->required();
    overhead->add_option("--workload", overhead_workload)->required()->check(CLI::ExistingFile);
    overhead->add_option("--repeats", overhead_options.repeats);
    overhead->add_option("--calls", overhead_options.calls_per_api, "Calls per API per repeat");
    overhead->add_option("--name", app_name, "Application name for the table");
    overhead->add_option("--format", overhead_format)->check(CLI::IsMember({"text", "csv"}));
    overhead->callback([&] {
        action = [&] {
            auto clock = std::make_shared<SystemClock>();
            auto rt = make_runtime(g, clock);
            auto spec = workload::parse_workload(read_file(overhead_workload));
            auto m = orchestrator::measure_overhead(original_image, augmented_image, spec, *rt,
                                                    experiment_config(g, clock), overhead_options);
            for (const auto* im : {&m.original, &m.augmented}) {
                for (const auto& f : im->failures) {
                    std::cerr << im->image << ": " << f << "\n";
                }
            }
            std::cout << report::render_overhead(report::make_overhead_report(m, app_name),
                                                 parse_format(overhead_format));
            return m.original.failures.empty() && m.augmented.failures.empty() ? kExitPass : kExitFail;
        };
    });

    auto* impact_cmd = app.add_subcommand("impact", "Causal impact of an intervention on a metric series");
    std::string impact_input, plot_path;
    impact::ImpactOptions impact_options;
    impact_cmd->add_option("input", impact_input, "Metrics document (JSON)")->required()->check(CLI::ExistingFile);
    impact_cmd->add_option("--plot", plot_path, "Write actual/predicted CSV here");
    impact_cmd->add_option("--n-boot", impact_options.n_boot);
    impact_cmd->add_option("--alpha", impact_options.alpha);
    impact_cmd->callback([&] {
        action = [&] {
            impact_options.seed = g.seed;
            auto input = impact::parse_impact_input(read_file(impact_input));
            auto result = impact::analyze(input.series, input.intervention_ts, impact_options);
            std::cout << impact::to_json(result);
            if (!plot_path.empty()) {
                write_output(plot_path, impact::render_plot_data(input.series, result));
            }
            return kExitPass;
        };
    });

    auto* report_cmd = app.add_subcommand("report", "Tables from a campaign output directory");
    std::string report_dir, report_format = "text";
    std::optional<std::size_t> total_points;
    report_cmd->add_option("dir", report_dir)->required()->check(CLI::ExistingDirectory);
    report_cmd->add_option("--total", total_points, "Total points (default: rows of points.csv)");
    report_cmd->add_option("--format", report_format)->check(CLI::IsMember({"text", "csv"}));
    report_cmd->callback([&] {
        action = [&] {
            auto verdicts = report::load_verdicts(report_dir);
            std::size_t total = verdicts.size();
            if (total_points) {
                total = *total_points;
            } else if (fs::exists(fs::path(report_dir) / "points.csv")) {
                total = agent::parse_points_csv(read_file(fs::path(report_dir) / "points.csv")).size();
            }
            auto format = parse_format(report_format);
            auto summary = report::summarize(verdicts, total);
            std::cout << report::render_summary(summary, format) << "\n" << report::render_point_table(verdicts, format);
            return kExitPass;
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitPass : kExitInfrastructure;
    }
    try {
        g.load();
        exit_code = action();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInfrastructure;
    }
    return exit_code;
}
