#include "pobs/augmentor.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "pobs/error.hpp"

namespace pobs::augmentor {

using dockerfile::ImageRef;
using dockerfile::InstructionKind;
using dockerfile::SourceDockerfile;

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

void require_variable_free(const ImageRef& image) {
    if (image.has_variable) {
        throw Error(ErrorCode::VariableReference,
                    "invalid reference format: '" + image.source_text + "' contains a variable");
    }
}

void validate_rule(const TemplateRule& rule) {
    switch (rule.priority) {
    case Priority::NameAndTag:
        if (!rule.pattern_tag || rule.pattern_name.empty()) {
            throw Error(ErrorCode::InvalidRuleBook, "name+tag rule '" + rule.pattern_name + "' needs a tag");
        }
        break;
    case Priority::NameOnly:
        if (rule.pattern_tag || rule.pattern_name.empty()) {
            throw Error(ErrorCode::InvalidRuleBook, "name rule '" + rule.pattern_name + "' must not carry a tag");
        }
        break;
    case Priority::Default:
        break;
    }
    if (rule.exposed_port <= 0 || rule.exposed_port > 65535) {
        throw Error(ErrorCode::InvalidRuleBook, "exposed port out of range");
    }
}

PackageManager parse_pm(const std::string& text) {
    if (text == "apt") return PackageManager::Apt;
    if (text == "apk") return PackageManager::Apk;
    if (text == "none") return PackageManager::None;
    throw Error(ErrorCode::InvalidRuleBook, "unknown package manager '" + text + "'");
}

TemplateRule rule_from_json(const nlohmann::ordered_json& j, bool is_default) {
    TemplateRule rule;
    if (!j.is_object()) {
        throw Error(ErrorCode::InvalidRuleBook, "rule must be an object");
    }
    if (!is_default) {
        rule.pattern_name = j.at("image").get<std::string>();
        if (j.contains("tag") && !j["tag"].is_null()) {
            rule.pattern_tag = j["tag"].get<std::string>();
        }
        rule.priority = rule.pattern_tag ? Priority::NameAndTag : Priority::NameOnly;
    }
    if (j.contains("package_manager") && !j["package_manager"].is_null()) {
        rule.package_manager = parse_pm(j["package_manager"].get<std::string>());
    }
    if (j.contains("packages")) {
        rule.packages = j["packages"].get<std::vector<std::string>>();
    }
    if (j.contains("extra_install_commands")) {
        rule.extra_install_commands = j["extra_install_commands"].get<std::vector<std::string>>();
    }
    if (j.contains("run_user") && !j["run_user"].is_null()) {
        rule.run_user = j["run_user"].get<std::string>();
    }
    if (j.contains("exposed_port")) {
        rule.exposed_port = j["exposed_port"].get<int>();
    }
    if (j.contains("env")) {
        rule.env_defaults.clear();
        for (const auto& [key, value] : j["env"].items()) {
            rule.env_defaults.emplace_back(key, value.get<std::string>());
        }
        auto has_mode = std::any_of(rule.env_defaults.begin(), rule.env_defaults.end(),
                                    [](const auto& kv) { return kv.first == "FI_MODE"; });
        if (!has_mode) {
            rule.env_defaults.insert(rule.env_defaults.begin(), {"FI_MODE", "throw_e"});
        }
    }
    return rule;
}

bool is_root_user(const std::string& user) {
    return user == "root" || user == "0" || user.starts_with("root:") || user.starts_with("0:");
}

} // namespace

std::string_view to_string(PackageManager pm) {
    switch (pm) {
    case PackageManager::Apt: return "apt";
    case PackageManager::Apk: return "apk";
    case PackageManager::None: return "none";
    }
    return "none";
}

std::string_view to_string(Priority priority) {
    switch (priority) {
    case Priority::NameAndTag: return "name+tag";
    case Priority::NameOnly: return "name";
    case Priority::Default: return "default";
    }
    return "default";
}

RuleBook::RuleBook() = default;

RuleBook::RuleBook(std::vector<TemplateRule> rules, TemplateRule default_rule)
    : rules_(std::move(rules)), default_rule_(std::move(default_rule)) {
    if (default_rule_.priority != Priority::Default) {
        throw Error(ErrorCode::InvalidRuleBook, "default rule must have default priority");
    }
    validate_rule(default_rule_);
    std::set<std::pair<std::string, std::optional<std::string>>> seen;
    for (const auto& rule : rules_) {
        if (rule.priority == Priority::Default) {
            throw Error(ErrorCode::InvalidRuleBook, "only one default rule is allowed");
        }
        validate_rule(rule);
        if (!seen.emplace(rule.pattern_name, rule.pattern_tag).second) {
            throw Error(ErrorCode::InvalidRuleBook,
                        "duplicate rule for " + rule.pattern_name + (rule.pattern_tag ? ":" + *rule.pattern_tag : ""));
        }
    }
}

RuleBook parse_rulebook(std::string_view json_text) {
    nlohmann::ordered_json doc;
    try {
        doc = nlohmann::ordered_json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidRuleBook, e.what());
    }
    try {
        TemplateRule default_rule;
        if (doc.contains("default")) {
            default_rule = rule_from_json(doc["default"], true);
        }
        std::vector<TemplateRule> rules;
        if (doc.contains("rules")) {
            for (const auto& entry : doc["rules"]) {
                rules.push_back(rule_from_json(entry, false));
            }
        }
        return RuleBook(std::move(rules), std::move(default_rule));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidRuleBook, e.what());
    }
}

RuleBook load_rulebook(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot read rulebook " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_rulebook(buffer.str());
}

const TemplateRule& match_rule(const RuleBook& rulebook, const ImageRef& image) {
    require_variable_free(image);
    const auto repository = image.repository();
    const TemplateRule* name_match = nullptr;
    for (const auto& rule : rulebook.rules()) {
        if (rule.pattern_name != repository) {
            continue;
        }
        if (rule.priority == Priority::NameAndTag) {
            if (image.tag && rule.pattern_tag == image.tag) {
                return rule;
            }
        } else if (!name_match) {
            name_match = &rule;
        }
    }
    return name_match ? *name_match : rulebook.default_rule();
}

PackageManager infer_package_manager(const ImageRef& image) {
    auto haystack = lower(image.repository());
    if (image.tag) {
        haystack += ":" + lower(*image.tag);
    }
    return haystack.find("alpine") != std::string::npos ? PackageManager::Apk : PackageManager::Apt;
}

PackageManager resolve_package_manager(const TemplateRule& rule, const ImageRef& image) {
    return rule.package_manager ? *rule.package_manager : infer_package_manager(image);
}

ImageRef augmented_name(const ImageRef& image) {
    require_variable_free(image);
    if (image.name.ends_with(kAugmentedSuffix)) {
        throw Error(ErrorCode::AlreadyAugmented, image.reference() + " is already augmented");
    }
    ImageRef out = image;
    out.name += kAugmentedSuffix;
    out.source_text = out.reference();
    return out;
}

AugmentationPlan generate_augmented_base(const ImageRef& image, const TemplateRule& rule,
                                         const ModulePaths& module_paths) {
    require_variable_free(image);
    AugmentationPlan plan;
    plan.original = image;
    plan.original.stage_alias.reset();
    plan.augmented = augmented_name(plan.original);
    plan.rule = rule;

    const bool switch_user = rule.run_user && !is_root_user(*rule.run_user);
    std::ostringstream out;
    out << "FROM " << dockerfile::render_from_arguments(plan.original) << '\n';
    if (switch_user) {
        out << "USER root\n";
    }
    if (!rule.packages.empty()) {
        std::string packages;
        for (const auto& p : rule.packages) {
            packages += (packages.empty() ? "" : " ") + p;
        }
        switch (resolve_package_manager(rule, image)) {
        case PackageManager::Apt:
            out << "RUN apt-get update && apt-get install -y --no-install-recommends " << packages
                << " && rm -rf /var/lib/apt/lists/*\n";
            break;
        case PackageManager::Apk:
            out << "RUN apk add --no-cache " << packages << '\n';
            break;
        case PackageManager::None:
            break;
        }
    }
    for (const auto& command : rule.extra_install_commands) {
        out << "RUN " << command << '\n';
    }
    out << "COPY " << module_paths.observability_dir << " /home/\n";
    out << "COPY " << module_paths.fault_injection_dir << " /home/\n";
    out << "RUN mkdir /home/logs && chmod -R a+rw /home/logs\n";
    for (const auto& [key, value] : rule.env_defaults) {
        out << "ENV " << key << ' ' << value << '\n';
    }
    out << "EXPOSE " << rule.exposed_port << '\n';
    if (switch_user) {
        out << "USER " << *rule.run_user << '\n';
    }
    plan.generated_dockerfile = dockerfile::parse(out.str());
    return plan;
}

std::size_t runtime_from_index(const SourceDockerfile& file) {
    auto froms = dockerfile::from_indices(file);
    if (froms.empty()) {
        throw Error(ErrorCode::NoFromInstruction, "Dockerfile has no FROM instruction");
    }
    std::size_t position = froms.size() - 1;
    // A stage may build on an earlier stage by alias; the external image sits at the root of that chain.
    for (std::size_t hops = 0; hops < froms.size(); ++hops) {
        auto ref = dockerfile::parse_image_ref(file.instructions[froms[position]].arguments());
        if (ref.has_variable || ref.tag || ref.digest || !ref.repository_prefix.empty()) {
            break;
        }
        bool found = false;
        for (std::size_t earlier = position; earlier-- > 0;) {
            auto stage = dockerfile::parse_image_ref(file.instructions[froms[earlier]].arguments());
            if (stage.stage_alias && lower(*stage.stage_alias) == lower(ref.name)) {
                position = earlier;
                found = true;
                break;
            }
        }
        if (!found) {
            break;
        }
    }
    return froms[position];
}

SourceDockerfile rewrite_application(const SourceDockerfile& file) {
    SourceDockerfile out = file;
    auto index = runtime_from_index(out);
    auto& instruction = out.instructions[index];
    auto ref = dockerfile::parse_image_ref(instruction.arguments());
    auto augmented = augmented_name(ref);
    instruction.set_arguments(dockerfile::render_from_arguments(augmented));
    return out;
}

} // namespace pobs::augmentor
