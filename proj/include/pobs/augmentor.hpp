#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pobs/dockerfile.hpp"

namespace pobs::augmentor {

/// Suffix appended to the final name segment of an augmented image.
inline constexpr std::string_view kAugmentedSuffix = "-pobs";

enum class Priority { Default = 1, NameOnly = 2, NameAndTag = 3 };

enum class PackageManager { Apt, Apk, None };

std::string_view to_string(PackageManager pm);
std::string_view to_string(Priority priority);

/// One entry of the case-based augmentation strategy.
struct TemplateRule {
    /// Repository path the rule applies to (e.g. "openjdk", "jenkins/jenkins").
    std::string pattern_name;
    std::optional<std::string> pattern_tag;
    Priority priority = Priority::Default;
    /// Explicit override; inferred from the image when absent.
    std::optional<PackageManager> package_manager;
    /// Packages installed through the package manager.
    std::vector<std::string> packages{"curl"};
    /// Opaque shell commands run after the package install, as root.
    std::vector<std::string> extra_install_commands;
    /// Non-root user active in the base image, restored after root-only steps.
    std::optional<std::string> run_user;
    int exposed_port = 4000;
    std::vector<std::pair<std::string, std::string>> env_defaults{{"FI_MODE", "throw_e"}};

    friend bool operator==(const TemplateRule&, const TemplateRule&) = default;
};

class RuleBook {
public:
    /// Rulebook holding only the built-in default rule.
    RuleBook();
    /// Throws Error(InvalidRuleBook) on duplicate patterns or inconsistent priorities.
    RuleBook(std::vector<TemplateRule> rules, TemplateRule default_rule);

    const std::vector<TemplateRule>& rules() const noexcept { return rules_; }
    const TemplateRule& default_rule() const noexcept { return default_rule_; }

private:
    std::vector<TemplateRule> rules_;
    TemplateRule default_rule_;
};

/// Loads a rulebook from its JSON document. See README for the schema.
RuleBook parse_rulebook(std::string_view json_text);
RuleBook load_rulebook(const std::filesystem::path& path);

/// Highest-priority matching rule: name+tag, then name, then the default.
/// Throws Error(VariableReference) for references containing `$`.
const TemplateRule& match_rule(const RuleBook& rulebook, const dockerfile::ImageRef& image);

/// apk when "alpine" occurs in the repository path or tag (case-insensitive), apt otherwise.
PackageManager infer_package_manager(const dockerfile::ImageRef& image);

/// The rule's explicit choice, or the inferred one.
PackageManager resolve_package_manager(const TemplateRule& rule, const dockerfile::ImageRef& image);

/// openjdk:8-jdk -> openjdk-pobs:8-jdk. Throws VariableReference or AlreadyAugmented.
dockerfile::ImageRef augmented_name(const dockerfile::ImageRef& image);

/// Build-context relative locations of the two payload directories.
struct ModulePaths {
    std::string observability_dir = "./observability_module/";
    std::string fault_injection_dir = "./fault_injection_module/";
};

struct AugmentationPlan {
    dockerfile::ImageRef original;
    dockerfile::ImageRef augmented;
    TemplateRule rule;
    dockerfile::SourceDockerfile generated_dockerfile;
};

AugmentationPlan generate_augmented_base(const dockerfile::ImageRef& image, const TemplateRule& rule,
                                         const ModulePaths& module_paths = {});

/// Index of the FROM instruction that defines the runtime image: the final
/// stage, following `FROM <stage-alias>` chains back to an external image.
/// Throws Error(NoFromInstruction).
std::size_t runtime_from_index(const dockerfile::SourceDockerfile& file);

/// Points the runtime FROM at the augmented base image; every other byte is kept.
dockerfile::SourceDockerfile rewrite_application(const dockerfile::SourceDockerfile& file);

} // namespace pobs::augmentor
