#include "pobs/fake_runtime.hpp"

#include <fnmatch.h>
#include <stdlib.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "pobs/dockerfile.hpp"
#include "pobs/error.hpp"

namespace pobs::runtime {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

// Whitespace split honoring double and single quotes; quotes are removed.
std::vector<std::string> shell_words(std::string_view text) {
    std::vector<std::string> words;
    std::string current;
    bool in_word = false;
    char quote = 0;
    for (char c : text) {
        if (quote) {
            if (c == quote) {
                quote = 0;
            } else {
                current += c;
            }
        } else if (c == '"' || c == '\'') {
            quote = c;
            in_word = true;
        } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
            if (in_word) {
                words.push_back(std::move(current));
                current.clear();
                in_word = false;
            }
        } else {
            current += c;
            in_word = true;
        }
    }
    if (in_word) {
        words.push_back(std::move(current));
    }
    return words;
}

std::vector<std::string> copy_words(const std::string& arguments) {
    auto text = trim(arguments);
    std::vector<std::string> flags;
    // Leading flags come before an optional JSON array form.
    while (text.starts_with("--")) {
        auto end = text.find_first_of(" \t");
        flags.push_back(text.substr(0, end));
        text = end == std::string::npos ? std::string{} : trim(text.substr(end));
    }
    std::vector<std::string> words;
    if (text.starts_with("[")) {
        try {
            words = nlohmann::json::parse(text).get<std::vector<std::string>>();
        } catch (const nlohmann::json::exception&) {
            words = shell_words(text);
        }
    } else {
        words = shell_words(text);
    }
    flags.insert(flags.end(), words.begin(), words.end());
    return flags;
}

std::uint64_t tree_size(const fs::path& path) {
    if (fs::is_regular_file(path)) {
        return fs::file_size(path);
    }
    std::uint64_t total = 0;
    for (const auto& entry : fs::recursive_directory_iterator(path)) {
        if (entry.is_regular_file()) {
            total += entry.file_size();
        }
    }
    return total;
}

std::vector<fs::path> expand_source(const fs::path& context, const std::string& source) {
    const fs::path pattern = context / source;
    if (source.find_first_of("*?[") == std::string::npos) {
        if (fs::exists(pattern)) {
            return {pattern};
        }
        return {};
    }
    std::vector<fs::path> matches;
    const auto dir = pattern.parent_path();
    if (!fs::is_directory(dir)) {
        return {};
    }
    const auto name_pattern = pattern.filename().string();
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (fnmatch(name_pattern.c_str(), entry.path().filename().c_str(), 0) == 0) {
            matches.push_back(entry.path());
        }
    }
    std::sort(matches.begin(), matches.end());
    return matches;
}

std::optional<fs::path> find_profile(const fs::path& path) {
    auto is_profile = [](const fs::path& p) { return p.filename().string().ends_with(".simprofile.json"); };
    if (fs::is_regular_file(path)) {
        return is_profile(path) ? std::optional(path) : std::nullopt;
    }
    std::vector<fs::path> found;
    for (const auto& entry : fs::recursive_directory_iterator(path)) {
        if (entry.is_regular_file() && is_profile(entry.path())) {
            found.push_back(entry.path());
        }
    }
    if (found.empty()) {
        return std::nullopt;
    }
    std::sort(found.begin(), found.end());
    return found.front();
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

bool failing_command(const std::string& command) {
    auto c = trim(command);
    if (c == "false") {
        return true;
    }
    if (c.starts_with("exit ")) {
        return trim(c.substr(5)) != "0";
    }
    return false;
}

} // namespace

FakeRuntime::FakeRuntime(FakeRuntimeOptions options) : options_(std::move(options)) {
    clock_ = options_.clock ? options_.clock : std::make_shared<SystemClock>();
    if (options_.state_dir.empty()) {
        auto templ = (fs::temp_directory_path() / "pobs-fake-XXXXXX").string();
        if (!mkdtemp(templ.data())) {
            throw Error(ErrorCode::IoError, "cannot create fake runtime state directory");
        }
        state_dir_ = templ;
        owns_state_dir_ = true;
    } else {
        state_dir_ = options_.state_dir;
        fs::create_directories(state_dir_);
    }
}

FakeRuntime::~FakeRuntime() {
    {
        std::lock_guard lock(mutex_);
        for (auto& [id, c] : containers_) {
            if (c.simulator) {
                c.simulator->stop();
            }
        }
        containers_.clear();
    }
    if (owns_state_dir_) {
        std::error_code ec;
        fs::remove_all(state_dir_, ec);
    }
}

void FakeRuntime::set_env(Image& image, const std::string& key, const std::string& value) {
    for (auto& [k, v] : image.env) {
        if (k == key) {
            v = value;
            return;
        }
    }
    image.env.emplace_back(key, value);
}

void FakeRuntime::register_image(const std::string& reference, std::uint64_t size_bytes,
                                 std::vector<std::pair<std::string, std::string>> env,
                                 std::optional<sim::SimulatorProfile> profile) {
    std::lock_guard lock(mutex_);
    Image image;
    image.size = size_bytes;
    image.env = std::move(env);
    image.profile = std::move(profile);
    images_[normalize_image(reference)] = std::move(image);
}

bool FakeRuntime::has_image(const std::string& reference) const {
    std::lock_guard lock(mutex_);
    return images_.contains(normalize_image(reference));
}

std::vector<std::pair<std::string, std::string>> FakeRuntime::image_env(const std::string& reference) const {
    std::lock_guard lock(mutex_);
    auto it = images_.find(normalize_image(reference));
    if (it == images_.end()) {
        return {};
    }
    return it->second.env;
}

std::size_t FakeRuntime::containers_started() const {
    std::lock_guard lock(mutex_);
    return started_;
}

BuildOutcome FakeRuntime::build(const std::string& tag, const fs::path& dockerfile, const fs::path& context) {
    BuildOutcome outcome;
    std::ostringstream log;
    auto fail = [&](const std::string& message) {
        log << "ERROR: " << message << "\n";
        outcome.ok = false;
        outcome.log = log.str();
        return outcome;
    };

    if (!fs::is_regular_file(dockerfile)) {
        return fail("failed to read dockerfile: open " + dockerfile.string() + ": no such file or directory");
    }
    if (!fs::is_directory(context)) {
        return fail("unable to prepare context: path \"" + context.string() + "\" not found");
    }
    const auto source = dockerfile::parse(read_file(dockerfile));

    std::vector<Image> stages;
    std::map<std::string, std::size_t> aliases;
    std::size_t step = 0;
    std::size_t total = 0;
    for (const auto& ins : source.instructions) {
        if (ins.kind() != dockerfile::InstructionKind::Other || !ins.keyword().empty()) {
            ++total;
        }
    }

    std::lock_guard lock(mutex_);
    for (const auto& ins : source.instructions) {
        using dockerfile::InstructionKind;
        if (ins.kind() == InstructionKind::Other && ins.keyword().empty()) {
            continue;
        }
        ++step;
        log << "Step " << step << "/" << total << " : " << ins.keyword() << " " << ins.arguments() << "\n";
        if (ins.kind() != InstructionKind::From && stages.empty()) {
            if (ins.kind() == InstructionKind::Arg) {
                continue;
            }
            return fail("no build stage in current context");
        }
        switch (ins.kind()) {
        case InstructionKind::From: {
            const auto ref = dockerfile::parse_image_ref(ins.arguments());
            if (ref.has_variable) {
                return fail("failed to parse stage name \"" + ref.source_text + "\": invalid reference format");
            }
            Image stage;
            auto alias = aliases.find(ref.source_text);
            if (alias != aliases.end()) {
                stage = stages[alias->second];
            } else {
                auto parent = images_.find(normalize_image(ref.reference()));
                if (parent == images_.end()) {
                    return fail("pull access denied for " + ref.repository() +
                                ", repository does not exist or may require 'docker login'");
                }
                stage = parent->second;
            }
            if (ref.stage_alias) {
                aliases[*ref.stage_alias] = stages.size();
            }
            stages.push_back(std::move(stage));
            break;
        }
        case InstructionKind::Copy:
        case InstructionKind::Add: {
            auto words = copy_words(ins.arguments());
            std::optional<std::string> from_stage;
            std::vector<std::string> paths;
            for (auto& w : words) {
                if (w.starts_with("--from=")) {
                    from_stage = w.substr(7);
                } else if (!w.starts_with("--")) {
                    paths.push_back(w);
                }
            }
            if (paths.size() < 2) {
                return fail(ins.keyword() + " requires at least two arguments");
            }
            auto& image = stages.back();
            if (from_stage) {
                auto it = aliases.find(*from_stage);
                if (it == aliases.end()) {
                    return fail("invalid from flag value " + *from_stage);
                }
                if (stages[it->second].profile) {
                    image.profile = stages[it->second].profile;
                }
                break;
            }
            for (std::size_t i = 0; i + 1 < paths.size(); ++i) {
                const auto& src = paths[i];
                if (ins.kind() == InstructionKind::Add &&
                    (src.starts_with("http://") || src.starts_with("https://"))) {
                    continue;
                }
                auto matches = expand_source(context, src);
                if (matches.empty()) {
                    return fail("COPY failed: file not found in build context or excluded by .dockerignore: stat " +
                                src + ": file does not exist");
                }
                for (const auto& m : matches) {
                    image.size += tree_size(m);
                    if (auto profile = find_profile(m)) {
                        try {
                            image.profile = sim::parse_profile(read_file(*profile));
                        } catch (const Error& e) {
                            return fail(std::string("invalid application profile: ") + e.what());
                        }
                    }
                }
            }
            break;
        }
        case InstructionKind::Env: {
            auto text = trim(ins.arguments());
            auto first_space = text.find_first_of(" \t");
            auto first_eq = text.find('=');
            if (first_eq != std::string::npos && (first_space == std::string::npos || first_eq < first_space)) {
                for (const auto& word : shell_words(text)) {
                    auto eq = word.find('=');
                    if (eq == std::string::npos) {
                        return fail("ENV names can not be blank");
                    }
                    set_env(stages.back(), word.substr(0, eq), word.substr(eq + 1));
                }
            } else if (first_space != std::string::npos) {
                set_env(stages.back(), text.substr(0, first_space), trim(text.substr(first_space)));
            } else {
                return fail("ENV must have two arguments");
            }
            break;
        }
        case InstructionKind::Run:
            if (failing_command(ins.arguments())) {
                return fail("The command '/bin/sh -c " + trim(ins.arguments()) + "' returned a non-zero code: 1");
            }
            stages.back().size += options_.run_layer_bytes;
            break;
        case InstructionKind::Workdir: {
            auto dir = trim(ins.arguments());
            stages.back().workdir = fs::path(stages.back().workdir) / dir;
            break;
        }
        default:
            break;
        }
    }
    if (stages.empty()) {
        return fail("the Dockerfile has no FROM instruction");
    }
    images_[normalize_image(tag)] = stages.back();
    log << "Successfully tagged " << tag << "\n";
    outcome.ok = true;
    outcome.image = tag;
    outcome.log = log.str();
    return outcome;
}

ContainerHandle FakeRuntime::run(const RunRequest& request) {
    std::lock_guard lock(mutex_);
    auto it = images_.find(normalize_image(request.image));
    if (it == images_.end()) {
        throw Error(ErrorCode::RuntimeError, "Unable to find image '" + request.image + "' locally");
    }
    const Image& image = it->second;
    const auto index = started_++;

    char id_buf[32];
    std::snprintf(id_buf, sizeof id_buf, "fake%012zx", index);
    ContainerHandle handle;
    handle.id = id_buf;

    Container c;
    c.root = state_dir_ / "containers" / handle.id;
    c.workdir = image.workdir;
    fs::create_directories(c.root / fs::path(c.workdir).relative_path());

    if (image.profile) {
        sim::SimulatorOptions options;
        for (const auto& [k, v] : image.env) {
            options.env[k] = v;
        }
        for (const auto& [k, v] : request.env) {
            options.env[k] = v;
        }
        options.seed = options_.seed + index;
        options.clock = clock_;
        options.root = c.root;
        options.workdir = c.root / fs::path(c.workdir).relative_path();
        try {
            c.simulator = sim::TargetSimulator::start(*image.profile, std::move(options));
        } catch (const Error& e) {
            throw Error(ErrorCode::RuntimeError, std::string("container failed to start: ") + e.what());
        }
        for (int port : request.ports) {
            if (port == image.profile->app_port) {
                handle.ports[port] = c.simulator->app_port();
            } else if (port == image.profile->metrics_port && c.simulator->attached()) {
                handle.ports[port] = c.simulator->metrics_port();
            }
        }
    }
    containers_.emplace(handle.id, std::move(c));
    return handle;
}

FakeRuntime::Container& FakeRuntime::container(const ContainerHandle& handle) {
    auto it = containers_.find(handle.id);
    if (it == containers_.end()) {
        throw Error(ErrorCode::RuntimeError, "No such container: " + handle.id);
    }
    return it->second;
}

std::string FakeRuntime::logs(const ContainerHandle& handle) {
    std::lock_guard lock(mutex_);
    auto& c = container(handle);
    return c.simulator ? c.simulator->logs() : std::string{};
}

bool FakeRuntime::running(const ContainerHandle& handle) {
    std::lock_guard lock(mutex_);
    auto& c = container(handle);
    return c.simulator && c.simulator->running();
}

void FakeRuntime::stop(const ContainerHandle& handle) {
    std::lock_guard lock(mutex_);
    auto& c = container(handle);
    if (c.simulator) {
        c.simulator->stop();
    }
}

std::optional<std::uint64_t> FakeRuntime::image_size(const std::string& image) {
    std::lock_guard lock(mutex_);
    auto it = images_.find(normalize_image(image));
    if (it == images_.end()) {
        return std::nullopt;
    }
    return it->second.size;
}

ContainerStats FakeRuntime::stats(const ContainerHandle& handle) {
    std::lock_guard lock(mutex_);
    auto& c = container(handle);
    if (!c.simulator || !c.simulator->running()) {
        throw Error(ErrorCode::RuntimeError, "container " + handle.id + " is not running");
    }
    auto sample = c.simulator->sample_resources();
    return {sample.cpu_fraction, sample.memory_bytes};
}

std::optional<std::string> FakeRuntime::copy_from(const ContainerHandle& handle, const std::string& path) {
    std::lock_guard lock(mutex_);
    auto& c = container(handle);
    fs::path p(path);
    fs::path host = p.is_absolute() ? c.root / p.relative_path() : c.root / fs::path(c.workdir).relative_path() / p;
    if (!fs::is_regular_file(host)) {
        return std::nullopt;
    }
    return read_file(host);
}

} // namespace pobs::runtime
