#include "pobs/dockerfile.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <utility>

#include "pobs/error.hpp"

namespace pobs::dockerfile {

namespace {

struct PhysicalLine {
    std::string_view content;   // without terminator
    std::string_view full;      // with terminator
};

std::vector<PhysicalLine> split_lines(std::string_view bytes) {
    std::vector<PhysicalLine> lines;
    std::size_t start = 0;
    while (start < bytes.size()) {
        std::size_t i = start;
        while (i < bytes.size() && bytes[i] != '\n' && bytes[i] != '\r') {
            ++i;
        }
        std::size_t end = i;
        if (i < bytes.size()) {
            if (bytes[i] == '\r' && i + 1 < bytes.size() && bytes[i + 1] == '\n') {
                end = i + 2;
            } else {
                end = i + 1;
            }
        }
        lines.push_back({bytes.substr(start, i - start), bytes.substr(start, end - start)});
        start = end;
    }
    return lines;
}

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\v' || c == '\f';
}

std::string_view trim_left(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size() && is_space(s[i])) {
        ++i;
    }
    return s.substr(i);
}

std::string_view trim_right(std::string_view s) {
    std::size_t n = s.size();
    while (n > 0 && is_space(s[n - 1])) {
        --n;
    }
    return s.substr(0, n);
}

std::string_view trim(std::string_view s) {
    return trim_right(trim_left(s));
}

bool is_trivia(std::string_view content) {
    auto t = trim_left(content);
    return t.empty() || t.front() == '#';
}

std::string to_upper(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return out;
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

// Returns the escape character selected by a leading `# escape=` directive.
char detect_escape(const std::vector<PhysicalLine>& lines) {
    char escape = '\\';
    for (const auto& line : lines) {
        auto t = trim(line.content);
        if (t.empty() || t.front() != '#') {
            break;
        }
        auto body = trim(t.substr(1));
        auto eq = body.find('=');
        if (eq == std::string_view::npos) {
            break;
        }
        auto key = trim(body.substr(0, eq));
        auto value = trim(body.substr(eq + 1));
        if (key.empty() || !std::all_of(key.begin(), key.end(), [](unsigned char c) {
                return std::isalnum(c) || c == '_';
            })) {
            break;
        }
        if (to_lower(key) == "escape" && (value == "\\" || value == "`")) {
            escape = value.front();
        }
    }
    return escape;
}

bool continues(std::string_view content, char escape) {
    auto t = trim_right(content);
    return !t.empty() && t.back() == escape;
}

// Caller has checked continues(); drops the trailing escape character.
std::string_view strip_escape(std::string_view content) {
    auto t = trim_right(content);
    return t.substr(0, t.size() - 1);
}

constexpr std::array<std::pair<std::string_view, InstructionKind>, 13> kKeywords{{
    {"FROM", InstructionKind::From},
    {"RUN", InstructionKind::Run},
    {"COPY", InstructionKind::Copy},
    {"ADD", InstructionKind::Add},
    {"ENV", InstructionKind::Env},
    {"USER", InstructionKind::User},
    {"EXPOSE", InstructionKind::Expose},
    {"ENTRYPOINT", InstructionKind::Entrypoint},
    {"CMD", InstructionKind::Cmd},
    {"WORKDIR", InstructionKind::Workdir},
    {"ARG", InstructionKind::Arg},
    {"LABEL", InstructionKind::Label},
    {"VOLUME", InstructionKind::Volume},
}};

InstructionKind classify(std::string_view keyword, std::string_view arguments) {
    if (keyword.empty() || !std::all_of(keyword.begin(), keyword.end(),
                                        [](unsigned char c) { return std::isalpha(c); })) {
        return InstructionKind::Other;
    }
    auto upper = to_upper(keyword);
    for (const auto& [word, kind] : kKeywords) {
        if (upper == word) {
            if (kind == InstructionKind::From) {
                // A FROM without a reference token cannot be transformed.
                try {
                    parse_image_ref(arguments);
                } catch (const Error&) {
                    return InstructionKind::Other;
                }
            }
            return kind;
        }
    }
    return InstructionKind::Other;
}

std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (is_space(s[i]) || s[i] == '\n' || s[i] == '\r')) {
            ++i;
        }
        std::size_t j = i;
        while (j < s.size() && !(is_space(s[j]) || s[j] == '\n' || s[j] == '\r')) {
            ++j;
        }
        if (j > i) {
            out.push_back(s.substr(i, j - i));
        }
        i = j;
    }
    return out;
}

bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() && to_lower(a) == to_lower(b);
}

} // namespace

std::string_view to_string(InstructionKind kind) {
    for (const auto& [word, k] : kKeywords) {
        if (k == kind) {
            return word;
        }
    }
    return "OTHER";
}

Instruction::Instruction(InstructionKind kind, std::string keyword, std::string arguments, std::string raw_span,
                         std::size_t trivia_length, LineRange lines)
    : kind_(kind),
      keyword_(std::move(keyword)),
      arguments_(std::move(arguments)),
      raw_span_(std::move(raw_span)),
      trivia_length_(trivia_length),
      lines_(lines) {}

std::string_view Instruction::leading_trivia() const noexcept {
    return std::string_view(raw_span_).substr(0, trivia_length_);
}

void Instruction::set_arguments(std::string arguments) {
    arguments_ = std::move(arguments);
    modified_ = true;
}

std::string Instruction::render() const {
    if (!modified_) {
        return raw_span_;
    }
    std::string out(leading_trivia());
    out += keyword_.empty() ? std::string(to_string(kind_)) : keyword_;
    if (!arguments_.empty()) {
        out += ' ';
        out += arguments_;
    }
    // Canonical form ends in "\n" unless the original was the unterminated last line.
    if (!raw_span_.empty() && (raw_span_.back() == '\n' || raw_span_.back() == '\r')) {
        out += '\n';
    }
    return out;
}

SourceDockerfile parse(std::string_view bytes) {
    SourceDockerfile file;
    const auto lines = split_lines(bytes);
    const char escape = detect_escape(lines);

    std::string trivia;
    std::size_t i = 0;
    while (i < lines.size()) {
        if (is_trivia(lines[i].content)) {
            trivia.append(lines[i].full);
            ++i;
            continue;
        }

        const std::size_t first = i;
        std::string raw = trivia;
        const std::size_t trivia_length = trivia.size();
        trivia.clear();

        std::string logical;
        bool more = true;
        bool first_line = true;
        while (more && i < lines.size()) {
            const auto& line = lines[i];
            raw.append(line.full);
            if (!first_line && is_trivia(line.content)) {
                // Comments and blank lines inside a continuation are kept physically
                // but do not contribute to the logical instruction.
                ++i;
                continue;
            }
            first_line = false;
            if (continues(line.content, escape)) {
                logical.append(strip_escape(line.content));
            } else {
                logical.append(line.content);
                more = false;
            }
            ++i;
        }

        auto body = trim(logical);
        std::size_t k = 0;
        while (k < body.size() && !is_space(body[k])) {
            ++k;
        }
        std::string keyword(body.substr(0, k));
        std::string arguments(trim(body.substr(k)));
        auto kind = classify(keyword, arguments);
        file.instructions.emplace_back(kind, std::move(keyword), std::move(arguments), std::move(raw),
                                       trivia_length, LineRange{first + 1, i});
    }
    file.trailing_text = std::move(trivia);
    return file;
}

std::string emit(const SourceDockerfile& file) {
    std::string out;
    for (const auto& instruction : file.instructions) {
        out += instruction.render();
    }
    out += file.trailing_text;
    return out;
}

std::string ImageRef::repository() const {
    if (repository_prefix.empty()) {
        return name;
    }
    return repository_prefix + "/" + name;
}

std::string ImageRef::reference() const {
    if (has_variable) {
        return source_text;
    }
    std::string out = repository();
    if (tag) {
        out += ":" + *tag;
    }
    if (digest) {
        out += "@" + *digest;
    }
    return out;
}

ImageRef parse_image_ref(std::string_view text) {
    ImageRef ref;
    auto tokens = split_ws(text);
    std::size_t t = 0;
    while (t < tokens.size() && tokens[t].starts_with("--")) {
        ref.flags.emplace_back(tokens[t]);
        ++t;
    }
    if (t >= tokens.size()) {
        throw Error(ErrorCode::EmptyReference, "no image reference in '" + std::string(text) + "'");
    }
    std::string_view token = tokens[t++];
    if (t + 1 < tokens.size() && iequals(tokens[t], "AS")) {
        ref.stage_alias = std::string(tokens[t + 1]);
    }

    ref.source_text = std::string(token);
    ref.has_variable = token.find('$') != std::string_view::npos;

    std::string_view rest = token;
    if (auto at = rest.find('@'); at != std::string_view::npos) {
        ref.digest = std::string(rest.substr(at + 1));
        rest = rest.substr(0, at);
    }
    // The tag separator is only searched after the last '/', so a registry
    // port such as host:5000/img is not mistaken for a tag.
    auto slash = rest.rfind('/');
    std::string_view last = slash == std::string_view::npos ? rest : rest.substr(slash + 1);
    if (slash != std::string_view::npos) {
        ref.repository_prefix = std::string(rest.substr(0, slash));
    }
    if (auto colon = last.rfind(':'); colon != std::string_view::npos) {
        ref.tag = std::string(last.substr(colon + 1));
        last = last.substr(0, colon);
    }
    ref.name = std::string(last);
    return ref;
}

std::string render_from_arguments(const ImageRef& ref) {
    std::string out;
    for (const auto& flag : ref.flags) {
        out += flag;
        out += ' ';
    }
    out += ref.reference();
    if (ref.stage_alias) {
        out += " AS " + *ref.stage_alias;
    }
    return out;
}

std::vector<std::size_t> from_indices(const SourceDockerfile& file) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < file.instructions.size(); ++i) {
        if (file.instructions[i].kind() == InstructionKind::From) {
            out.push_back(i);
        }
    }
    return out;
}

std::vector<ImageRef> extract_base_images(const SourceDockerfile& file) {
    std::vector<ImageRef> out;
    for (auto index : from_indices(file)) {
        out.push_back(parse_image_ref(file.instructions[index].arguments()));
    }
    return out;
}

} // namespace pobs::dockerfile
