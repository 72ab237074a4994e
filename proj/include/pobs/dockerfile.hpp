#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pobs::dockerfile {

enum class InstructionKind {
    From,
    Run,
    Copy,
    Add,
    Env,
    User,
    Expose,
    Entrypoint,
    Cmd,
    Workdir,
    Arg,
    Label,
    Volume,
    Other,
};

std::string_view to_string(InstructionKind kind);

/// 1-based inclusive range of physical lines.
struct LineRange {
    std::size_t first = 0;
    std::size_t last = 0;
};

/// One instruction together with the comments and blank lines that precede it.
///
/// `raw_span` holds the exact source bytes: the leading trivia (comments, blank
/// lines, parser directives) followed by every physical line of the
/// instruction, continuation lines included. `line_range` covers only the
/// instruction's own lines, not the trivia.
class Instruction {
public:
    Instruction() = default;
    Instruction(InstructionKind kind, std::string keyword, std::string arguments, std::string raw_span,
                std::size_t trivia_length, LineRange lines);

    InstructionKind kind() const noexcept { return kind_; }
    /// Keyword exactly as written (case preserved); empty for blank OTHER content.
    const std::string& keyword() const noexcept { return keyword_; }
    /// Logical argument text with continuations joined and surrounding whitespace trimmed.
    const std::string& arguments() const noexcept { return arguments_; }
    const std::string& raw_span() const noexcept { return raw_span_; }
    std::string_view leading_trivia() const noexcept;
    LineRange line_range() const noexcept { return lines_; }
    bool modified() const noexcept { return modified_; }

    /// Replaces the logical arguments. The instruction is re-rendered in
    /// canonical single-line form on emit; its leading trivia is kept.
    void set_arguments(std::string arguments);

    /// Bytes this instruction contributes to the emitted file.
    std::string render() const;

private:
    InstructionKind kind_ = InstructionKind::Other;
    std::string keyword_;
    std::string arguments_;
    std::string raw_span_;
    std::size_t trivia_length_ = 0;
    LineRange lines_;
    bool modified_ = false;
};

struct SourceDockerfile {
    std::vector<Instruction> instructions;
    /// Comments and blank lines after the last instruction.
    std::string trailing_text;
};

/// Parsed image reference from a FROM instruction.
struct ImageRef {
    /// Path segments before the final name, e.g. "registry:5000/org". Empty when absent.
    std::string repository_prefix;
    std::string name;
    std::optional<std::string> tag;
    std::optional<std::string> digest;
    bool has_variable = false;
    std::optional<std::string> stage_alias;
    /// Leading `--flag=value` options of the FROM instruction (e.g. --platform).
    std::vector<std::string> flags;
    /// The reference token exactly as written.
    std::string source_text;

    /// prefix/name without tag or digest.
    std::string repository() const;
    /// repository[:tag][@digest]; the source text for variable-bearing references.
    std::string reference() const;

    friend bool operator==(const ImageRef&, const ImageRef&) = default;
};

/// Total parser: never fails, unknown or malformed lines become InstructionKind::Other.
SourceDockerfile parse(std::string_view bytes);

/// emit(parse(x)) == x for every input.
std::string emit(const SourceDockerfile& file);

/// Parses a FROM argument (`[--flag=v ...] ref [AS alias]`) or a bare reference.
/// Throws Error(EmptyReference) when no reference token is present.
ImageRef parse_image_ref(std::string_view text);

/// Renders `ref` back to FROM argument text, including flags and alias.
std::string render_from_arguments(const ImageRef& ref);

/// One reference per FROM instruction in source order.
std::vector<ImageRef> extract_base_images(const SourceDockerfile& file);

/// Indices of FROM instructions in `file.instructions`.
std::vector<std::size_t> from_indices(const SourceDockerfile& file);

} // namespace pobs::dockerfile
