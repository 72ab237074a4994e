#include "pobs/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "pobs/dockerfile.hpp"
#include "pobs/error.hpp"

namespace fs = std::filesystem;

namespace pobs::corpus {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

bool read_file(const fs::path& path, std::string& out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        return false;
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    if (in.bad()) {
        return false;
    }
    out = buffer.str();
    return true;
}

std::string fixed(double value, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
    return buf;
}

bool is_official(const dockerfile::ImageRef& ref, const std::set<std::string>& allowlist) {
    if (ref.has_variable) {
        return false;
    }
    return allowlist.contains(ref.repository()) || allowlist.contains(ref.reference());
}

} // namespace

double coverage_fraction(std::size_t covered, std::size_t total) {
    if (total == 0) {
        return 0.0;
    }
    return static_cast<double>(covered) / static_cast<double>(total);
}

double CorpusStats::coverage(std::size_t k) const {
    std::size_t covered = 0;
    for (std::size_t i = 0; i < k && i < frequency_table.size(); ++i) {
        covered += frequency_table[i].second;
    }
    return coverage_fraction(covered, from_count);
}

bool is_dockerfile_name(const fs::path& path) {
    const auto name = path.filename().string();
    return name == "Dockerfile" || lower(path.extension().string()) == ".dockerfile";
}

std::set<std::string> load_allowlist(const fs::path& path) {
    std::string text;
    if (!read_file(path, text)) {
        throw Error(ErrorCode::IoError, "cannot read allowlist " + path.string());
    }
    std::set<std::string> out;
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
        auto begin = line.find_first_not_of(" \t\r");
        if (begin == std::string::npos || line[begin] == '#') {
            continue;
        }
        auto end = line.find_last_not_of(" \t\r");
        out.insert(line.substr(begin, end - begin + 1));
    }
    return out;
}

CorpusStats scan_corpus(const fs::path& root, std::size_t k, const std::set<std::string>& official_allowlist) {
    if (k == 0) {
        throw Error(ErrorCode::InvalidArgument, "top-k must be at least 1");
    }
    std::error_code ec;
    if (!fs::is_directory(root, ec)) {
        throw Error(ErrorCode::IoError, "corpus root is not a directory: " + root.string());
    }

    // Sorted traversal keeps the output independent of directory order.
    std::vector<fs::path> files;
    for (auto it = fs::recursive_directory_iterator(root, fs::directory_options::skip_permission_denied, ec);
         it != fs::recursive_directory_iterator(); it.increment(ec)) {
        if (ec) {
            break;
        }
        if (it->is_regular_file(ec) && is_dockerfile_name(it->path())) {
            files.push_back(it->path());
        }
    }
    std::sort(files.begin(), files.end());

    CorpusStats stats;
    stats.top_k = k;
    std::map<std::string, std::size_t> counts;
    for (const auto& path : files) {
        std::string text;
        if (!read_file(path, text)) {
            stats.skipped.push_back(path.lexically_relative(root).generic_string());
            continue;
        }
        auto relative = path.lexically_relative(root);
        std::string repo = ".";
        if (std::distance(relative.begin(), relative.end()) > 1) {
            repo = relative.begin()->string();
        }
        ++stats.dockerfile_count;
        ++stats.per_repo_counts[repo];

        for (const auto& ref : dockerfile::extract_base_images(dockerfile::parse(text))) {
            auto key = ref.reference();
            ++counts[key];
            ++stats.from_count;
            stats.official_flags[key] = is_official(ref, official_allowlist);
        }
    }

    stats.frequency_table.assign(counts.begin(), counts.end());
    std::stable_sort(stats.frequency_table.begin(), stats.frequency_table.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    stats.unique_image_count = stats.frequency_table.size();
    stats.topk_coverage = stats.coverage(k);
    return stats;
}

std::string render_stats(const CorpusStats& stats, StatsFormat format) {
    std::vector<std::array<std::string, 5>> rows;
    rows.push_back({"rank", "image", "count", "official", "cumulative_coverage"});
    std::size_t cumulative = 0;
    for (std::size_t i = 0; i < stats.frequency_table.size(); ++i) {
        const auto& [image, count] = stats.frequency_table[i];
        cumulative += count;
        auto flag = stats.official_flags.find(image);
        bool official = flag != stats.official_flags.end() && flag->second;
        rows.push_back({std::to_string(i + 1), image, std::to_string(count), official ? "true" : "false",
                        fixed(coverage_fraction(cumulative, stats.from_count), 4)});
    }

    std::string out;
    if (format == StatsFormat::Csv) {
        for (const auto& row : rows) {
            for (std::size_t c = 0; c < row.size(); ++c) {
                if (c) {
                    out += ',';
                }
                out += row[c];
            }
            out += '\n';
        }
        return out;
    }

    std::array<std::size_t, 5> width{};
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            width[c] = std::max(width[c], row[c].size());
        }
    }
    for (const auto& row : rows) {
        std::string line;
        for (std::size_t c = 0; c < row.size(); ++c) {
            // Text columns left-aligned, numbers right-aligned.
            bool left = c == 1 || c == 3;
            std::string pad(width[c] - row[c].size(), ' ');
            line += left ? row[c] + pad : pad + row[c];
            if (c + 1 < row.size()) {
                line += "  ";
            }
        }
        while (!line.empty() && line.back() == ' ') {
            line.pop_back();
        }
        out += line + '\n';
    }
    return out;
}

std::string render_summary(const CorpusStats& stats) {
    std::ostringstream out;
    out << "dockerfiles: " << stats.dockerfile_count << '\n'
        << "repositories: " << stats.per_repo_counts.size() << '\n'
        << "from_instructions: " << stats.from_count << '\n'
        << "unique_images: " << stats.unique_image_count << '\n'
        << "top" << stats.top_k << "_coverage: " << fixed(stats.topk_coverage * 100.0, 1) << "%\n"
        << "skipped: " << stats.skipped.size() << '\n';
    return out.str();
}

} // namespace pobs::corpus
