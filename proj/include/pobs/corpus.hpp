#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace pobs::corpus {

/// Base-image frequency statistics over a directory tree of Dockerfiles.
struct CorpusStats {
    std::size_t dockerfile_count = 0;
    /// First-level subdirectory name -> number of Dockerfiles. Files directly
    /// under the root are counted under ".".
    std::map<std::string, std::size_t> per_repo_counts;
    std::size_t from_count = 0;
    std::size_t unique_image_count = 0;
    /// Sorted by count descending, ties broken lexicographically.
    std::vector<std::pair<std::string, std::size_t>> frequency_table;
    std::size_t top_k = 0;
    double topk_coverage = 0.0;
    std::map<std::string, bool> official_flags;
    /// Files that could not be read.
    std::vector<std::string> skipped;

    /// Share of all FROM references covered by the `k` most frequent images.
    double coverage(std::size_t k) const;
};

/// covered / total, or 0 when total is 0.
double coverage_fraction(std::size_t covered, std::size_t total);

bool is_dockerfile_name(const std::filesystem::path& path);

/// One image name per line; blank lines and `#` comments ignored.
std::set<std::string> load_allowlist(const std::filesystem::path& path);

CorpusStats scan_corpus(const std::filesystem::path& root, std::size_t k,
                        const std::set<std::string>& official_allowlist = {});

enum class StatsFormat { Csv, Table };

/// Columns: rank, image, count, official, cumulative coverage.
std::string render_stats(const CorpusStats& stats, StatsFormat format);

/// A few `key: value` lines with the corpus totals.
std::string render_summary(const CorpusStats& stats);

} // namespace pobs::corpus
