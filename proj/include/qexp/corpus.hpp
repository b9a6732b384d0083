#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace qexp {

/// Raised for unreadable or malformed corpus input. The message names the
/// offending line (1-based) or document id.
class CorpusError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Document {
    std::string doc_id;
    std::string text;
};

enum class CorpusFormat { jsonl, tsv };

CorpusFormat parse_corpus_format(std::string_view name);
std::string_view to_string(CorpusFormat format);

/// An immutable, ordered document collection with id lookup.
class Corpus {
public:
    Corpus() = default;
    explicit Corpus(std::vector<Document> docs, std::string source_path = {});

    [[nodiscard]] std::size_t doc_count() const noexcept { return docs_.size(); }
    [[nodiscard]] bool empty() const noexcept { return docs_.empty(); }
    [[nodiscard]] const std::vector<Document>& docs() const noexcept { return docs_; }
    [[nodiscard]] const Document& operator[](std::size_t ordinal) const { return docs_.at(ordinal); }
    [[nodiscard]] const std::string& source_path() const noexcept { return source_path_; }

    [[nodiscard]] std::optional<std::size_t> ordinal_of(std::string_view doc_id) const;
    /// Text for `doc_id`, or nullptr when the id is unknown.
    [[nodiscard]] const std::string* find_text(std::string_view doc_id) const;

private:
    std::vector<Document> docs_;
    std::unordered_map<std::string, std::size_t> by_id_;
    std::string source_path_;
};

/// Reads a corpus file.
///
/// jsonl: one object per line with string fields "id" and "contents"
/// (blank lines are skipped). tsv: "id<TAB>text" with no header; the text is
/// everything after the first tab, with a trailing carriage return removed.
/// Throws CorpusError on malformed lines or duplicate ids.
Corpus ingest_corpus(const std::filesystem::path& path, CorpusFormat format);

/// Keeps the first `max_tokens` whitespace-delimited tokens, rejoined with
/// single spaces.
std::string truncate_text(std::string_view text, std::size_t max_tokens);

/// Whitespace-delimited tokens of `text`.
std::vector<std::string_view> split_whitespace(std::string_view text);

std::size_t word_count(std::string_view text);

}  // namespace qexp
