#include "qexp/corpus.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace qexp {

namespace {

bool is_space(char c)
{
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_blank(std::string_view line)
{
    for (char c : line) {
        if (!is_space(c)) {
            return false;
        }
    }
    return true;
}

[[noreturn]] void malformed(const std::filesystem::path& path, std::size_t line_no, std::string_view why)
{
    std::ostringstream os;
    os << path.string() << ":" << line_no << ": malformed line: " << why;
    throw CorpusError(os.str());
}

Document parse_jsonl_line(const std::filesystem::path& path, std::size_t line_no, const std::string& line)
{
    nlohmann::json obj;
    try {
        obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        malformed(path, line_no, e.what());
    }
    if (!obj.is_object()) {
        malformed(path, line_no, "expected a JSON object");
    }
    auto id = obj.find("id");
    auto contents = obj.find("contents");
    if (id == obj.end() || contents == obj.end()) {
        malformed(path, line_no, "missing \"id\" or \"contents\"");
    }
    Document doc;
    if (id->is_string()) {
        doc.doc_id = id->get<std::string>();
    } else if (id->is_number_integer()) {
        doc.doc_id = id->dump();
    } else {
        malformed(path, line_no, "\"id\" must be a string");
    }
    if (!contents->is_string()) {
        malformed(path, line_no, "\"contents\" must be a string");
    }
    doc.text = contents->get<std::string>();
    return doc;
}

Document parse_tsv_line(const std::filesystem::path& path, std::size_t line_no, std::string line)
{
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
    auto tab = line.find('\t');
    if (tab == std::string::npos) {
        malformed(path, line_no, "expected id<TAB>text");
    }
    return Document{line.substr(0, tab), line.substr(tab + 1)};
}

}  // namespace

CorpusFormat parse_corpus_format(std::string_view name)
{
    if (name == "jsonl") {
        return CorpusFormat::jsonl;
    }
    if (name == "tsv") {
        return CorpusFormat::tsv;
    }
    throw std::invalid_argument("unknown corpus format: " + std::string(name));
}

std::string_view to_string(CorpusFormat format)
{
    return format == CorpusFormat::jsonl ? "jsonl" : "tsv";
}

Corpus::Corpus(std::vector<Document> docs, std::string source_path)
    : docs_(std::move(docs)), source_path_(std::move(source_path))
{
    by_id_.reserve(docs_.size());
    for (std::size_t i = 0; i < docs_.size(); ++i) {
        if (docs_[i].doc_id.empty()) {
            throw CorpusError("empty document id at position " + std::to_string(i + 1));
        }
        if (!by_id_.emplace(docs_[i].doc_id, i).second) {
            throw CorpusError("duplicate document id: " + docs_[i].doc_id);
        }
    }
}

std::optional<std::size_t> Corpus::ordinal_of(std::string_view doc_id) const
{
    auto it = by_id_.find(std::string(doc_id));
    if (it == by_id_.end()) {
        return std::nullopt;
    }
    return it->second;
}

const std::string* Corpus::find_text(std::string_view doc_id) const
{
    auto ordinal = ordinal_of(doc_id);
    return ordinal ? &docs_[*ordinal].text : nullptr;
}

Corpus ingest_corpus(const std::filesystem::path& path, CorpusFormat format)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw CorpusError("cannot open corpus file: " + path.string());
    }
    std::vector<Document> docs;
    std::unordered_map<std::string, std::size_t> first_seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank(line)) {
            continue;
        }
        Document doc = format == CorpusFormat::jsonl ? parse_jsonl_line(path, line_no, line)
                                                     : parse_tsv_line(path, line_no, line);
        if (doc.doc_id.empty()) {
            malformed(path, line_no, "empty document id");
        }
        auto [it, inserted] = first_seen.emplace(doc.doc_id, line_no);
        if (!inserted) {
            std::ostringstream os;
            os << path.string() << ":" << line_no << ": duplicate document id \"" << doc.doc_id
               << "\" (first seen on line " << it->second << ")";
            throw CorpusError(os.str());
        }
        docs.push_back(std::move(doc));
    }
    return Corpus(std::move(docs), path.string());
}

std::vector<std::string_view> split_whitespace(std::string_view text)
{
    std::vector<std::string_view> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_space(text[i])) {
            ++i;
        }
        std::size_t start = i;
        while (i < text.size() && !is_space(text[i])) {
            ++i;
        }
        if (i > start) {
            tokens.push_back(text.substr(start, i - start));
        }
    }
    return tokens;
}

std::size_t word_count(std::string_view text)
{
    return split_whitespace(text).size();
}

std::string truncate_text(std::string_view text, std::size_t max_tokens)
{
    std::string out;
    std::size_t kept = 0;
    for (auto token : split_whitespace(text)) {
        if (kept == max_tokens) {
            break;
        }
        if (kept > 0) {
            out.push_back(' ');
        }
        out.append(token);
        ++kept;
    }
    return out;
}

}  // namespace qexp
