#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "error.hpp"

namespace qrl {

using doc_id = std::uint64_t;
using query_id = std::uint64_t;
using token_seq = std::vector<std::string>;

/// Lowercases and splits on every non-alphanumeric byte. Bytes >= 0x80 are
/// treated as separators, so non-ASCII text never produces tokens.
inline token_seq tokenize(std::string_view text) {
    token_seq out;
    std::string cur;
    for (char ch : text) {
        auto c = static_cast<unsigned char>(ch);
        if (c < 0x80 && std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) {
        out.push_back(std::move(cur));
    }
    return out;
}

inline std::string join(const token_seq& tokens, std::string_view sep = " ") {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += sep;
        out += tokens[i];
    }
    return out;
}

struct Document {
    doc_id id = 0;
    token_seq title;
    token_seq body;

    /// Title followed by body; this is what gets indexed and what the
    /// candidate pool reads its "first M words" from.
    token_seq text() const {
        token_seq all = title;
        all.insert(all.end(), body.begin(), body.end());
        return all;
    }

    bool operator==(const Document&) const = default;
};

/// Immutable-after-construction document collection with unique ids.
class Corpus {
  public:
    Corpus() = default;

    explicit Corpus(std::vector<Document> docs) {
        for (auto& d : docs) add(std::move(d));
    }

    void add(Document doc) {
        if (doc.body.empty()) {
            throw format_error("document " + std::to_string(doc.id) + " has an empty body");
        }
        if (!positions_.emplace(doc.id, docs_.size()).second) {
            throw format_error("duplicate document id " + std::to_string(doc.id));
        }
        docs_.push_back(std::move(doc));
    }

    std::size_t size() const { return docs_.size(); }
    bool empty() const { return docs_.empty(); }
    const std::vector<Document>& documents() const { return docs_; }
    bool contains(doc_id id) const { return positions_.count(id) != 0; }

    const Document& at(doc_id id) const {
        auto it = positions_.find(id);
        if (it == positions_.end()) {
            throw not_found("unknown document id " + std::to_string(id));
        }
        return docs_[it->second];
    }

    bool operator==(const Corpus& o) const { return docs_ == o.docs_; }

  private:
    std::vector<Document> docs_;
    std::unordered_map<doc_id, std::size_t> positions_;
};

struct QueryRecord {
    query_id qid = 0;
    token_seq tokens;
    std::vector<doc_id> relevant_ids;  // sorted, unique

    bool operator==(const QueryRecord&) const = default;
};

struct DatasetSplit {
    std::vector<QueryRecord> train;
    std::vector<QueryRecord> valid;
    std::vector<QueryRecord> test;

    std::size_t size() const { return train.size() + valid.size() + test.size(); }

    std::vector<QueryRecord>& split(std::string_view name) {
        if (name == "train") return train;
        if (name == "valid") return valid;
        if (name == "test") return test;
        throw invalid_argument("unknown split '" + std::string(name) + "'");
    }
    const std::vector<QueryRecord>& split(std::string_view name) const {
        return const_cast<DatasetSplit*>(this)->split(name);
    }
};

/// Dense token <-> id mapping.
class Vocabulary {
  public:
    std::uint32_t add(const std::string& token) {
        auto [it, inserted] = ids_.emplace(token, static_cast<std::uint32_t>(tokens_.size()));
        if (inserted) tokens_.push_back(token);
        return it->second;
    }

    /// Returns size() for unknown tokens.
    std::uint32_t find(const std::string& token) const {
        auto it = ids_.find(token);
        return it == ids_.end() ? static_cast<std::uint32_t>(tokens_.size()) : it->second;
    }

    bool contains(const std::string& token) const { return ids_.count(token) != 0; }
    const std::string& token(std::uint32_t id) const { return tokens_.at(id); }
    std::size_t size() const { return tokens_.size(); }
    const std::vector<std::string>& tokens() const { return tokens_; }

  private:
    std::unordered_map<std::string, std::uint32_t> ids_;
    std::vector<std::string> tokens_;
};

namespace detail {

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw not_found("no such file: " + path);
    return in;
}

inline std::string where(const std::string& path, std::size_t line) {
    return path + ":" + std::to_string(line) + ": ";
}

template <typename T>
T get_field(const nlohmann::json& rec, const char* key, const std::string& loc) {
    if (!rec.is_object() || !rec.contains(key)) {
        throw format_error(loc + "missing field '" + key + "'");
    }
    try {
        return rec.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw format_error(loc + "field '" + key + "' has the wrong type");
    }
}

inline bool blank(const std::string& line) {
    return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace detail

/// Reads a JSON-lines corpus: {"id": int, "title": str, "text": str} per line.
inline Corpus load_corpus(const std::string& path) {
    auto in = detail::open_input(path);
    Corpus corpus;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::blank(line)) continue;
        auto loc = detail::where(path, lineno);
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw format_error(loc + "malformed record: " + e.what());
        }
        auto id = detail::get_field<std::int64_t>(rec, "id", loc);
        if (id < 0) throw format_error(loc + "negative document id");
        Document doc;
        doc.id = static_cast<doc_id>(id);
        doc.title = tokenize(rec.contains("title") ? detail::get_field<std::string>(rec, "title", loc) : "");
        doc.body = tokenize(detail::get_field<std::string>(rec, "text", loc));
        if (doc.body.empty()) {
            throw format_error(loc + "document " + std::to_string(id) + " text tokenizes to nothing");
        }
        if (corpus.contains(doc.id)) {
            throw format_error(loc + "duplicate document id " + std::to_string(id));
        }
        corpus.add(std::move(doc));
    }
    return corpus;
}

inline void write_corpus(const Corpus& corpus, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw error("cannot write " + path);
    for (const auto& d : corpus.documents()) {
        nlohmann::json rec = {{"id", d.id}, {"title", join(d.title)}, {"text", join(d.body)}};
        out << rec.dump() << '\n';
    }
}

/// Reads a JSON-lines query file: {"qid": int, "query": str,
/// "relevant_ids": [int], "split": "train"|"valid"|"test"} per line.
/// A missing split field means "train".
inline DatasetSplit load_dataset(const std::string& path, const Corpus& corpus) {
    auto in = detail::open_input(path);
    DatasetSplit split;
    std::unordered_set<query_id> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::blank(line)) continue;
        auto loc = detail::where(path, lineno);
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw format_error(loc + "malformed record: " + e.what());
        }
        auto qid = detail::get_field<std::int64_t>(rec, "qid", loc);
        if (qid < 0) throw format_error(loc + "negative qid");
        QueryRecord q;
        q.qid = static_cast<query_id>(qid);
        q.tokens = tokenize(detail::get_field<std::string>(rec, "query", loc));
        if (q.tokens.empty()) throw format_error(loc + "query " + std::to_string(qid) + " is empty");
        auto rel = detail::get_field<std::vector<std::int64_t>>(rec, "relevant_ids", loc);
        if (rel.empty()) {
            throw format_error(loc + "query " + std::to_string(qid) + " has no relevant documents");
        }
        for (auto id : rel) {
            if (id < 0 || !corpus.contains(static_cast<doc_id>(id))) {
                throw format_error(loc + "query " + std::to_string(qid) +
                                   " references unknown document " + std::to_string(id));
            }
            q.relevant_ids.push_back(static_cast<doc_id>(id));
        }
        std::sort(q.relevant_ids.begin(), q.relevant_ids.end());
        q.relevant_ids.erase(std::unique(q.relevant_ids.begin(), q.relevant_ids.end()), q.relevant_ids.end());
        if (!seen.insert(q.qid).second) {
            throw format_error(loc + "duplicate qid " + std::to_string(qid));
        }
        std::string name = rec.contains("split") ? detail::get_field<std::string>(rec, "split", loc) : "train";
        if (name != "train" && name != "valid" && name != "test") {
            throw format_error(loc + "unknown split '" + name + "'");
        }
        split.split(name).push_back(std::move(q));
    }
    return split;
}

inline void write_dataset(const DatasetSplit& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw error("cannot write " + path);
    for (const char* name : {"train", "valid", "test"}) {
        for (const auto& q : data.split(name)) {
            nlohmann::json rec = {
                {"qid", q.qid}, {"query", join(q.tokens)}, {"relevant_ids", q.relevant_ids}, {"split", name}};
            out << rec.dump() << '\n';
        }
    }
}

/// Converts a paragraph dump ("<id>\t<text>" or "<id>\t<title>\t<text>" per
/// line, ids arbitrary strings) to the native corpus format. Returns the
/// string-id -> integer-id mapping, assigned in file order.
inline std::vector<std::pair<std::string, doc_id>> convert_paragraphs(const std::string& in_path,
                                                                      const std::string& out_path) {
    auto in = detail::open_input(in_path);
    std::ofstream out(out_path);
    if (!out) throw error("cannot write " + out_path);
    std::vector<std::pair<std::string, doc_id>> mapping;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::blank(line)) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, '\t')) fields.push_back(f);
        if (fields.size() < 2 || fields.size() > 3) {
            throw format_error(detail::where(in_path, lineno) + "expected 2 or 3 tab-separated fields");
        }
        if (!seen.insert(fields[0]).second) {
            throw format_error(detail::where(in_path, lineno) + "duplicate paragraph id " + fields[0]);
        }
        std::string title = fields.size() == 3 ? fields[1] : "";
        const std::string& text = fields.back();
        if (tokenize(text).empty()) continue;  // nothing indexable
        doc_id id = mapping.size();
        mapping.emplace_back(fields[0], id);
        out << nlohmann::json({{"id", id}, {"title", title}, {"text", text}}).dump() << '\n';
    }
    return mapping;
}

/// Converts a topics file ("<qid>\t<query text>") plus a TREC qrels file
/// ("<qid> <iter> <docid> <rel>") to the native dataset format. Document ids
/// in the qrels are resolved through the mapping from convert_paragraphs;
/// unresolved or non-positive judgements are skipped, as are queries left
/// with no relevant document. Query ids are first_qid plus the topic's line
/// number minus one; `append` adds to an existing file, e.g. another split.
inline std::size_t convert_queries(const std::string& topics_path, const std::string& qrels_path,
                                   const std::vector<std::pair<std::string, doc_id>>& mapping,
                                   const std::string& split, const std::string& out_path, query_id first_qid = 0,
                                   bool append = false) {
    std::unordered_map<std::string, doc_id> ids(mapping.begin(), mapping.end());
    std::unordered_map<std::string, std::vector<doc_id>> rel;
    {
        auto in = detail::open_input(qrels_path);
        std::string q, iter, d;
        int grade = 0;
        while (in >> q >> iter >> d >> grade) {
            auto it = ids.find(d);
            if (grade > 0 && it != ids.end()) rel[q].push_back(it->second);
        }
    }
    auto in = detail::open_input(topics_path);
    std::ofstream out(out_path, append ? std::ios::app : std::ios::trunc);
    if (!out) throw error("cannot write " + out_path);
    std::string line;
    std::size_t lineno = 0, written = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::blank(line)) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw format_error(detail::where(topics_path, lineno) + "expected '<qid>\\t<query>'");
        }
        std::string name = line.substr(0, tab);
        auto it = rel.find(name);
        if (it == rel.end() || tokenize(line.substr(tab + 1)).empty()) continue;
        auto docs = it->second;
        std::sort(docs.begin(), docs.end());
        docs.erase(std::unique(docs.begin(), docs.end()), docs.end());
        out << nlohmann::json({{"qid", first_qid + lineno - 1}, {"query", line.substr(tab + 1)}, {"relevant_ids", docs},
                               {"split", split}})
                   .dump()
            << '\n';
        ++written;
    }
    return written;
}

}  // namespace qrl
