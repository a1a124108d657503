// SPDX-License-Identifier: Apache-2.0
#pragma once

// Dataset ingestion, text normalization, vocabulary and fixed-length encoding.

#include <algorithm>
#include <array>
#include <clocale>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <locale.h>
#include <map>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>
#include <wctype.h>

#include <json.hpp>

#include "descnet/error.hpp"
#include "descnet/rng.hpp"

namespace descnet {

enum class TaskMode { multi_class, multi_label };

inline std::string to_string(TaskMode mode) {
  return mode == TaskMode::multi_class ? "multi_class" : "multi_label";
}

inline TaskMode parse_task_mode(std::string_view s) {
  if (s == "multi_class") return TaskMode::multi_class;
  if (s == "multi_label") return TaskMode::multi_label;
  throw InputError("unknown mode '" + std::string(s) + "' (expected multi_class or multi_label)");
}

class LabelSpace {
 public:
  LabelSpace(std::vector<std::string> names, TaskMode mode) : names_(std::move(names)), mode_(mode) {
    if (names_.empty()) throw InputError("label space is empty");
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (names_[i].empty()) throw InputError("empty label name");
      if (!index_.emplace(names_[i], i).second) throw InputError("duplicate label '" + names_[i] + "'");
    }
  }

  const std::vector<std::string>& names() const { return names_; }
  TaskMode mode() const { return mode_; }
  std::size_t size() const { return names_.size(); }
  const std::string& name(std::size_t i) const { return names_.at(i); }

  /// Index of `name`, or size() when unknown.
  std::size_t find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    return it == index_.end() ? names_.size() : it->second;
  }

  bool operator==(const LabelSpace& other) const { return names_ == other.names_ && mode_ == other.mode_; }

 private:
  std::vector<std::string> names_;
  TaskMode mode_;
  std::map<std::string, std::size_t> index_;
};

struct Document {
  std::int64_t id = 0;
  std::string text;
  std::vector<std::string> tokens;
  std::vector<std::size_t> labels;  // sorted, unique

  bool has_label(std::size_t label) const { return std::binary_search(labels.begin(), labels.end(), label); }
};

using Corpus = std::vector<Document>;

// ---------------------------------------------------------------------------
// Text normalization

namespace detail {

inline locale_t utf8_locale() {
  static const locale_t loc = [] {
    locale_t l = newlocale(LC_CTYPE_MASK, "C.UTF-8", static_cast<locale_t>(0));
    if (l == static_cast<locale_t>(0)) l = newlocale(LC_CTYPE_MASK, "C.utf8", static_cast<locale_t>(0));
    return l;
  }();
  return loc;
}

/// Decodes UTF-8; malformed bytes become U+FFFD.
inline std::u32string decode_utf8(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    int len = 0;
    char32_t cp = 0;
    if (b0 < 0x80) {
      len = 1;
      cp = b0;
    } else if ((b0 & 0xE0) == 0xC0) {
      len = 2;
      cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3;
      cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4;
      cp = b0 & 0x07;
    }
    bool ok = len > 0 && i + len <= s.size();
    for (int k = 1; ok && k < len; ++k) {
      const auto b = static_cast<unsigned char>(s[i + k]);
      if ((b & 0xC0) != 0x80) ok = false;
      cp = (cp << 6) | (b & 0x3F);
    }
    if (!ok) {
      out.push_back(U'�');
      ++i;
      continue;
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

inline void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

inline char32_t to_lower(char32_t cp) {
  if (cp < 0x80) return (cp >= U'A' && cp <= U'Z') ? cp + 32 : cp;
  const locale_t loc = utf8_locale();
  if (loc == static_cast<locale_t>(0)) return cp;
  return static_cast<char32_t>(towlower_l(static_cast<wint_t>(cp), loc));
}

inline bool is_alnum(char32_t cp) {
  if (cp < 0x80) return (cp >= U'a' && cp <= U'z') || (cp >= U'A' && cp <= U'Z') || (cp >= U'0' && cp <= U'9');
  const locale_t loc = utf8_locale();
  if (loc == static_cast<locale_t>(0)) return false;
  return iswalnum_l(static_cast<wint_t>(cp), loc) != 0;
}

}  // namespace detail

/// Minimum run length of one repeated character that gets squeezed to a
/// single character ("yoooouuuuu" -> "you", "good" stays).
inline constexpr std::size_t kSqueezeRunLength = 3;

/// lowercase -> squeeze runs -> non-alphanumerics to spaces -> split.
inline std::vector<std::string> preprocess_text(std::string_view text) {
  std::u32string cps = detail::decode_utf8(text);
  for (auto& cp : cps) cp = detail::to_lower(cp);

  std::u32string squeezed;
  squeezed.reserve(cps.size());
  for (std::size_t i = 0; i < cps.size();) {
    std::size_t j = i;
    while (j < cps.size() && cps[j] == cps[i]) ++j;
    const std::size_t run = j - i;
    squeezed.append(run >= kSqueezeRunLength ? 1 : run, cps[i]);
    i = j;
  }

  std::vector<std::string> tokens;
  std::string current;
  for (char32_t cp : squeezed) {
    if (detail::is_alnum(cp)) {
      detail::append_utf8(current, cp);
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

inline Document make_document(std::int64_t id, std::string text, std::vector<std::size_t> labels) {
  Document doc;
  doc.id = id;
  doc.tokens = preprocess_text(text);
  doc.text = std::move(text);
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  doc.labels = std::move(labels);
  return doc;
}

// ---------------------------------------------------------------------------
// Vocabulary

class Vocabulary {
 public:
  static constexpr std::int32_t kPadId = 0;
  static constexpr std::int32_t kOovId = 1;
  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kOovToken = "<oov>";

  explicit Vocabulary(std::size_t max_size) : max_size_(max_size) {
    if (max_size < 3) throw InputError("vocabulary max_size must be at least 3");
    add(std::string(kPadToken), 0);
    add(std::string(kOovToken), 0);
  }

  /// Appends a token with the next free id. Returns that id.
  std::int32_t add(const std::string& token, std::int64_t doc_frequency) {
    if (id_to_token_.size() >= max_size_) throw InputError("vocabulary is full");
    if (token_to_id_.count(token) != 0) throw InputError("duplicate vocabulary token '" + token + "'");
    const auto id = static_cast<std::int32_t>(id_to_token_.size());
    token_to_id_.emplace(token, id);
    id_to_token_.push_back(token);
    doc_frequency_.push_back(doc_frequency);
    return id;
  }

  std::int32_t id(std::string_view token) const {
    auto it = token_to_id_.find(std::string(token));
    return it == token_to_id_.end() ? kOovId : it->second;
  }
  bool contains(std::string_view token) const { return token_to_id_.count(std::string(token)) != 0; }
  const std::string& token(std::int32_t id) const { return id_to_token_.at(static_cast<std::size_t>(id)); }
  std::int64_t doc_frequency(std::int32_t id) const { return doc_frequency_.at(static_cast<std::size_t>(id)); }

  /// Ids in use, including the two reserved ones.
  std::size_t size() const { return id_to_token_.size(); }
  std::size_t max_size() const { return max_size_; }
  const std::vector<std::string>& tokens() const { return id_to_token_; }

  /// One `token<TAB>id<TAB>doc_frequency` line per id, ascending.
  std::string serialize() const {
    std::ostringstream out;
    for (std::size_t i = 0; i < id_to_token_.size(); ++i) {
      out << id_to_token_[i] << '\t' << i << '\t' << doc_frequency_[i] << '\n';
    }
    return out.str();
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write vocabulary file '" + path + "'");
    out << serialize();
  }

  static Vocabulary parse(std::istream& in, std::size_t max_size, const std::string& origin) {
    std::vector<std::tuple<std::string, std::int64_t, std::int64_t>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const auto t1 = line.find('\t');
      const auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
      if (t2 == std::string::npos) throw InputError(origin + ":" + std::to_string(line_no) + ": expected token<TAB>id<TAB>doc_frequency");
      try {
        std::size_t used = 0;
        const std::string id_str = line.substr(t1 + 1, t2 - t1 - 1);
        const std::string df_str = line.substr(t2 + 1);
        const std::int64_t id = std::stoll(id_str, &used);
        if (used != id_str.size()) throw std::invalid_argument("id");
        const std::int64_t df = std::stoll(df_str, &used);
        if (used != df_str.size()) throw std::invalid_argument("df");
        rows.emplace_back(line.substr(0, t1), id, df);
      } catch (const std::logic_error&) {
        throw InputError(origin + ":" + std::to_string(line_no) + ": malformed id or doc_frequency");
      }
    }
    if (rows.size() < 2 || std::get<0>(rows[0]) != kPadToken || std::get<0>(rows[1]) != kOovToken) {
      throw InputError(origin + ": vocabulary must start with " + std::string(kPadToken) + " and " + std::string(kOovToken));
    }
    Vocabulary vocab(std::max(max_size, rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& [token, id, df] = rows[i];
      if (id != static_cast<std::int64_t>(i)) throw InputError(origin + ":" + std::to_string(i + 1) + ": ids must be contiguous from 0");
      if (i >= 2) vocab.add(token, df);
    }
    return vocab;
  }

  static Vocabulary load(const std::string& path, std::size_t max_size = 0) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open vocabulary file '" + path + "'");
    return parse(in, max_size, path);
  }

  bool operator==(const Vocabulary& other) const {
    return id_to_token_ == other.id_to_token_ && doc_frequency_ == other.doc_frequency_;
  }

 private:
  std::size_t max_size_;
  std::unordered_map<std::string, std::int32_t> token_to_id_;
  std::vector<std::string> id_to_token_;
  std::vector<std::int64_t> doc_frequency_;
};

/// Keeps the `max_size - 2` most frequent tokens by total occurrences;
/// equal counts are ordered lexicographically.
inline Vocabulary build_vocabulary(std::span<const Document> corpus, std::size_t max_size) {
  if (corpus.empty()) throw InputError("empty corpus");
  std::unordered_map<std::string, std::pair<std::int64_t, std::int64_t>> stats;  // count, df
  for (const auto& doc : corpus) {
    std::set<std::string_view> seen;
    for (const auto& tok : doc.tokens) {
      auto& s = stats[tok];
      ++s.first;
      if (seen.insert(tok).second) ++s.second;
    }
  }
  std::vector<std::pair<std::string_view, std::pair<std::int64_t, std::int64_t>>> ranked(stats.begin(), stats.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second.first != b.second.first) return a.second.first > b.second.first;
    return a.first < b.first;
  });
  Vocabulary vocab(max_size);
  const std::size_t keep = std::min(ranked.size(), max_size - 2);
  for (std::size_t i = 0; i < keep; ++i) vocab.add(std::string(ranked[i].first), ranked[i].second.second);
  return vocab;
}

/// Maps tokens to ids (unknown -> OOV), keeps the first `max_len`, right-pads with 0.
inline std::vector<std::int32_t> encode(std::span<const std::string> tokens, const Vocabulary& vocab, std::size_t max_len) {
  if (max_len == 0) throw InputError("max_len must be at least 1");
  std::vector<std::int32_t> ids(max_len, Vocabulary::kPadId);
  const std::size_t n = std::min(tokens.size(), max_len);
  for (std::size_t i = 0; i < n; ++i) ids[i] = vocab.id(tokens[i]);
  return ids;
}

/// Number of leading non-padding ids.
inline std::size_t valid_length(std::span<const std::int32_t> ids) {
  std::size_t n = 0;
  while (n < ids.size() && ids[n] != Vocabulary::kPadId) ++n;
  return n;
}

/// Removes documents with more than `max_len` tokens (the alternative to truncation).
inline Corpus drop_overlong(const Corpus& corpus, std::size_t max_len) {
  Corpus kept;
  for (const auto& doc : corpus) {
    if (doc.tokens.size() <= max_len) kept.push_back(doc);
  }
  return kept;
}

// ---------------------------------------------------------------------------
// Dataset files

enum class DatasetFormat { csv, tsv, jsonl };

inline DatasetFormat parse_dataset_format(std::string_view s) {
  if (s == "csv") return DatasetFormat::csv;
  if (s == "tsv") return DatasetFormat::tsv;
  if (s == "jsonl") return DatasetFormat::jsonl;
  throw InputError("unknown dataset format '" + std::string(s) + "' (expected csv, tsv or jsonl)");
}

/// Format implied by a file extension, defaulting to csv.
inline DatasetFormat infer_dataset_format(std::string_view path) {
  auto ends_with = [&](std::string_view suffix) {
    return path.size() >= suffix.size() && path.substr(path.size() - suffix.size()) == suffix;
  };
  if (ends_with(".tsv")) return DatasetFormat::tsv;
  if (ends_with(".jsonl")) return DatasetFormat::jsonl;
  return DatasetFormat::csv;
}

namespace detail {

struct DelimitedRecord {
  std::vector<std::string> fields;
  std::size_t line = 0;  // 1-based line where the record starts
};

/// RFC 4180 reader: quoted fields may hold separators, doubled quotes and newlines.
class DelimitedReader {
 public:
  DelimitedReader(std::istream& in, char sep, std::string origin) : in_(in), sep_(sep), origin_(std::move(origin)) {}

  bool next(DelimitedRecord& record) {
    record.fields.clear();
    int c = in_.get();
    if (c == EOF) return false;
    ++line_;
    record.line = line_;
    std::string field;
    bool quoted = false;
    bool field_started_quoted = false;
    bool after_quote = false;
    for (;; c = in_.get()) {
      if (quoted) {
        if (c == EOF) throw InputError(origin_ + ":" + std::to_string(record.line) + ": unterminated quoted field");
        if (c == '"') {
          if (in_.peek() == '"') {
            in_.get();
            field.push_back('"');
          } else {
            quoted = false;
            after_quote = true;
          }
        } else {
          if (c == '\n') ++line_;
          field.push_back(static_cast<char>(c));
        }
        continue;
      }
      if (c == EOF || c == '\n') {
        if (!field.empty() && field.back() == '\r' && !after_quote) field.pop_back();
        record.fields.push_back(std::move(field));
        return true;
      }
      if (c == '\r' && (in_.peek() == '\n' || in_.peek() == EOF)) continue;
      if (c == sep_) {
        record.fields.push_back(std::move(field));
        field.clear();
        field_started_quoted = false;
        after_quote = false;
        continue;
      }
      if (c == '"' && field.empty() && !field_started_quoted) {
        quoted = true;
        field_started_quoted = true;
        continue;
      }
      if (after_quote) {
        throw InputError(origin_ + ":" + std::to_string(record.line) + ": unexpected character after closing quote");
      }
      field.push_back(static_cast<char>(c));
    }
  }

 private:
  std::istream& in_;
  char sep_;
  std::string origin_;
  std::size_t line_ = 0;
};

inline std::vector<std::size_t> resolve_labels(const std::vector<std::string>& names, const LabelSpace& space,
                                               const std::string& where) {
  std::vector<std::size_t> labels;
  for (const auto& name : names) {
    const std::size_t idx = space.find(name);
    if (idx == space.size()) throw InputError(where + ": unknown label '" + name + "'");
    labels.push_back(idx);
  }
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  if (space.mode() == TaskMode::multi_class && labels.size() != 1) {
    throw InputError(where + ": multi-class record must carry exactly one label, got " + std::to_string(labels.size()));
  }
  return labels;
}

inline std::vector<std::string> split_label_cell(const std::string& cell) {
  std::vector<std::string> out;
  if (cell.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto bar = cell.find('|', start);
    out.push_back(cell.substr(start, bar - start));
    if (bar == std::string::npos) break;
    start = bar + 1;
  }
  return out;
}

}  // namespace detail

inline Corpus read_dataset(std::istream& in, DatasetFormat format, const LabelSpace& labels, const std::string& origin) {
  Corpus corpus;
  if (format == DatasetFormat::jsonl) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const std::string where = origin + ":" + std::to_string(line_no);
      nlohmann::json obj;
      try {
        obj = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw InputError(where + ": malformed JSON (" + e.what() + ")");
      }
      if (!obj.is_object() || !obj.contains("text") || !obj["text"].is_string() || !obj.contains("labels") ||
          !obj["labels"].is_array()) {
        throw InputError(where + ": expected {\"text\": string, \"labels\": [string, ...]}");
      }
      std::vector<std::string> names;
      for (const auto& l : obj["labels"]) {
        if (!l.is_string()) throw InputError(where + ": labels must be strings");
        names.push_back(l.get<std::string>());
      }
      auto ids = detail::resolve_labels(names, labels, where);
      corpus.push_back(make_document(static_cast<std::int64_t>(corpus.size()), obj["text"].get<std::string>(), std::move(ids)));
    }
    return corpus;
  }

  const char sep = format == DatasetFormat::csv ? ',' : '\t';
  detail::DelimitedReader reader(in, sep, origin);
  detail::DelimitedRecord record;
  if (!reader.next(record)) throw InputError(origin + ": missing header line");
  std::size_t text_col = record.fields.size(), label_col = record.fields.size();
  for (std::size_t i = 0; i < record.fields.size(); ++i) {
    if (record.fields[i] == "text") text_col = i;
    if (record.fields[i] == "label") label_col = i;
  }
  if (text_col == record.fields.size() || label_col == record.fields.size()) {
    throw InputError(origin + ":1: header must name 'text' and 'label' columns");
  }
  const std::size_t width = record.fields.size();
  while (reader.next(record)) {
    const std::string where = origin + ":" + std::to_string(record.line);
    if (record.fields.size() == 1 && record.fields[0].empty()) continue;
    if (record.fields.size() != width) {
      throw InputError(where + ": expected " + std::to_string(width) + " fields, found " + std::to_string(record.fields.size()));
    }
    auto ids = detail::resolve_labels(detail::split_label_cell(record.fields[label_col]), labels, where);
    corpus.push_back(make_document(static_cast<std::int64_t>(corpus.size()), record.fields[text_col], std::move(ids)));
  }
  return corpus;
}

inline Corpus load_dataset(const std::string& path, DatasetFormat format, const LabelSpace& labels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open dataset '" + path + "'");
  return read_dataset(in, format, labels, path);
}

/// Label names in first-appearance order, for datasets without a declared label list.
inline std::vector<std::string> scan_label_names(const std::string& path, DatasetFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open dataset '" + path + "'");
  std::vector<std::string> names;
  std::set<std::string> seen;
  auto note = [&](const std::string& n) {
    if (!n.empty() && seen.insert(n).second) names.push_back(n);
  };
  if (format == DatasetFormat::jsonl) {
    std::string line;
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        auto obj = nlohmann::json::parse(line);
        for (const auto& l : obj.at("labels")) note(l.get<std::string>());
      } catch (const nlohmann::json::exception&) {
        // reported with a line number by load_dataset
      }
    }
    return names;
  }
  detail::DelimitedReader reader(in, format == DatasetFormat::csv ? ',' : '\t', path);
  detail::DelimitedRecord record;
  if (!reader.next(record)) throw InputError(path + ": missing header line");
  std::size_t label_col = record.fields.size();
  for (std::size_t i = 0; i < record.fields.size(); ++i) {
    if (record.fields[i] == "label") label_col = i;
  }
  if (label_col == record.fields.size()) throw InputError(path + ":1: header must name a 'label' column");
  while (reader.next(record)) {
    if (label_col < record.fields.size()) {
      for (const auto& n : detail::split_label_cell(record.fields[label_col])) note(n);
    }
  }
  return names;
}

// ---------------------------------------------------------------------------
// Splitting

struct Fractions {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
};

struct CorpusSplits {
  Corpus train;
  Corpus validation;
  Corpus test;
};

/// Seeded shuffle, then floor-sized validation/test parts; the remainder goes to train.
inline CorpusSplits split(const Corpus& corpus, Fractions fractions, std::uint64_t seed) {
  if (corpus.size() < 3) throw InputError("corpus needs at least 3 documents to split");
  if (fractions.train <= 0 || fractions.validation <= 0 || fractions.test <= 0 ||
      std::abs(fractions.train + fractions.validation + fractions.test - 1.0) > 1e-9) {
    throw InputError("split fractions must be positive and sum to 1");
  }
  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  const auto n = static_cast<double>(corpus.size());
  const auto n_val = static_cast<std::size_t>(std::floor(fractions.validation * n + 1e-9));
  const auto n_test = static_cast<std::size_t>(std::floor(fractions.test * n + 1e-9));
  const std::size_t n_train = corpus.size() - n_val - n_test;

  CorpusSplits out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& doc = corpus[order[i]];
    if (i < n_train) {
      out.train.push_back(doc);
    } else if (i < n_train + n_val) {
      out.validation.push_back(doc);
    } else {
      out.test.push_back(doc);
    }
  }
  return out;
}

}  // namespace descnet
