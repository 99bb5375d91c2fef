#pragma once

// Language catalog: metadata + typological feature vectors, keyed by ISO
// 639-3 code, and the pool filters evaluated over it.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include "langsel/detail/text.hpp"
#include "langsel/error.hpp"

namespace langsel {

enum class Model { xlmr, mbert };

inline std::string_view to_string(Model m) {
  return m == Model::xlmr ? "xlmr" : "mbert";
}

inline Model parse_model(std::string_view s) {
  if (s == "xlmr") return Model::xlmr;
  if (s == "mbert") return Model::mbert;
  throw validation_error("unknown model '" + std::string(s) + "' (expected xlmr or mbert)");
}

// Categorical attribute used by all-different constraints and label filters.
enum class GroupKey { script, family };

inline std::string_view to_string(GroupKey k) {
  return k == GroupKey::script ? "script" : "family";
}

inline GroupKey parse_group_key(std::string_view s) {
  if (s == "script") return GroupKey::script;
  if (s == "family") return GroupKey::family;
  throw validation_error("unknown group key '" + std::string(s) + "' (expected script or family)");
}

struct LanguageRecord {
  std::string code;
  std::string name;
  std::string script;
  std::string family;
  int joshi_class = 0;
  bool seen_xlmr = false;
  bool seen_mbert = false;
  std::vector<double> vector;

  const std::string& label(GroupKey key) const {
    return key == GroupKey::script ? script : family;
  }
  bool seen_by(Model m) const { return m == Model::xlmr ? seen_xlmr : seen_mbert; }
};

// Immutable, validated set of languages in ascending code order. A catalog
// built from metadata alone has dimension 0 and empty vectors.
class Catalog {
 public:
  Catalog() = default;

  static Catalog from_records(std::vector<LanguageRecord> records) {
    std::sort(records.begin(), records.end(),
              [](const LanguageRecord& a, const LanguageRecord& b) { return a.code < b.code; });
    Catalog c;
    c.dimension_ = records.empty() ? 0 : records.front().vector.size();
    for (std::size_t i = 0; i < records.size(); ++i) {
      const LanguageRecord& r = records[i];
      if (r.code.empty()) throw validation_error("empty language code");
      if (i > 0 && records[i - 1].code == r.code) {
        throw validation_error("duplicate language code '" + r.code + "'");
      }
      if (r.joshi_class < 0 || r.joshi_class > 5) {
        throw validation_error("language '" + r.code + "': joshi class " +
                               std::to_string(r.joshi_class) + " outside 0..5");
      }
      if (r.vector.size() != c.dimension_) {
        throw validation_error("language '" + r.code + "': vector dimension " +
                               std::to_string(r.vector.size()) + " != " +
                               std::to_string(c.dimension_));
      }
      if (c.dimension_ > 0) check_vector(r.code, r.vector);
    }
    c.records_ = std::move(records);
    for (std::size_t i = 0; i < c.records_.size(); ++i) {
      c.index_.emplace(c.records_[i].code, i);
      c.scripts_.insert(c.records_[i].script);
      c.families_.insert(c.records_[i].family);
    }
    return c;
  }

  const std::vector<LanguageRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  std::size_t dimension() const { return dimension_; }
  bool has_vectors() const { return dimension_ > 0; }

  const LanguageRecord* find(std::string_view code) const {
    const auto it = index_.find(code);
    return it == index_.end() ? nullptr : &records_[it->second];
  }

  const LanguageRecord& at(std::string_view code) const {
    if (const LanguageRecord* r = find(code)) return *r;
    throw validation_error("unknown language code '" + std::string(code) + "'");
  }

  bool contains(std::string_view code) const { return find(code) != nullptr; }

  std::vector<std::string> codes() const {
    std::vector<std::string> out;
    out.reserve(records_.size());
    for (const auto& r : records_) out.push_back(r.code);
    return out;
  }

  bool has_label(GroupKey key, const std::string& label) const {
    return key == GroupKey::script ? scripts_.count(label) > 0 : families_.count(label) > 0;
  }

  // Nonzero norm and finite entries; shared with the vector-file loader.
  static void check_vector(const std::string& code, const std::vector<double>& v) {
    double sq = 0.0;
    for (double x : v) {
      if (!std::isfinite(x)) {
        throw validation_error("language '" + code + "': non-finite vector entry");
      }
      sq += x * x;
    }
    if (!(sq > 0.0)) throw validation_error("language '" + code + "': zero-norm vector");
  }

 private:
  std::vector<LanguageRecord> records_;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::set<std::string> scripts_;
  std::set<std::string> families_;
  std::size_t dimension_ = 0;
};

// ---------------------------------------------------------------------------
// File loading

inline constexpr std::string_view kMetadataHeader =
    "code\tname\tscript\tfamily\tjoshi\tseen_xlmr\tseen_mbert";

namespace detail {

inline bool parse_flag(const std::string& file, std::size_t line, const Field& f) {
  if (f.text == "0") return false;
  if (f.text == "1") return true;
  throw parse_error(file, line, f.column, "expected boolean 0 or 1, got '" + std::string(f.text) + "'");
}

struct VectorRow {
  std::string code;
  std::vector<double> values;
  std::size_t line = 0;
};

}  // namespace detail

// Metadata rows only (vectors left empty); each record remembers nothing of
// its source line, so line-aware checks happen here.
inline std::vector<LanguageRecord> load_metadata_records(const std::string& path,
                                                         std::map<std::string, std::size_t>* lines_out = nullptr) {
  const auto lines = detail::read_lines(path);
  if (lines.empty() || lines.front() != kMetadataHeader) {
    throw parse_error(path, 1, 1, "expected header '" + std::string(kMetadataHeader) + "'");
  }
  std::vector<LanguageRecord> out;
  std::map<std::string, std::size_t> seen;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    const std::size_t line_no = ln + 1;
    if (detail::trim(lines[ln]).empty()) continue;
    const auto fields = detail::split_fields(lines[ln], '\t');
    if (fields.size() != 7) {
      throw parse_error(path, line_no, 1,
                        "expected 7 tab-separated fields, got " + std::to_string(fields.size()));
    }
    LanguageRecord r;
    r.code = std::string(detail::trim(fields[0].text));
    if (r.code.empty()) throw parse_error(path, line_no, fields[0].column, "empty language code");
    if (const auto it = seen.find(r.code); it != seen.end()) {
      throw parse_error(path, line_no, fields[0].column,
                        "duplicate code '" + r.code + "' (first seen on line " +
                            std::to_string(it->second) + ")");
    }
    seen.emplace(r.code, line_no);
    r.name = std::string(fields[1].text);
    r.script = std::string(detail::trim(fields[2].text));
    r.family = std::string(detail::trim(fields[3].text));
    const auto joshi = detail::parse_integer<int>(fields[4].text);
    if (!joshi || *joshi < 0 || *joshi > 5) {
      throw parse_error(path, line_no, fields[4].column,
                        "joshi class must be an integer in 0..5, got '" + std::string(fields[4].text) + "'");
    }
    r.joshi_class = *joshi;
    r.seen_xlmr = detail::parse_flag(path, line_no, fields[5]);
    r.seen_mbert = detail::parse_flag(path, line_no, fields[6]);
    out.push_back(std::move(r));
  }
  if (lines_out) *lines_out = std::move(seen);
  return out;
}

inline std::vector<detail::VectorRow> load_vector_rows(const std::string& path) {
  const auto lines = detail::read_lines(path);
  std::vector<detail::VectorRow> rows;
  std::map<std::string, std::size_t> seen;
  std::optional<std::size_t> dim;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const std::size_t line_no = ln + 1;
    if (detail::trim(lines[ln]).empty()) continue;
    const auto fields = detail::split_fields(lines[ln], '\t');
    const std::string code(detail::trim(fields[0].text));
    if (code == "code") continue;  // optional header row
    if (code.empty()) throw parse_error(path, line_no, 1, "empty language code");
    if (fields.size() < 2) throw parse_error(path, line_no, 1, "no vector values for '" + code + "'");
    if (const auto it = seen.find(code); it != seen.end()) {
      throw parse_error(path, line_no, 1,
                        "duplicate code '" + code + "' (first seen on line " +
                            std::to_string(it->second) + ")");
    }
    seen.emplace(code, line_no);
    detail::VectorRow row{code, {}, line_no};
    row.values.reserve(fields.size() - 1);
    for (std::size_t i = 1; i < fields.size(); ++i) {
      const auto v = detail::parse_double(fields[i].text);
      if (!v) {
        throw parse_error(path, line_no, fields[i].column,
                          "invalid number '" + std::string(fields[i].text) + "'");
      }
      if (!std::isfinite(*v)) {
        throw parse_error(path, line_no, fields[i].column, "non-finite value for '" + code + "'");
      }
      row.values.push_back(*v);
    }
    if (!dim) dim = row.values.size();
    if (row.values.size() != *dim) {
      throw parse_error(path, line_no, 1,
                        "dimension mismatch for '" + code + "': " + std::to_string(row.values.size()) +
                            " values, expected " + std::to_string(*dim));
    }
    double sq = 0.0;
    for (double x : row.values) sq += x * x;
    if (!(sq > 0.0)) throw parse_error(path, line_no, 1, "zero-norm vector for '" + code + "'");
    rows.push_back(std::move(row));
  }
  return rows;
}

// Catalog from metadata only; vector-dependent operations reject it.
inline Catalog load_metadata(const std::string& metadata_file) {
  return Catalog::from_records(load_metadata_records(metadata_file));
}

// Every metadata row must match exactly one vector row. Vector rows for codes
// absent from the metadata are parsed and validated, then ignored.
inline Catalog load_catalog(const std::string& metadata_file, const std::string& vectors_file) {
  std::map<std::string, std::size_t> meta_lines;
  auto records = load_metadata_records(metadata_file, &meta_lines);
  auto rows = load_vector_rows(vectors_file);
  std::map<std::string, std::size_t> by_code;
  for (std::size_t i = 0; i < rows.size(); ++i) by_code.emplace(rows[i].code, i);
  for (auto& r : records) {
    const auto it = by_code.find(r.code);
    if (it == by_code.end()) {
      throw parse_error(metadata_file, meta_lines.at(r.code), 1,
                        "missing vector for '" + r.code + "' in " + vectors_file);
    }
    r.vector = std::move(rows[it->second].values);
  }
  if (!records.empty() && records.front().vector.empty()) {
    throw validation_error(vectors_file + ": empty vectors");
  }
  return Catalog::from_records(std::move(records));
}

// ---------------------------------------------------------------------------
// Pool filters

struct JoshiIn {
  std::set<int> classes;
  bool negate = false;
};

struct LabelIn {
  GroupKey key = GroupKey::script;
  std::set<std::string> labels;
  bool negate = false;
};

struct SeenBy {
  Model model = Model::xlmr;
  bool seen = true;
};

struct CodeIn {
  std::set<std::string> codes;
  bool negate = false;
};

using Predicate = std::variant<JoshiIn, LabelIn, SeenBy, CodeIn>;

// Conjunction of predicates; the empty conjunction selects everything.
class PoolFilter {
 public:
  static PoolFilter all() { return {}; }

  PoolFilter& add(Predicate p) {
    terms_.push_back(std::move(p));
    return *this;
  }

  const std::vector<Predicate>& terms() const { return terms_; }

  bool matches(const LanguageRecord& r) const {
    return std::all_of(terms_.begin(), terms_.end(), [&](const Predicate& p) {
      return std::visit([&](const auto& t) { return eval(t, r); }, p);
    });
  }

  // Rejects labels and codes the catalog does not know.
  void validate(const Catalog& catalog) const {
    for (const auto& p : terms_) {
      if (const auto* l = std::get_if<LabelIn>(&p)) {
        for (const auto& label : l->labels) {
          if (!catalog.has_label(l->key, label)) {
            throw validation_error("pool filter: unknown " + std::string(langsel::to_string(l->key)) +
                                   " label '" + label + "'");
          }
        }
      } else if (const auto* c = std::get_if<CodeIn>(&p)) {
        for (const auto& code : c->codes) {
          if (!catalog.contains(code)) {
            throw validation_error("pool filter: unknown language code '" + code + "'");
          }
        }
      }
    }
  }

  // Grammar: "all" | term ("&" term)*, term = key ("="|"!=") value ("," value)*
  // with key in {joshi, script, family, code, seen_xlmr, seen_mbert}.
  static PoolFilter parse(std::string_view expr) {
    PoolFilter f;
    const std::string_view whole = detail::trim(expr);
    if (whole.empty() || whole == "all") return f;
    for (const auto& part : detail::split_fields(whole, '&')) {
      const std::string_view term = detail::trim(part.text);
      if (term == "all") continue;
      const auto err = [&](const std::string& msg) {
        return validation_error("pool filter '" + std::string(expr) + "': " + msg);
      };
      std::size_t op = term.find("!=");
      bool negate = true;
      std::size_t op_len = 2;
      if (op == std::string_view::npos) {
        op = term.find('=');
        negate = false;
        op_len = 1;
      }
      if (op == std::string_view::npos) throw err("term '" + std::string(term) + "' has no '=' or '!='");
      const std::string key(detail::trim(term.substr(0, op)));
      std::vector<std::string> values;
      for (const auto& v : detail::split_fields(term.substr(op + op_len), ',')) {
        const std::string_view t = detail::trim(v.text);
        if (t.empty()) throw err("empty value in term '" + std::string(term) + "'");
        values.emplace_back(t);
      }
      if (key == "joshi") {
        JoshiIn j{{}, negate};
        for (const auto& v : values) {
          const auto c = detail::parse_integer<int>(v);
          if (!c || *c < 0 || *c > 5) throw err("joshi class '" + v + "' outside 0..5");
          j.classes.insert(*c);
        }
        f.add(j);
      } else if (key == "script" || key == "family") {
        f.add(LabelIn{parse_group_key(key), {values.begin(), values.end()}, negate});
      } else if (key == "code") {
        f.add(CodeIn{{values.begin(), values.end()}, negate});
      } else if (key == "seen_xlmr" || key == "seen_mbert") {
        if (values.size() != 1 || (values[0] != "0" && values[0] != "1")) {
          throw err("'" + key + "' takes a single 0 or 1");
        }
        const bool v = values[0] == "1";
        f.add(SeenBy{key == "seen_xlmr" ? Model::xlmr : Model::mbert, negate ? !v : v});
      } else {
        throw err("unknown key '" + key + "'");
      }
    }
    return f;
  }

  std::string to_string() const {
    if (terms_.empty()) return "all";
    std::vector<std::string> parts;
    for (const auto& p : terms_) parts.push_back(std::visit([](const auto& t) { return describe(t); }, p));
    return detail::join(parts, " & ");
  }

 private:
  static bool eval(const JoshiIn& t, const LanguageRecord& r) {
    return (t.classes.count(r.joshi_class) > 0) != t.negate;
  }
  static bool eval(const LabelIn& t, const LanguageRecord& r) {
    return (t.labels.count(r.label(t.key)) > 0) != t.negate;
  }
  static bool eval(const SeenBy& t, const LanguageRecord& r) { return r.seen_by(t.model) == t.seen; }
  static bool eval(const CodeIn& t, const LanguageRecord& r) {
    return (t.codes.count(r.code) > 0) != t.negate;
  }

  template <typename Set>
  static std::string list(const Set& s) {
    std::string out;
    for (const auto& v : s) {
      if (!out.empty()) out += ',';
      if constexpr (std::is_same_v<typename Set::value_type, int>) {
        out += std::to_string(v);
      } else {
        out += v;
      }
    }
    return out;
  }
  static std::string op(bool negate) { return negate ? "!=" : "="; }
  static std::string describe(const JoshiIn& t) { return "joshi" + op(t.negate) + list(t.classes); }
  static std::string describe(const LabelIn& t) {
    return std::string(langsel::to_string(t.key)) + op(t.negate) + list(t.labels);
  }
  static std::string describe(const SeenBy& t) {
    return "seen_" + std::string(langsel::to_string(t.model)) + "=" + (t.seen ? "1" : "0");
  }
  static std::string describe(const CodeIn& t) { return "code" + op(t.negate) + list(t.codes); }

  std::vector<Predicate> terms_;
};

inline std::vector<std::string> filter_pool(const Catalog& catalog, const PoolFilter& filter) {
  filter.validate(catalog);
  std::vector<std::string> out;
  for (const auto& r : catalog.records()) {
    if (filter.matches(r)) out.push_back(r.code);
  }
  return out;
}

}  // namespace langsel
