#pragma once

// JSON documents: single selection results and versioned experiment
// manifests that pin each subset to the SHA-256 of the vector file it was
// computed from. Keys are emitted in a fixed order and numbers in shortest
// round-trip form, so identical inputs give byte-identical documents.

#include <openssl/evp.h>

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "json.hpp"
#include "langsel/detail/text.hpp"
#include "langsel/error.hpp"
#include "langsel/selector.hpp"

namespace langsel {

inline constexpr int kFormatVersion = 1;

inline std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[md[i] >> 4];
    out += kHex[md[i] & 0xF];
  }
  return out;
}

inline std::string file_sha256(const std::string& path) { return sha256_hex(detail::read_file(path)); }

inline bool is_hex_digest(std::string_view s) {
  return s.size() == 64 && s.find_first_not_of("0123456789abcdef") == std::string_view::npos;
}

struct ConstraintInfo {
  GroupKey key = GroupKey::script;
  std::optional<std::string> exclude;
  bool operator==(const ConstraintInfo&) const = default;
};

struct ManifestEntry {
  std::string heuristic;
  std::size_t n = 0;
  Direction direction = Direction::maximize;
  std::optional<std::string> anchor;
  std::optional<ConstraintInfo> constraint;
  Solver solver = Solver::exact;
  std::optional<std::uint64_t> seed;  // random solver only
  std::vector<std::string> selected;
  std::optional<double> objective;
  bool clamped = false;
  bool operator==(const ManifestEntry&) const = default;
};

struct Manifest {
  int format_version = kFormatVersion;
  std::string vector_digest;
  std::vector<ManifestEntry> entries;
  bool operator==(const Manifest&) const = default;
};

// Provenance of the vectors a result was computed from.
struct VectorInfo {
  std::optional<std::string> digest;
  std::size_t dimension = 0;
};

namespace detail {

using ojson = nlohmann::ordered_json;

inline ojson constraint_json(const std::optional<ConstraintInfo>& c) {
  if (!c) return nullptr;
  ojson j;
  j["distinct"] = std::string(to_string(c->key));
  j["exclude"] = c->exclude ? ojson(*c->exclude) : ojson(nullptr);
  return j;
}

inline std::optional<ConstraintInfo> constraint_from_json(const ojson& j) {
  if (j.is_null()) return std::nullopt;
  ConstraintInfo c;
  c.key = parse_group_key(j.at("distinct").get<std::string>());
  if (!j.at("exclude").is_null()) c.exclude = j.at("exclude").get<std::string>();
  return c;
}

template <typename T>
ojson optional_json(const std::optional<T>& v) {
  return v ? ojson(*v) : ojson(nullptr);
}

template <typename T>
std::optional<T> optional_from(const ojson& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<T>();
}

inline std::optional<ConstraintInfo> constraint_of(const SelectionSpec& spec) {
  if (!spec.group) return std::nullopt;
  return ConstraintInfo{spec.group->key, spec.group->excluded};
}

// Wraps JSON library failures as validation errors.
template <typename F>
auto json_guard(const std::string& what, F&& f) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    throw validation_error(what + ": " + e.what());
  }
}

}  // namespace detail

inline std::string subset_result_to_json(const SubsetResult& r, const VectorInfo& vectors = {}) {
  detail::ojson j;
  j["format_version"] = kFormatVersion;
  j["solver"] = std::string(to_string(r.solver_used));
  j["direction"] = std::string(to_string(r.spec.direction));
  j["n"] = r.spec.n;
  j["effective_n"] = r.effective_n;
  j["clamped"] = r.clamped;
  j["anchor"] = detail::optional_json(r.spec.anchor);
  j["constraint"] = detail::constraint_json(detail::constraint_of(r.spec));
  j["seed"] = r.solver_used == Solver::random ? detail::ojson(r.spec.seed) : detail::ojson(nullptr);
  j["pool"] = r.spec.pool;
  j["selected"] = r.selected;
  j["objective"] = detail::optional_json(r.objective);
  j["vector_digest"] = detail::optional_json(vectors.digest);
  j["vector_dimension"] = vectors.dimension;
  if (r.spec.trace) j["trace"] = r.trace;
  return j.dump(2) + "\n";
}

// Inverse of subset_result_to_json. The group constraint comes back without
// its label map, which only the solver needs.
inline std::pair<SubsetResult, VectorInfo> subset_result_from_json(std::string_view text) {
  return detail::json_guard("subset result document", [&] {
    const auto j = detail::ojson::parse(text);
    if (j.at("format_version").get<int>() != kFormatVersion) {
      throw validation_error("unsupported format_version " + j.at("format_version").dump());
    }
    SubsetResult r;
    r.solver_used = parse_solver(j.at("solver").get<std::string>());
    r.spec.solver = r.solver_used;
    r.spec.direction = parse_direction(j.at("direction").get<std::string>());
    r.spec.n = j.at("n").get<std::size_t>();
    r.effective_n = j.at("effective_n").get<std::size_t>();
    r.clamped = j.at("clamped").get<bool>();
    r.spec.anchor = detail::optional_from<std::string>(j.at("anchor"));
    if (const auto c = detail::constraint_from_json(j.at("constraint"))) {
      r.spec.group = GroupConstraint{c->key, c->exclude, {}};
    }
    if (!j.at("seed").is_null()) r.spec.seed = j.at("seed").get<std::uint64_t>();
    r.spec.pool = j.at("pool").get<std::vector<std::string>>();
    r.selected = j.at("selected").get<std::vector<std::string>>();
    r.objective = detail::optional_from<double>(j.at("objective"));
    if (j.contains("trace")) {
      r.spec.trace = true;
      r.trace = j.at("trace").get<std::vector<std::string>>();
    }
    VectorInfo v{detail::optional_from<std::string>(j.at("vector_digest")),
                 j.at("vector_dimension").get<std::size_t>()};
    return std::make_pair(std::move(r), std::move(v));
  });
}

inline ManifestEntry to_manifest_entry(std::string heuristic, const SubsetResult& r) {
  ManifestEntry e;
  e.heuristic = std::move(heuristic);
  e.n = r.spec.n;
  e.direction = r.spec.direction;
  e.anchor = r.spec.anchor;
  e.constraint = detail::constraint_of(r.spec);
  e.solver = r.solver_used;
  if (r.solver_used == Solver::random) e.seed = r.spec.seed;
  e.selected = r.selected;
  e.objective = r.objective;
  e.clamped = r.clamped;
  return e;
}

inline Manifest make_manifest(const std::vector<std::pair<std::string, SubsetResult>>& labelled,
                              std::string vector_digest, int format_version = kFormatVersion) {
  Manifest m{format_version, std::move(vector_digest), {}};
  for (const auto& [heuristic, result] : labelled) m.entries.push_back(to_manifest_entry(heuristic, result));
  return m;
}

inline void validate_manifest(const Manifest& m) {
  if (!is_hex_digest(m.vector_digest)) {
    throw validation_error("manifest vector_digest must be 64 lowercase hex characters");
  }
  std::set<std::tuple<std::string, std::size_t, std::optional<std::uint64_t>>> keys;
  for (const auto& e : m.entries) {
    if (e.heuristic.empty()) throw validation_error("manifest entry with empty heuristic name");
    if (!keys.emplace(e.heuristic, e.n, e.seed).second) {
      throw validation_error("duplicate manifest entry (" + e.heuristic + ", n=" + std::to_string(e.n) +
                             ", seed=" + (e.seed ? std::to_string(*e.seed) : std::string("none")) + ")");
    }
  }
}

inline std::string emit_manifest(const Manifest& m) {
  validate_manifest(m);
  detail::ojson doc;
  doc["format_version"] = m.format_version;
  doc["vector_digest"] = m.vector_digest;
  doc["entries"] = detail::ojson::array();
  for (const auto& e : m.entries) {
    detail::ojson j;
    j["heuristic"] = e.heuristic;
    j["n"] = e.n;
    j["direction"] = std::string(to_string(e.direction));
    j["anchor"] = detail::optional_json(e.anchor);
    j["constraint"] = detail::constraint_json(e.constraint);
    j["solver"] = std::string(to_string(e.solver));
    j["seed"] = detail::optional_json(e.seed);
    j["selected"] = e.selected;
    j["objective"] = detail::optional_json(e.objective);
    j["clamped"] = e.clamped;
    doc["entries"].push_back(std::move(j));
  }
  return doc.dump(2) + "\n";
}

inline Manifest parse_manifest(std::string_view text) {
  Manifest m = detail::json_guard("manifest", [&] {
    const auto doc = detail::ojson::parse(text);
    Manifest out;
    out.format_version = doc.at("format_version").get<int>();
    if (out.format_version != kFormatVersion) {
      throw validation_error("unsupported manifest format_version " + std::to_string(out.format_version));
    }
    out.vector_digest = doc.at("vector_digest").get<std::string>();
    for (const auto& j : doc.at("entries")) {
      ManifestEntry e;
      e.heuristic = j.at("heuristic").get<std::string>();
      e.n = j.at("n").get<std::size_t>();
      e.direction = parse_direction(j.at("direction").get<std::string>());
      e.anchor = detail::optional_from<std::string>(j.at("anchor"));
      e.constraint = detail::constraint_from_json(j.at("constraint"));
      e.solver = parse_solver(j.at("solver").get<std::string>());
      e.seed = detail::optional_from<std::uint64_t>(j.at("seed"));
      e.selected = j.at("selected").get<std::vector<std::string>>();
      e.objective = detail::optional_from<double>(j.at("objective"));
      e.clamped = j.at("clamped").get<bool>();
      out.entries.push_back(std::move(e));
    }
    return out;
  });
  validate_manifest(m);
  return m;
}

}  // namespace langsel
