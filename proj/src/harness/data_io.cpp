#include "matchope/harness/data_io.hpp"

#include "matchope/errors.hpp"
#include "matchope/harness/report.hpp"

#include <json.hpp>

#include <sstream>

namespace matchope::harness {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

[[noreturn]] void fail(std::size_t line, const std::string& what) {
  throw ValidationError("line " + std::to_string(line) + ": " + what);
}

Index read_id(const json& doc, const char* key, std::size_t line) {
  const json& v = doc.at(key);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) fail(line, std::string(key) + " must be a non-negative integer");
  return static_cast<Index>(v.get<std::int64_t>());
}

int read_bit(const json& doc, const char* key, std::size_t line) {
  if (!doc.contains(key)) fail(line, std::string("missing field '") + key + "'");
  const json& v = doc.at(key);
  if (!v.is_number_integer() || (v.get<std::int64_t>() != 0 && v.get<std::int64_t>() != 1)) {
    fail(line, std::string(key) + " must be 0 or 1");
  }
  return static_cast<int>(v.get<std::int64_t>());
}

std::vector<double> read_features(const json& v, std::size_t line) {
  if (!v.is_array()) fail(line, "features must be an array of numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) fail(line, "features must be an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

void check_keys(const json& doc, std::initializer_list<const char*> allowed, std::size_t line) {
  for (const auto& item : doc.items()) {
    bool known = false;
    for (const char* key : allowed) known = known || item.key() == key;
    if (!known) fail(line, "unknown field '" + item.key() + "'");
  }
}

// Stores a feature vector for a unit, rejecting conflicting repeats.
void put_features(std::vector<std::optional<std::vector<double>>>& table, Index id, std::vector<double> f,
                  std::size_t line, const char* what) {
  if (table.size() <= static_cast<std::size_t>(id)) table.resize(static_cast<std::size_t>(id) + 1);
  auto& slot = table[static_cast<std::size_t>(id)];
  if (slot && *slot != f) fail(line, std::string("conflicting features for ") + what + " " + std::to_string(id));
  slot = std::move(f);
}

ordered_json features_json(const Matrix& m, Index row) {
  ordered_json a = ordered_json::array();
  for (Index k = 0; k < m.cols(); ++k) a.push_back(m(row, k));
  return a;
}

}  // namespace

IngestedData parse_logged_data(std::string_view text) {
  struct Pending {
    LoggedRecord rec;
    bool has_prob = false;
    std::size_t line = 0;
  };
  std::vector<std::optional<Pending>> records;
  std::vector<std::optional<std::vector<double>>> company_features, seeker_features;
  Index max_seeker = -1;
  std::size_t n_records = 0;
  std::size_t with_prob = 0;

  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (raw.find_first_not_of(" \t\r") == std::string::npos) continue;
    json doc;
    try {
      doc = json::parse(raw);
    } catch (const json::exception& e) {
      fail(line, std::string("malformed JSON: ") + e.what());
    }
    if (!doc.is_object()) fail(line, "expected a JSON object");
    try {
      if (!doc.contains("company_id")) {
        if (!doc.contains("seeker_id")) fail(line, "expected company_id or seeker_id");
        check_keys(doc, {"seeker_id", "seeker_features"}, line);
        const Index j = read_id(doc, "seeker_id", line);
        max_seeker = std::max(max_seeker, j);
        if (doc.contains("seeker_features")) {
          put_features(seeker_features, j, read_features(doc["seeker_features"], line), line, "seeker");
        }
        continue;
      }
      check_keys(doc, {"company_id", "seeker_id", "s", "r", "logging_prob", "company_features", "seeker_features"},
                 line);
      if (!doc.contains("seeker_id")) fail(line, "missing field 'seeker_id'");
      const Index c = read_id(doc, "company_id", line);
      const Index j = read_id(doc, "seeker_id", line);
      const int s = read_bit(doc, "s", line);
      const int r = read_bit(doc, "r", line);
      if (s == 0 && r == 1) fail(line, "s = 0 with r = 1 violates m = s * r (a reply requires a scout)");
      Pending p{LoggedRecord{j, s, r, s * r, 1.0}, false, line};
      if (doc.contains("logging_prob")) {
        const json& v = doc["logging_prob"];
        if (!v.is_number()) fail(line, "logging_prob must be a number");
        const double prob = v.get<double>();
        if (!(prob > 0.0 && prob <= 1.0)) fail(line, "logging_prob must lie in (0, 1]");
        p.rec.logging_prob = prob;
        p.has_prob = true;
        ++with_prob;
      }
      if (doc.contains("company_features")) {
        put_features(company_features, c, read_features(doc["company_features"], line), line, "company");
      }
      if (doc.contains("seeker_features")) {
        put_features(seeker_features, j, read_features(doc["seeker_features"], line), line, "seeker");
      }
      if (records.size() <= static_cast<std::size_t>(c)) records.resize(static_cast<std::size_t>(c) + 1);
      if (records[static_cast<std::size_t>(c)]) fail(line, "company " + std::to_string(c) + " appears twice");
      records[static_cast<std::size_t>(c)] = p;
      max_seeker = std::max(max_seeker, j);
      ++n_records;
    } catch (const json::exception& e) {
      fail(line, e.what());
    }
  }
  if (n_records == 0) throw ValidationError("no records");
  if (with_prob != 0 && with_prob != n_records) {
    throw ValidationError("logging_prob must be given on every record or on none");
  }
  std::vector<LoggedRecord> out;
  out.reserve(records.size());
  for (std::size_t c = 0; c < records.size(); ++c) {
    if (!records[c]) throw ValidationError("company ids must be dense: company " + std::to_string(c) + " is missing");
    out.push_back(records[c]->rec);
  }
  const Index n_seekers = max_seeker + 1;
  const Index n_companies = static_cast<Index>(out.size());

  std::optional<ContextSet> contexts;
  const bool any_features = !company_features.empty() || !seeker_features.empty();
  if (any_features) {
    company_features.resize(static_cast<std::size_t>(n_companies));
    seeker_features.resize(static_cast<std::size_t>(n_seekers));
    std::size_t dim = 0;
    bool first = true;
    auto check = [&](const std::optional<std::vector<double>>& f, const char* what, std::size_t id) {
      if (!f) throw ValidationError(std::string("features are missing for ") + what + " " + std::to_string(id));
      if (first) {
        dim = f->size();
        first = false;
      } else if (f->size() != dim) {
        throw ValidationError(std::string("feature length differs for ") + what + " " + std::to_string(id));
      }
    };
    for (std::size_t c = 0; c < company_features.size(); ++c) check(company_features[c], "company", c);
    for (std::size_t j = 0; j < seeker_features.size(); ++j) check(seeker_features[j], "seeker", j);
    if (dim == 0) throw ValidationError("feature vectors must not be empty");
    Matrix xc(n_companies, static_cast<Index>(dim)), xj(n_seekers, static_cast<Index>(dim));
    for (Index c = 0; c < n_companies; ++c) {
      for (std::size_t k = 0; k < dim; ++k) xc(c, static_cast<Index>(k)) = (*company_features[c])[k];
    }
    for (Index j = 0; j < n_seekers; ++j) {
      for (std::size_t k = 0; k < dim; ++k) xj(j, static_cast<Index>(k)) = (*seeker_features[j])[k];
    }
    contexts.emplace(std::move(xc), std::move(xj));
  }
  return IngestedData{LoggedDataset(std::move(out), n_seekers, with_prob == n_records), std::move(contexts)};
}

IngestedData ingest_logged_data(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("no such file: " + path.string());
  return parse_logged_data(read_text_file(path));
}

std::string format_logged_data(const LoggedDataset& dataset, const ContextSet* contexts) {
  if (contexts && (contexts->n_companies() != dataset.n_companies() || contexts->n_seekers() != dataset.n_seekers())) {
    throw ShapeError("contexts do not match the dataset");
  }
  std::string out;
  for (Index j = 0; j < dataset.n_seekers(); ++j) {
    ordered_json line;
    line["seeker_id"] = j;
    if (contexts) line["seeker_features"] = features_json(contexts->seeker(), j);
    out += line.dump() + "\n";
  }
  for (Index c = 0; c < dataset.n_companies(); ++c) {
    const auto& rec = dataset[c];
    ordered_json line;
    line["company_id"] = c;
    line["seeker_id"] = rec.seeker;
    line["s"] = rec.s;
    line["r"] = rec.r;
    if (dataset.propensities_known()) line["logging_prob"] = rec.logging_prob;
    if (contexts) line["company_features"] = features_json(contexts->company(), c);
    out += line.dump() + "\n";
  }
  return out;
}

void export_logged_data(const LoggedDataset& dataset, const ContextSet* contexts, const std::filesystem::path& path) {
  write_text_file(path, format_logged_data(dataset, contexts));
}

std::string format_policy(const Policy& policy) {
  ordered_json doc;
  doc["label"] = policy.label();
  ordered_json rows = ordered_json::array();
  for (Index c = 0; c < policy.n_companies(); ++c) rows.push_back(features_json(policy.probs(), c));
  doc["probs"] = std::move(rows);
  return doc.dump() + "\n";
}

Policy parse_policy(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("policy is not valid JSON: ") + e.what());
  }
  try {
    const auto& rows = doc.at("probs");
    if (!rows.is_array() || rows.empty()) throw ValidationError("policy has no rows");
    const std::size_t n_cols = rows[0].size();
    Matrix probs(static_cast<Index>(rows.size()), static_cast<Index>(n_cols));
    for (std::size_t c = 0; c < rows.size(); ++c) {
      if (!rows[c].is_array() || rows[c].size() != n_cols) throw ValidationError("policy rows differ in length");
      for (std::size_t j = 0; j < n_cols; ++j) {
        probs(static_cast<Index>(c), static_cast<Index>(j)) = rows[c][j].get<double>();
      }
    }
    return Policy(std::move(probs), doc.value("label", std::string("policy")));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed policy: ") + e.what());
  }
}

void write_policy(const Policy& policy, const std::filesystem::path& path) {
  write_text_file(path, format_policy(policy));
}

Policy read_policy(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("no such file: " + path.string());
  return parse_policy(read_text_file(path));
}

}  // namespace matchope::harness
