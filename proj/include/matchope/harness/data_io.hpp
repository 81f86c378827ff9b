#pragma once

#include "matchope/core.hpp"

#include <filesystem>
#include <optional>
#include <string_view>

namespace matchope::harness {

struct IngestedData {
  LoggedDataset dataset;
  /// Present when every company and every seeker carries a feature vector.
  std::optional<ContextSet> contexts;
};

/// JSON Lines. Record lines:
///   {"company_id", "seeker_id", "s", "r", "logging_prob"?, "company_features"?, "seeker_features"?}
/// Catalog lines declare seekers that may never have been recommended:
///   {"seeker_id", "seeker_features"?}
/// Ids are dense from 0 and each company appears exactly once. Either every
/// record carries logging_prob or none does.
IngestedData parse_logged_data(std::string_view text);
IngestedData ingest_logged_data(const std::filesystem::path& path);

std::string format_logged_data(const LoggedDataset& dataset, const ContextSet* contexts = nullptr);
void export_logged_data(const LoggedDataset& dataset, const ContextSet* contexts, const std::filesystem::path& path);

/// {"label": ..., "probs": [[...], ...]}
std::string format_policy(const Policy& policy);
Policy parse_policy(std::string_view text);
void write_policy(const Policy& policy, const std::filesystem::path& path);
Policy read_policy(const std::filesystem::path& path);

}  // namespace matchope::harness
