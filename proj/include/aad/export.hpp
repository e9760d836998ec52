#pragma once

#include <filesystem>
#include <string>

#include "aad/pipeline.hpp"

namespace aad {

// windows.csv, summary.json, time_pcc.csv, channel_stats.csv and one
// serialized model per fold under models/. Rewrites are byte-identical.
void export_results(const MetricsReport& report, const std::filesystem::path& dir);

std::string summary_json(const MetricsReport& report);
std::string windows_csv(const MetricsReport& report);
// One row per trial, candidate speaker and segment.
std::string time_pcc_csv(const MetricsReport& report);
// One row per trial with a speaker-to-speaker switch.
std::string tracking_csv(const MetricsReport& report);
std::string channel_stats_csv(const MetricsReport& report);

}  // namespace aad
