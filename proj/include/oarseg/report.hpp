#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "oarseg/metrics.hpp"
#include "oarseg/organ.hpp"

namespace oarseg {

inline constexpr const char* kReportCsvHeader =
    "target,model,dsc_mean,dsc_min,dsc_max,hd95_mean,hd95_min,hd95_max,n_patients,n_undefined_slices";

/// Four decimals, "n/a" for NaN.
std::string format_score(double value);
/// "mean / (min, max)" at four decimals.
std::string format_cell(const MetricSummary& summary);
/// Shortest decimal text that parses back to the same double.
std::string format_exact(double value);

struct RenderedTable {
    std::string markdown;
    std::string csv;
};

/// Per-target blocks in first-appearance order. The Best column marks the
/// highest mean DSC and the lowest mean HD95 within each target; equal means
/// are all marked.
RenderedTable render_table(const std::vector<MetricRow>& rows);

std::string report_csv(const std::vector<MetricRow>& rows);
std::vector<MetricRow> parse_report_csv(const std::string& text);
std::vector<MetricRow> read_report_csv(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

struct EnsembleColumn {
    std::string name;
    std::array<double, kOrganCount> dsc{};  // OrganId order
    double mean = 0.0;
};

EnsembleColumn make_ensemble_column(std::string name, const std::array<double, kOrganCount>& dsc);
/// Organ rows plus a final Mean row; best value per row marked in bold.
RenderedTable render_ensemble_table(const std::vector<EnsembleColumn>& columns);

}  // namespace oarseg
