#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dclnas/driver.hpp"
#include "dclnas/metrics.hpp"

namespace dclnas {

inline constexpr int kReportSchemaVersion = 1;

// A numeric table written as CSV with a header row.
struct ReportTable {
    std::string name;  // file stem
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    bool operator==(const ReportTable&) const = default;
};

ReportTable sweep_table(const std::vector<SweepRow>& rows);
// Long format: one row per (run, history point).
ReportTable history_table(const std::vector<std::vector<HistoryPoint>>& runs);

struct ReportBundle {
    SweepSpec spec;
    std::vector<SweepRow> rows;
    std::vector<std::uint64_t> seeds;
    std::vector<ReportTable> tables;  // written alongside sweep.csv
};

// sweep.csv, one CSV per extra table and summary.json. Throws
// ParameterError (before writing anything) when there are no rows, IoError
// when the directory cannot be written.
void emit_report(const ReportBundle& bundle, const std::filesystem::path& out_dir);

std::string to_csv(const ReportTable& table);
ReportTable parse_csv(const std::string& name, const std::string& text);  // throws IoError
std::string summary_json(const ReportBundle& bundle);

}  // namespace dclnas
