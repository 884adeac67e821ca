#include "dclnas/report.hpp"

#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "dclnas/error.hpp"
#include "json_io.hpp"

namespace dclnas {

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

ReportTable sweep_table(const std::vector<SweepRow>& rows) {
    ReportTable t{"sweep", {"budget", "test_size", "repeats", "mean_tau", "std_tau", "mean_val_tau"}, {}};
    for (const auto& r : rows)
        t.rows.push_back({static_cast<double>(r.budget), static_cast<double>(r.test_size),
                          static_cast<double>(r.taus.size()), r.mean_tau, r.std_tau, r.mean_val_tau});
    return t;
}

ReportTable history_table(const std::vector<std::vector<HistoryPoint>>& runs) {
    ReportTable t{"history", {"run", "iteration", "fes", "best_val"}, {}};
    for (std::size_t r = 0; r < runs.size(); ++r)
        for (const auto& h : runs[r])
            t.rows.push_back({static_cast<double>(r), static_cast<double>(h.iteration), static_cast<double>(h.fes),
                              h.best_val});
    return t;
}

std::string to_csv(const ReportTable& table) {
    std::string out;
    for (std::size_t c = 0; c < table.columns.size(); ++c) out += (c ? "," : "") + table.columns[c];
    out += "\n";
    for (const auto& row : table.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) out += (c ? "," : "") + fmt(row[c]);
        out += "\n";
    }
    return out;
}

ReportTable parse_csv(const std::string& name, const std::string& text) {
    ReportTable t;
    t.name = name;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw IoError(name + ".csv: missing header");
    auto split = [](const std::string& s) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(s);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        return cells;
    };
    t.columns = split(line);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto cells = split(line);
        if (cells.size() != t.columns.size())
            throw IoError(name + ".csv line " + std::to_string(line_no) + ": expected " +
                          std::to_string(t.columns.size()) + " cells");
        std::vector<double> row;
        for (const auto& c : cells) {
            char* end = nullptr;
            const double v = std::strtod(c.c_str(), &end);
            if (end == c.c_str() || *end != '\0')
                throw IoError(name + ".csv line " + std::to_string(line_no) + ": '" + c + "' is not a number");
            row.push_back(v);
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

std::string summary_json(const ReportBundle& b) {
    io::ojson j;
    j["schema_version"] = kReportSchemaVersion;
    j["tool_version"] = DCLNAS_VERSION_STRING;
    io::ojson spec;
    spec["label_budgets"] = b.spec.label_budgets;
    spec["validation_budget"] = b.spec.validation_budget;
    spec["repeats"] = b.spec.repeats;
    spec["test_size"] = b.spec.test_size ? io::ojson(*b.spec.test_size) : io::ojson("all");
    j["sweep_spec"] = spec;
    io::ojson rows = io::ojson::array();
    for (const auto& r : b.rows)
        rows.push_back({{"budget", r.budget},
                        {"test_size", r.test_size},
                        {"mean_tau", r.mean_tau},
                        {"std_tau", r.std_tau},
                        {"mean_val_tau", r.mean_val_tau},
                        {"taus", r.taus}});
    j["rows"] = rows;
    j["seeds"] = b.seeds;
    return j.dump(2) + "\n";
}

void emit_report(const ReportBundle& bundle, const std::filesystem::path& out_dir) {
    if (bundle.rows.empty()) throw ParameterError("report has no result rows");
    const auto summary = summary_json(bundle);
    io::write_file(out_dir / "sweep.csv", to_csv(sweep_table(bundle.rows)));
    for (const auto& t : bundle.tables) io::write_file(out_dir / (t.name + ".csv"), to_csv(t));
    io::write_file(out_dir / "summary.json", summary);
}

}  // namespace dclnas
