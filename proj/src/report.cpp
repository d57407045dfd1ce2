#include "oarseg/report.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "oarseg/fusion.hpp"

namespace oarseg {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                field += '"';
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                field += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else {
            field += ch;
        }
    }
    fields.push_back(std::move(field));
    return fields;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

double parse_double(const std::string& s) {
    if (s == "nan" || s == "NaN" || s == "n/a") return std::numeric_limits<double>::quiet_NaN();
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw std::invalid_argument("bad number in report: '" + s + "'");
    return value;
}

int parse_int(const std::string& s) {
    int value = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw std::invalid_argument("bad integer in report: '" + s + "'");
    return value;
}

std::string target_title(const std::string& target) {
    if (auto organ = organ_from_name(target)) return std::string(organ_title(*organ));
    return target;
}

}  // namespace

std::string format_score(double value) {
    if (std::isnan(value)) return "n/a";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f", value);
    return buf;
}

std::string format_cell(const MetricSummary& s) {
    return format_score(s.mean) + " / (" + format_score(s.min) + ", " + format_score(s.max) + ")";
}

std::string format_exact(double value) {
    if (std::isnan(value)) return "nan";
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, ptr);
}

std::string report_csv(const std::vector<MetricRow>& rows) {
    std::ostringstream out;
    out << kReportCsvHeader << '\n';
    for (const auto& r : rows) {
        out << csv_field(r.target) << ',' << csv_field(r.model) << ',' << format_exact(r.dsc.mean) << ','
            << format_exact(r.dsc.min) << ',' << format_exact(r.dsc.max) << ',' << format_exact(r.hd95.mean) << ','
            << format_exact(r.hd95.min) << ',' << format_exact(r.hd95.max) << ',' << r.n_patients << ','
            << r.n_undefined_slices << '\n';
    }
    return out.str();
}

std::vector<MetricRow> parse_report_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kReportCsvHeader) throw std::invalid_argument("report.csv: unexpected header");
    std::vector<MetricRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != 10) throw std::invalid_argument("report.csv: expected 10 fields, got " + std::to_string(f.size()));
        MetricRow r;
        r.target = f[0];
        r.model = f[1];
        r.dsc = {parse_double(f[2]), parse_double(f[3]), parse_double(f[4])};
        r.hd95 = {parse_double(f[5]), parse_double(f[6]), parse_double(f[7])};
        r.n_patients = parse_int(f[8]);
        r.n_undefined_slices = parse_int(f[9]);
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<MetricRow> read_report_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_report_csv(buffer.str());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

RenderedTable render_table(const std::vector<MetricRow>& rows) {
    if (rows.empty()) throw std::invalid_argument("render_table: no rows");
    std::vector<std::string> targets;
    std::map<std::string, std::vector<const MetricRow*>> blocks;
    for (const auto& r : rows) {
        if (!blocks.contains(r.target)) targets.push_back(r.target);
        blocks[r.target].push_back(&r);
    }

    std::ostringstream md;
    md << "| Target | Model | DSC | HD95 | Best |\n";
    md << "|---|---|---|---|---|\n";
    for (const auto& target : targets) {
        const auto& block = blocks[target];
        double best_dsc = -std::numeric_limits<double>::infinity();
        double best_hd = std::numeric_limits<double>::infinity();
        for (const auto* r : block) {
            if (!std::isnan(r->dsc.mean)) best_dsc = std::max(best_dsc, r->dsc.mean);
            if (!std::isnan(r->hd95.mean)) best_hd = std::min(best_hd, r->hd95.mean);
        }
        bool first = true;
        for (const auto* r : block) {
            std::string best;
            if (r->dsc.mean == best_dsc) best = "DSC";
            if (r->hd95.mean == best_hd) best += best.empty() ? "HD95" : ", HD95";
            md << "| " << (first ? target_title(target) : "") << " | " << r->model << " | " << format_cell(r->dsc)
               << " | " << format_cell(r->hd95) << " | " << best << " |\n";
            first = false;
        }
    }
    return {md.str(), report_csv(rows)};
}

EnsembleColumn make_ensemble_column(std::string name, const std::array<double, kOrganCount>& dsc) {
    return {std::move(name), dsc, organ_mean(dsc)};
}

RenderedTable render_ensemble_table(const std::vector<EnsembleColumn>& columns) {
    if (columns.empty()) throw std::invalid_argument("render_ensemble_table: no columns");
    std::ostringstream md, csv;
    md << "| Organ |";
    csv << "organ";
    for (const auto& c : columns) {
        md << ' ' << c.name << " |";
        csv << ',' << csv_field(c.name);
    }
    md << "\n|---|";
    for (std::size_t i = 0; i < columns.size(); ++i) md << "---|";
    md << '\n';
    csv << '\n';

    auto emit_row = [&](const std::string& title, const std::string& key, auto value_of) {
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& c : columns) best = std::max(best, value_of(c));
        md << "| " << title << " |";
        csv << key;
        for (const auto& c : columns) {
            const double v = value_of(c);
            md << ' ' << (v == best ? "**" + format_score(v) + "**" : format_score(v)) << " |";
            csv << ',' << format_exact(v);
        }
        md << '\n';
        csv << '\n';
    };
    for (auto organ : kAllOrgans)
        emit_row(std::string(organ_title(organ)), std::string(organ_name(organ)),
                 [organ](const EnsembleColumn& c) { return c.dsc[organ_index(organ)]; });
    emit_row("Mean", "mean", [](const EnsembleColumn& c) { return c.mean; });
    return {md.str(), csv.str()};
}

}  // namespace oarseg
