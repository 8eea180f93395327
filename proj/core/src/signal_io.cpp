#include "xfer/signal_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

#include "xfer/error.hpp"

namespace xfer {

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    if (res.ec != std::errc()) throw InvalidArgument("format_double: conversion failed");
    return std::string(buf, res.ptr);
}

namespace {

double parse_double(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw InvalidArgument("cannot parse number '" + std::string(s) + "'");
    return v;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(sep, start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::vector<std::string_view> lines_of(std::string_view text) {
    std::vector<std::string_view> out;
    for (auto line : split(text, '\n')) {
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty() || line.front() == '#') continue;
        out.push_back(line);
    }
    return out;
}

const char* type_name(ColumnType t) {
    switch (t) {
        case ColumnType::integer: return "integer";
        case ColumnType::number: return "number";
        case ColumnType::text: return "text";
    }
    return "?";
}

}  // namespace

void validate_report(const Report& report) {
    if (report.schema.empty()) throw InvalidArgument("report schema has no columns");
    for (const auto& c : report.schema)
        if (c.name.empty() || c.name.find_first_of(",\n\r") != std::string::npos)
            throw InvalidArgument("report schema: invalid column name '" + c.name + "'");
    for (std::size_t r = 0; r < report.rows.size(); ++r) {
        const auto& row = report.rows[r];
        if (row.size() != report.schema.size())
            throw InvalidArgument("report row " + std::to_string(r) + ": expected " +
                                  std::to_string(report.schema.size()) + " cells, got " + std::to_string(row.size()));
        for (std::size_t c = 0; c < row.size(); ++c) {
            const auto& col = report.schema[c];
            const auto& cell = row[c];
            bool ok = false;
            switch (col.type) {
                case ColumnType::integer: ok = std::holds_alternative<std::int64_t>(cell); break;
                case ColumnType::number:
                    ok = std::holds_alternative<double>(cell) && std::isfinite(std::get<double>(cell));
                    break;
                case ColumnType::text:
                    ok = std::holds_alternative<std::string>(cell) &&
                         std::get<std::string>(cell).find_first_of(",\n\r") == std::string::npos;
                    break;
            }
            if (!ok)
                throw InvalidArgument("report row " + std::to_string(r) + ", column " + col.name + ": expected finite " +
                                      type_name(col.type));
        }
    }
}

std::string render_csv(const Report& report, const std::string& config_json) {
    std::string out;
    if (config_json.find_first_of("\n\r") != std::string::npos)
        throw InvalidArgument("render_csv: config must be a single line");
    out += "# config=" + config_json + "\n";
    for (std::size_t c = 0; c < report.schema.size(); ++c) {
        if (c) out += ',';
        out += report.schema[c].name;
    }
    out += '\n';
    for (const auto& row : report.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out += ',';
            std::visit(
                [&](const auto& v) {
                    using T = std::decay_t<decltype(v)>;
                    if constexpr (std::is_same_v<T, std::int64_t>) out += std::to_string(v);
                    else if constexpr (std::is_same_v<T, double>) out += format_double(v);
                    else out += v;
                },
                row[c]);
        }
        out += '\n';
    }
    return out;
}

void write_report(const std::filesystem::path& path, const Report& report, const std::string& config_json) {
    validate_report(report);
    write_text_file(path, render_csv(report, config_json));
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw InvalidArgument("cannot open " + path.string() + " for writing");
    os.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!os) throw InvalidArgument("failed writing " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InvalidArgument("cannot open " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::string signal_to_text(const Signal& s) {
    std::string out;
    for (Eigen::Index k = 0; k < s.cols(); ++k) {
        for (Eigen::Index i = 0; i < s.rows(); ++i) {
            if (i) out += ',';
            out += format_double(s(i, k));
        }
        out += '\n';
    }
    return out;
}

Signal signal_from_text(const std::string& text) {
    const auto lines = lines_of(text);
    if (lines.empty()) return Signal(0, 0);
    const auto p = static_cast<Eigen::Index>(split(lines[0], ',').size());
    Signal s(p, static_cast<Eigen::Index>(lines.size()));
    for (std::size_t k = 0; k < lines.size(); ++k) {
        const auto cells = split(lines[k], ',');
        if (static_cast<Eigen::Index>(cells.size()) != p)
            throw InvalidArgument("signal text: line " + std::to_string(k + 1) + " has a different channel count");
        for (Eigen::Index i = 0; i < p; ++i)
            s(i, static_cast<Eigen::Index>(k)) = parse_double(cells[static_cast<std::size_t>(i)]);
    }
    return s;
}

void save_signal(const std::filesystem::path& path, const Signal& s) { write_text_file(path, signal_to_text(s)); }

Signal load_signal(const std::filesystem::path& path) { return signal_from_text(read_text_file(path)); }

std::string trajectory_to_csv(const Trajectory& traj) {
    std::string out = "t,x,y,z\n";
    for (Eigen::Index k = 0; k < traj.samples.cols(); ++k) {
        out += format_double(static_cast<double>(k) * traj.dt);
        for (Eigen::Index i = 0; i < traj.samples.rows(); ++i) out += ',' + format_double(traj.samples(i, k));
        out += '\n';
    }
    return out;
}

Trajectory trajectory_from_csv(const std::string& text, const std::string& name) {
    auto lines = lines_of(text);
    if (lines.empty() || lines[0] != "t,x,y,z") throw InvalidArgument("trajectory csv: expected header t,x,y,z");
    lines.erase(lines.begin());
    if (lines.size() < 2) throw InvalidArgument("trajectory csv: need at least two samples");
    Trajectory traj;
    traj.name = name;
    traj.samples.resize(3, static_cast<Eigen::Index>(lines.size()));
    std::vector<double> t(lines.size());
    for (std::size_t k = 0; k < lines.size(); ++k) {
        const auto cells = split(lines[k], ',');
        if (cells.size() != 4) throw InvalidArgument("trajectory csv: line " + std::to_string(k + 2) + " needs 4 fields");
        t[k] = parse_double(cells[0]);
        for (int i = 0; i < 3; ++i)
            traj.samples(i, static_cast<Eigen::Index>(k)) = parse_double(cells[static_cast<std::size_t>(i) + 1]);
    }
    traj.dt = t[1] - t[0];
    if (!(traj.dt > 0.0)) throw InvalidArgument("trajectory csv: time must increase");
    for (std::size_t k = 1; k < t.size(); ++k)
        if (std::abs((t[k] - t[k - 1]) - traj.dt) > 1e-9 * std::max(1.0, traj.dt * 1e3))
            throw InvalidArgument("trajectory csv: samples must be uniformly spaced");
    traj.duration = t.back() - t.front();
    if (!traj.samples.allFinite()) throw InvalidArgument("trajectory csv: non-finite sample");
    return traj;
}

}  // namespace xfer
