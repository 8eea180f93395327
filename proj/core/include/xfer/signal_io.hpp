#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "xfer/lti.hpp"
#include "xfer/trajectory.hpp"

namespace xfer {

/// Shortest decimal form that round-trips to the same double.
std::string format_double(double v);

enum class ColumnType { integer, number, text };

struct Column {
    std::string name;
    ColumnType type = ColumnType::number;
};

using Cell = std::variant<std::int64_t, double, std::string>;

/// A CSV report together with the schema it must satisfy.
struct Report {
    std::vector<Column> schema;
    std::vector<std::vector<Cell>> rows;
};

/// Every row has one cell per column, of the declared type; numbers are
/// finite; text has no separators or line breaks. Throws InvalidArgument.
void validate_report(const Report& report);

/// "# config=<json>" line, header row, data rows; LF line endings.
std::string render_csv(const Report& report, const std::string& config_json);

/// Validates, renders and writes in one go.
void write_report(const std::filesystem::path& path, const Report& report, const std::string& config_json);

void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

/// One sample per line, channels comma separated.
std::string signal_to_text(const Signal& s);
Signal signal_from_text(const std::string& text);
void save_signal(const std::filesystem::path& path, const Signal& s);
Signal load_signal(const std::filesystem::path& path);

/// Columns t, x, y, z.
std::string trajectory_to_csv(const Trajectory& traj);
Trajectory trajectory_from_csv(const std::string& text, const std::string& name);

}  // namespace xfer
