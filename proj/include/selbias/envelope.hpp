#pragma once

#include <charconv>
#include <cstdint>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace selbias {

inline constexpr const char* output_schema_version = "1";

// Shortest decimal representation that round-trips to the same double; the
// same convention the JSON writer uses, so CSV and JSON agree bit-for-bit
// after parsing.
inline std::string format_double(double value) {
    char buffer[32];
    const auto result = std::to_chars(buffer, buffer + sizeof buffer, value);
    return std::string(buffer, result.ptr);
}

using Cell = std::variant<std::int64_t, double, std::string>;

/// Uniform result container for every subcommand: an echo of the parsed
/// parameters, a rectangular payload (single-row for scalar results), and
/// run diagnostics (tolerances, seeds, runtimes). Serializes to a JSON
/// envelope with fixed key order, or to CSV (header row, LF line endings).
struct OutputEnvelope {
    std::string command;
    nlohmann::ordered_json params;
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
    nlohmann::ordered_json diagnostics;

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json envelope;
        envelope["schema_version"] = output_schema_version;
        envelope["command"] = command;
        envelope["params"] = params;
        nlohmann::ordered_json json_rows = nlohmann::ordered_json::array();
        for (const auto& row : rows) {
            nlohmann::ordered_json object;
            for (std::size_t i = 0; i < columns.size(); ++i) {
                std::visit([&](const auto& value) { object[columns[i]] = value; }, row[i]);
            }
            json_rows.push_back(std::move(object));
        }
        envelope["rows"] = std::move(json_rows);
        envelope["diagnostics"] = diagnostics;
        return envelope;
    }

    void write_json(std::ostream& out) const { out << to_json().dump(2) << "\n"; }

    static void write_csv_field(std::ostream& out, const std::string& text) {
        if (text.find_first_of(",\"\n") == std::string::npos) {
            out << text;
            return;
        }
        out << '"';
        for (char ch : text) {
            if (ch == '"') out << '"';
            out << ch;
        }
        out << '"';
    }

    void write_csv(std::ostream& out) const {
        for (std::size_t i = 0; i < columns.size(); ++i) {
            if (i) out << ",";
            write_csv_field(out, columns[i]);
        }
        out << "\n";
        for (const auto& row : rows) {
            for (std::size_t i = 0; i < row.size(); ++i) {
                if (i) out << ",";
                std::visit(
                    [&](const auto& value) {
                        using T = std::decay_t<decltype(value)>;
                        if constexpr (std::is_same_v<T, double>)
                            out << format_double(value);
                        else if constexpr (std::is_same_v<T, std::string>)
                            write_csv_field(out, value);
                        else
                            out << value;
                    },
                    row[i]);
            }
            out << "\n";
        }
    }
};

}  // namespace selbias
