#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "plotyield/error.hpp"

namespace plotyield {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    // Index of a named column, or an error mentioning the file context.
    int column(const std::string& name) const {
        for (size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        fail("csv_missing_column", "required CSV column '" + name + "' not found");
    }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line, size_t line_no) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (quoted)
        fail("csv_parse", "unterminated quote on line " + std::to_string(line_no));
    fields.push_back(cur);
    return fields;
}

}  // namespace detail

inline CsvTable parse_csv(std::istream& in) {
    CsvTable table;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = detail::split_csv_line(line, line_no);
        if (table.header.empty()) {
            table.header = std::move(fields);
        } else {
            if (fields.size() != table.header.size())
                fail("csv_parse", "line " + std::to_string(line_no) + " has " +
                                      std::to_string(fields.size()) + " fields, expected " +
                                      std::to_string(table.header.size()));
            table.rows.push_back(std::move(fields));
        }
    }
    if (table.header.empty()) fail("csv_parse", "CSV input has no header row");
    return table;
}

inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("io_open", "cannot open CSV file: " + path);
    return parse_csv(in);
}

inline std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

inline void write_csv_row(std::ostream& out, const std::vector<std::string>& fields) {
    for (size_t i = 0; i < fields.size(); ++i) {
        if (i) out << ',';
        out << csv_escape(fields[i]);
    }
    out << '\n';
}

inline void write_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path);
    if (!out) fail("io_open", "cannot open file for writing: " + path);
    write_csv_row(out, header);
    for (const auto& row : rows) write_csv_row(out, row);
    if (!out) fail("io_write", "failed writing CSV file: " + path);
}

inline int64_t parse_int(const std::string& s, const std::string& what) {
    try {
        size_t pos = 0;
        int64_t v = std::stoll(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        fail("parse_int", "cannot parse integer " + what + ": '" + s + "'");
    }
}

inline double parse_double(const std::string& s, const std::string& what) {
    try {
        size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        fail("parse_double", "cannot parse number " + what + ": '" + s + "'");
    }
}

}  // namespace plotyield
