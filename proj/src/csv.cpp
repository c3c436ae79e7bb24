#include "trapscore/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "trapscore/error.hpp"

namespace trapscore::csv {
namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

}  // namespace

std::vector<std::string> split_line(std::string_view line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(trim(cur));
    return out;
}

Table::Table(std::string name, std::vector<std::string> header, std::vector<Row> rows)
    : name_(std::move(name)), header_(std::move(header)), rows_(std::move(rows)) {}

Table Table::read(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open input file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(path.filename().string(), ss.str());
}

Table Table::parse(std::string name, std::string_view text) {
    if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
    std::vector<std::string> header;
    std::vector<Row> rows;
    std::size_t line_no = 0, pos = 0;
    bool have_header = false;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.find_first_not_of(" \t") == std::string_view::npos) {
            if (nl == text.size()) break;
            continue;
        }
        if (!have_header) {
            header = split_line(line);
            have_header = true;
        } else {
            rows.push_back({line_no, split_line(line)});
        }
        if (nl == text.size()) break;
    }
    if (!have_header) throw SchemaError(name + ": missing header row");
    for (const auto& row : rows) {
        if (row.fields.size() != header.size()) {
            throw ParseError(name + " line " + std::to_string(row.line) + ": expected " +
                             std::to_string(header.size()) + " fields, found " +
                             std::to_string(row.fields.size()));
        }
    }
    return Table(std::move(name), std::move(header), std::move(rows));
}

bool Table::has_column(std::string_view column) const {
    return std::find(header_.begin(), header_.end(), column) != header_.end();
}

std::size_t Table::column(std::string_view column) const {
    const auto it = std::find(header_.begin(), header_.end(), column);
    if (it == header_.end())
        throw SchemaError(name_ + ": missing required column '" + std::string(column) + "'");
    return static_cast<std::size_t>(it - header_.begin());
}

const std::string& Table::at(const Row& row, std::size_t column) const {
    return row.fields.at(column);
}

long long Table::as_int(const Row& row, std::size_t column) const {
    const auto& s = at(row, column);
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
        throw ParseError(name_ + " line " + std::to_string(row.line) + ", column '" +
                         header_[column] + "': '" + s + "' is not an integer");
    }
    return v;
}

double Table::as_double(const Row& row, std::size_t column) const {
    const auto& s = at(row, column);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
        throw ParseError(name_ + " line " + std::to_string(row.line) + ", column '" +
                         header_[column] + "': '" + s + "' is not a finite number");
    }
    return v;
}

bool Table::as_bool01(const Row& row, std::size_t column) const {
    const auto& s = at(row, column);
    if (s == "0") return false;
    if (s == "1") return true;
    throw ParseError(name_ + " line " + std::to_string(row.line) + ", column '" + header_[column] +
                     "': '" + s + "' is not a 0/1 boolean");
}

std::string format_double(double value) {
    if (value == 0.0) return "0";
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, ptr);
}

std::string escape(std::string_view field) {
    if (field.find_first_of(",\"\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

}  // namespace trapscore::csv
