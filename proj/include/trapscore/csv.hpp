#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace trapscore::csv {

struct Row {
    std::size_t line = 0;  // 1-based line number in the file
    std::vector<std::string> fields;
};

class Table {
public:
    Table(std::string name, std::vector<std::string> header, std::vector<Row> rows);

    static Table read(const std::filesystem::path& path);
    static Table parse(std::string name, std::string_view text);

    const std::string& name() const noexcept { return name_; }
    const std::vector<std::string>& header() const noexcept { return header_; }
    const std::vector<Row>& rows() const noexcept { return rows_; }

    bool has_column(std::string_view column) const;
    // Throws SchemaError naming the column when it is absent.
    std::size_t column(std::string_view column) const;

    const std::string& at(const Row& row, std::size_t column) const;
    long long as_int(const Row& row, std::size_t column) const;
    double as_double(const Row& row, std::size_t column) const;
    bool as_bool01(const Row& row, std::size_t column) const;

private:
    std::string name_;
    std::vector<std::string> header_;
    std::vector<Row> rows_;
};

std::vector<std::string> split_line(std::string_view line);

// Shortest decimal text that round-trips, for deterministic outputs.
std::string format_double(double value);

// Quotes a field when it contains a comma, quote or newline.
std::string escape(std::string_view field);

}  // namespace trapscore::csv
