#pragma once

#include <fstream>
#include <string>
#include <variant>
#include <vector>

namespace wentzell::harness {

using CsvCell = std::variant<double, long long, std::string>;

/// Floats at 17 significant digits so values round-trip exactly.
std::string format_double(double v);

/// CSV file whose first line is "# config_digest=<hex>", then the header.
/// Every row must match the header width.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::string& digest, std::vector<std::string> header);

    void row(const std::vector<CsvCell>& cells);
    void close();
    const std::string& path() const { return path_; }

private:
    std::string path_;
    std::size_t width_;
    std::ofstream out_;
};

}  // namespace wentzell::harness
