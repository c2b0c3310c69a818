#include "harness/csv.hpp"

#include <cmath>
#include <cstdio>
#include <type_traits>

#include "core/errors.hpp"

namespace wentzell::harness {

namespace {

std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
}

}  // namespace

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

CsvWriter::CsvWriter(const std::string& path, const std::string& digest, std::vector<std::string> header)
    : path_(path), width_(header.size()), out_(path) {
    if (!out_) throw IoError("cannot write '" + path + "'");
    out_ << "# config_digest=" << digest << '\n';
    for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << quote(header[i]);
    out_ << '\n';
}

void CsvWriter::row(const std::vector<CsvCell>& cells) {
    if (cells.size() != width_) throw IoError("CSV row width differs from the header in '" + path_ + "'");
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out_ << ',';
        std::visit(
            [&](const auto& v) {
                using T = std::decay_t<decltype(v)>;
                if constexpr (std::is_same_v<T, double>) out_ << format_double(v);
                else if constexpr (std::is_same_v<T, long long>) out_ << v;
                else out_ << quote(v);
            },
            cells[i]);
    }
    out_ << '\n';
}

void CsvWriter::close() {
    out_.close();
    if (out_.fail()) throw IoError("failed writing '" + path_ + "'");
}

}  // namespace wentzell::harness
