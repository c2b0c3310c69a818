#pragma once

#include <string>
#include <vector>

namespace wentzell::harness {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

struct Chart {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_y = false;  // nonpositive values are dropped on a log axis
    std::vector<Series> series;
};

/// One line chart per file, with the config digest in a leading comment.
void write_svg(const std::string& path, const std::string& digest, const Chart& chart);

}  // namespace wentzell::harness
