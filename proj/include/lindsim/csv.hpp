// CSV output: first column is time, remaining columns are named series.
// Numbers are written with 17 significant digits so doubles round-trip
// exactly.
#pragma once

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace lindsim {

class CsvWriter {
  public:
    CsvWriter(const std::string& path, const std::vector<std::string>& columns) : out_(path) {
        if (!out_) throw std::runtime_error("cannot open output file: " + path);
        for (std::size_t i = 0; i < columns.size(); ++i) {
            if (i) out_ << ',';
            out_ << columns[i];
        }
        out_ << '\n';
        width_ = columns.size();
    }

    void row(const std::vector<double>& values) {
        if (values.size() != width_) throw std::invalid_argument("csv row width mismatch");
        char buf[32];
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i) out_ << ',';
            std::snprintf(buf, sizeof buf, "%.17g", values[i]);
            out_ << buf;
        }
        out_ << '\n';
    }

  private:
    std::ofstream out_;
    std::size_t width_ = 0;
};

}  // namespace lindsim
