#pragma once
// CSV output with a fixed numeric contract: single header row, '.' decimal
// separator, doubles printed with %.17g so files round-trip exactly.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace microkin::csv {

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
}

class Writer {
  public:
    Writer(const std::string& path, const std::vector<std::string>& columns)
        : out_(path), ncols_(columns.size()) {
        if (!out_) throw std::runtime_error("cannot open output file: " + path);
        for (size_t i = 0; i < columns.size(); ++i) {
            if (i) out_ << ",";
            out_ << columns[i];
        }
        out_ << "\n";
    }

    void row(const std::vector<double>& values) {
        if (values.size() != ncols_)
            throw std::runtime_error("csv row has wrong number of columns");
        for (size_t i = 0; i < values.size(); ++i) {
            if (i) out_ << ",";
            out_ << format_double(values[i]);
        }
        out_ << "\n";
    }

    void row_strings(const std::vector<std::string>& values) {
        if (values.size() != ncols_)
            throw std::runtime_error("csv row has wrong number of columns");
        for (size_t i = 0; i < values.size(); ++i) {
            if (i) out_ << ",";
            out_ << values[i];
        }
        out_ << "\n";
    }

    void close() { out_.close(); }

  private:
    std::ofstream out_;
    size_t ncols_;
};

// Minimal reader used by tests and the compare subcommand.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    int column_index(const std::string& name) const {
        for (size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return static_cast<int>(i);
        return -1;
    }
    double value(size_t r, const std::string& name) const {
        int c = column_index(name);
        if (c < 0) throw std::runtime_error("csv column not found: " + name);
        return std::stod(rows.at(r).at(static_cast<size_t>(c)));
    }
};

inline std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

inline Table read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open csv file: " + path);
    Table t;
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty csv file: " + path);
    t.columns = split_line(line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        t.rows.push_back(split_line(line));
    }
    return t;
}

}  // namespace microkin::csv
