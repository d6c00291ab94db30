#include "kips/csv.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace kips::csv {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt(long v) { return std::to_string(v); }
std::string fmt(int v) { return std::to_string(v); }
std::string fmt(unsigned long long v) { return std::to_string(v); }

Writer::Writer(const std::string& path, bool append)
    : out_(path, append ? std::ios::app : std::ios::trunc) {
    if (!out_) throw std::runtime_error("csv: cannot open " + path);
}

void Writer::header(const std::vector<std::string>& cols) { row(cols); }

void Writer::row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out_ << ',';
        out_ << cells[i];
    }
    out_ << '\n';  // RFC 4180 readers accept bare LF; we write LF only
}

void Writer::flush() { out_.flush(); }

std::vector<std::vector<std::string>> read(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("csv: cannot open " + path);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ss(line);
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        rows.push_back(std::move(cells));
    }
    return rows;
}

}  // namespace kips::csv
