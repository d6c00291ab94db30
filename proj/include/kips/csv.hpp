#pragma once

#include <fstream>
#include <string>
#include <vector>

namespace kips::csv {

// 17 significant digits: enough for bit-exact double round-trips.
std::string fmt(double v);
std::string fmt(long v);
std::string fmt(int v);
std::string fmt(unsigned long long v);

class Writer {
public:
    explicit Writer(const std::string& path, bool append = false);
    void header(const std::vector<std::string>& cols);
    void row(const std::vector<std::string>& cells);
    void flush();

private:
    std::ofstream out_;
};

// Minimal reader for the files this project writes (no quoting, no embedded
// separators). Returns all records including the header row.
std::vector<std::vector<std::string>> read(const std::string& path);

}  // namespace kips::csv
