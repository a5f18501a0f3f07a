#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace maestro::logio {

// CSV with a fixed header and deterministic number formatting, so reruns with
// the same seed are byte-identical.
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& columns);

    void write_row(const std::vector<std::string>& cells);

    static std::string format_double(double v);
    static std::string format_int(long long v);

private:
    std::ofstream out_;
    std::size_t columns_;
};

// One JSON record per line.
class JsonlWriter {
public:
    explicit JsonlWriter(const std::filesystem::path& path);
    void write(const nlohmann::json& record);

private:
    std::ofstream out_;
};

} // namespace maestro::logio
