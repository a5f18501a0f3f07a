#include "maestro/logio.hpp"

#include <cinttypes>
#include <cstdio>

#include "maestro/errors.hpp"

namespace maestro::logio {

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& columns)
    : out_(path), columns_(columns.size()) {
    if (!out_) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (i) out_ << ',';
        out_ << columns[i];
    }
    out_ << '\n';
}

void CsvWriter::write_row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_) {
        throw Error(ErrorCode::Internal, "CSV row width does not match the header");
    }
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out_ << ',';
        out_ << cells[i];
    }
    out_ << '\n';
    out_.flush();
}

std::string CsvWriter::format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

std::string CsvWriter::format_int(long long v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%lld", v);
    return buf;
}

JsonlWriter::JsonlWriter(const std::filesystem::path& path) : out_(path) {
    if (!out_) throw Error(ErrorCode::IoError, "cannot write " + path.string());
}

void JsonlWriter::write(const nlohmann::json& record) {
    out_ << record.dump() << '\n';
    out_.flush();
}

} // namespace maestro::logio
