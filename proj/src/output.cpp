#include "barriersim/output.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <stdexcept>

namespace barriersim {

nlohmann::json meta_json(const OutputMeta& meta) {
    return {{"tool_version", kToolVersion},
            {"config_hash", meta.config_hash},
            {"seed", meta.seed},
            {"command", meta.command}};
}

std::string format_cell(const CsvCell& cell) {
    if (const auto* d = std::get_if<double>(&cell)) {
        if (std::isnan(*d)) return "";
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", *d);
        return buf;
    }
    if (const auto* i = std::get_if<std::int64_t>(&cell)) return std::to_string(*i);
    const auto& s = std::get<std::string>(cell);
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string quoted = "\"";
    for (char c : s) {
        if (c == '"') quoted += '"';
        quoted += c;
    }
    return quoted + "\"";
}

CsvWriter::CsvWriter(const std::string& path, const OutputMeta& meta, std::vector<std::string> columns)
    : out_(path), columns_(std::move(columns)), path_(path) {
    if (!out_) throw std::runtime_error("cannot open " + path + " for writing");
    out_ << "# tool_version=" << kToolVersion << '\n';
    out_ << "# config_hash=" << meta.config_hash << '\n';
    out_ << "# seed=" << meta.seed << '\n';
    out_ << "# command=" << meta.command << '\n';
    for (std::size_t i = 0; i < columns_.size(); ++i) out_ << (i ? "," : "") << columns_[i];
    out_ << '\n';
}

void CsvWriter::row(const std::vector<CsvCell>& cells) {
    if (cells.size() != columns_.size())
        throw std::logic_error("row has " + std::to_string(cells.size()) + " cells, expected " +
                               std::to_string(columns_.size()) + " in " + path_);
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << format_cell(cells[i]);
    out_ << '\n';
}

void CsvWriter::close() {
    out_.close();
    if (!out_) throw std::runtime_error("error writing " + path_);
}

void write_json(const std::string& path, const OutputMeta& meta, nlohmann::json body) {
    body["meta"] = meta_json(meta);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << body.dump(2) << '\n';
    if (!out) throw std::runtime_error("error writing " + path);
}

void ensure_directory(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory " + dir + ": " + ec.message());
    const auto probe = std::filesystem::path(dir) / ".write_probe";
    {
        std::ofstream test(probe);
        if (!test) throw std::runtime_error("output directory " + dir + " is not writable");
    }
    std::filesystem::remove(probe, ec);
}

std::string join_path(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

}  // namespace barriersim
