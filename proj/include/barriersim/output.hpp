#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

namespace barriersim {

inline constexpr const char* kToolVersion = "1.0.0";

/// Provenance stamped into every output file.
struct OutputMeta {
    std::string command;
    std::string config_hash;
    std::uint64_t seed = 0;
};

nlohmann::json meta_json(const OutputMeta& meta);

using CsvCell = std::variant<double, std::int64_t, std::string>;

/// CSV with a "# key=value" preamble (tool_version, config_hash, seed,
/// command) followed by a header row. Doubles are written with 17
/// significant digits; NaN becomes an empty cell.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const OutputMeta& meta, std::vector<std::string> columns);

    void row(const std::vector<CsvCell>& cells);
    const std::vector<std::string>& columns() const noexcept { return columns_; }
    void close();

private:
    std::ofstream out_;
    std::vector<std::string> columns_;
    std::string path_;
};

std::string format_cell(const CsvCell& cell);

/// Writes `body` with a top-level "meta" object added.
void write_json(const std::string& path, const OutputMeta& meta, nlohmann::json body);

/// Creates the directory (and parents); throws if it cannot be written.
void ensure_directory(const std::string& dir);

std::string join_path(const std::string& dir, const std::string& name);

}  // namespace barriersim
