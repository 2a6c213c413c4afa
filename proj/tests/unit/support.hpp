#pragma once

// Shared helpers for the unit suite. PCAR_SOURCE_DIR is injected by CMake.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace pcar::test {

inline std::filesystem::path source_dir() { return PCAR_SOURCE_DIR; }

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Frozen values from tests/fixtures/derive_golden.py.
inline const nlohmann::json& golden() {
    static const nlohmann::json j = nlohmann::json::parse(read_file(source_dir() / "tests/fixtures/golden.json"));
    return j;
}

inline std::filesystem::path starter_catalog() { return source_dir() / "data/starter_catalog.tsv"; }

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("pcar_unit_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace pcar::test
