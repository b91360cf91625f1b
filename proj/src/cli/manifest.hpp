#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace xmrmap::cli {

struct InputDigest {
  std::string path;
  std::string sha256;
};

// Written as manifest.json into every output directory. Holds no timestamps
// or absolute output paths, so a replay into another directory reproduces it
// byte for byte.
struct RunManifest {
  std::string command;
  nlohmann::ordered_json parameters;
  std::vector<InputDigest> inputs;
  std::uint64_t seed = 0;
  std::string version;
  std::vector<std::string> outputs;  // file names relative to the output directory
};

inline constexpr const char* kManifestName = "manifest.json";

std::string sha256_file(const std::filesystem::path& path);
InputDigest digest_input(const std::filesystem::path& path);

void write_manifest(const std::filesystem::path& out_dir, const RunManifest& manifest);
RunManifest read_manifest(const std::filesystem::path& path);

// Throws InputError when a recorded input is missing or changed.
void verify_inputs(const RunManifest& manifest);

}  // namespace xmrmap::cli
