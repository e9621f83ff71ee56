#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace xprot {

// FNV-1a 64-bit digest; used only to fingerprint inputs in run manifests.
std::uint64_t fnv1a64(const void* data, std::size_t size);
std::uint64_t fnv1a64_file(const std::string& path);
std::string digest_hex(std::uint64_t digest);

struct RunManifest {
  std::string command;           // full command line
  std::string config_json;       // effective configuration snapshot
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> input_digests;  // path, hex digest
  std::string artifact_version = "xprot 0.1.0";
  std::string started_utc;
  std::string finished_utc;

  void add_input(const std::string& path);
  // Serializes and writes run_manifest.json atomically (temp file + rename).
  void write(const std::string& output_dir) const;
};

std::string utc_timestamp();

}  // namespace xprot
