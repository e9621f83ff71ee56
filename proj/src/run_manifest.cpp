#include "xprot/run_manifest.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "xprot/error.hpp"

namespace xprot {

std::uint64_t fnv1a64(const void* data, std::size_t size) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::io_error, "digest: cannot open " + path);
  }
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[65536];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

std::string digest_hex(std::uint64_t digest) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(digest));
  return buf;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void RunManifest::add_input(const std::string& path) {
  input_digests.emplace_back(path, digest_hex(fnv1a64_file(path)));
}

void RunManifest::write(const std::string& output_dir) const {
  namespace fs = std::filesystem;
  nlohmann::ordered_json j;
  j["command"] = command;
  if (!config_json.empty()) {
    j["config"] = nlohmann::ordered_json::parse(config_json, nullptr, false);
  }
  j["seed"] = seed;
  nlohmann::ordered_json inputs = nlohmann::ordered_json::array();
  for (const auto& [path, digest] : input_digests) {
    inputs.push_back({{"path", path}, {"fnv1a64", digest}});
  }
  j["inputs"] = inputs;
  j["artifact_version"] = artifact_version;
  j["started_utc"] = started_utc;
  j["finished_utc"] = finished_utc;

  fs::create_directories(output_dir);
  const fs::path final_path = fs::path(output_dir) / "run_manifest.json";
  const fs::path tmp_path = fs::path(output_dir) / ".run_manifest.json.tmp";
  {
    std::ofstream out(tmp_path, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw Error(ErrorCode::io_error, "run manifest: cannot write " + tmp_path.string());
    }
    out << j.dump(2) << "\n";
  }
  fs::rename(tmp_path, final_path);
}

}  // namespace xprot
