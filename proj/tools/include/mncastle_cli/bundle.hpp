#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "mncastle/tensor.hpp"

namespace mncastle::cli {

using Json = nlohmann::ordered_json;

/// Raised for unreadable or corrupt files; maps to exit code 3.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kToolkitVersion = "0.1.0";
inline constexpr const char* kManifestName = "manifest.json";
inline constexpr const char* kValuesName = "values.csv";
inline constexpr const char* kCausalName = "causal.bin";
inline constexpr const char* kMixingName = "mixing.bin";
inline constexpr const char* kAdjacencyName = "adjacency.bin";
inline constexpr const char* kTruthSpectrumName = "spectrum_truth.bin";
inline constexpr const char* kEstimatedSpectrumName = "spectrum_estimated.bin";

/// Payload layout: u64 little-endian header length, a JSON header
/// {"dims": [...], "dtype": "f64", "endianness": "little"}, then the values
/// as little-endian IEEE-754 doubles in row-major order.
std::string encode_tensor(const Tensor& t);
Tensor decode_tensor(const std::string& bytes);

void write_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

/// Lower-case hex SHA-256 of a byte string.
std::string sha256_hex(const std::string& bytes);

/// N x T values as CSV with header "t,<names...>", one row per time point.
std::string encode_values(const Tensor& values, const std::vector<std::string>& names);
/// Parses encode_values output back into an N x T array.
Tensor decode_values(const std::string& text, std::vector<std::string>* names = nullptr);

/// Text with enough digits to round-trip a double.
std::string format_double(double v);

/// A directory holding manifest.json plus the payload files it lists.
/// Every payload is registered in manifest["payloads"] with its SHA-256.
class Bundle {
 public:
  explicit Bundle(std::filesystem::path dir) : dir_(std::move(dir)) {}

  const std::filesystem::path& dir() const { return dir_; }
  Json& manifest() { return manifest_; }
  const Json& manifest() const { return manifest_; }

  void put_text(const std::string& name, const std::string& bytes);
  void put_tensor(const std::string& name, const Tensor& t);
  bool has(const std::string& name) const;
  /// Reads a payload and checks it against the manifest digest.
  std::string get_text(const std::string& name) const;
  Tensor get_tensor(const std::string& name) const;

  Tensor values() const;
  std::vector<std::string> series_names() const;

  /// Writes manifest.json (payloads are written by put_*).
  void save() const;
  /// Loads the manifest and verifies every listed payload digest.
  static Bundle load(const std::filesystem::path& dir);

 private:
  std::filesystem::path dir_;
  Json manifest_ = Json::object();
};

}  // namespace mncastle::cli
