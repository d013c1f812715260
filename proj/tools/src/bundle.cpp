#include "mncastle_cli/bundle.hpp"

#include <openssl/evp.h>

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace mncastle::cli {

namespace fs = std::filesystem;

namespace {

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const std::string& in, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

}  // namespace

std::string encode_tensor(const Tensor& t) {
  Json header;
  header["dims"] = t.shape();
  header["dtype"] = "f64";
  header["endianness"] = "little";
  const std::string text = header.dump();
  std::string out;
  out.reserve(8 + text.size() + 8 * t.size());
  put_u64(out, text.size());
  out += text;
  for (double v : t.values()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

Tensor decode_tensor(const std::string& bytes) {
  if (bytes.size() < 8) throw IoError("tensor payload truncated");
  const std::uint64_t len = get_u64(bytes, 0);
  if (len > bytes.size() - 8) throw IoError("tensor header truncated");
  Json header;
  try {
    header = Json::parse(bytes.substr(8, len));
  } catch (const Json::exception& e) {
    throw IoError(std::string("bad tensor header: ") + e.what());
  }
  if (header.value("dtype", "") != "f64" || header.value("endianness", "") != "little") {
    throw IoError("unsupported tensor dtype or endianness");
  }
  const Shape shape = header.at("dims").get<Shape>();
  const std::size_t count = shape_size(shape);
  const std::size_t start = 8 + len;
  if (bytes.size() - start != 8 * count) throw IoError("tensor payload size does not match its dims");
  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i) values[i] = std::bit_cast<double>(get_u64(bytes, start + 8 * i));
  return Tensor(shape, std::move(values));
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

void write_tensor(const fs::path& path, const Tensor& t) { write_file(path, encode_tensor(t)); }

Tensor read_tensor(const fs::path& path) { return decode_tensor(read_file(path)); }

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw IoError("SHA-256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string encode_values(const Tensor& values, const std::vector<std::string>& names) {
  const std::size_t n = values.dim(0);
  const std::size_t t = values.dim(1);
  std::string out = "t";
  for (std::size_t i = 0; i < n; ++i) out += "," + (i < names.size() ? names[i] : "x" + std::to_string(i));
  out += "\n";
  for (std::size_t k = 0; k < t; ++k) {
    out += std::to_string(k);
    for (std::size_t i = 0; i < n; ++i) out += "," + format_double(values[i * t + k]);
    out += "\n";
  }
  return out;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

Tensor decode_values(const std::string& text, std::vector<std::string>* names) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw IoError("values CSV is empty");
  const auto header = split_csv(line);
  if (header.size() < 2) throw IoError("values CSV needs at least one series column");
  const std::size_t n = header.size() - 1;
  if (names) names->assign(header.begin() + 1, header.end());
  std::vector<std::vector<double>> cols(n);
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != n + 1) throw IoError("values CSV row " + std::to_string(row) + " has the wrong width");
    for (std::size_t i = 0; i < n; ++i) {
      double v = 0.0;
      const auto& s = cells[i + 1];
      const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
      if (res.ec != std::errc()) throw IoError("values CSV row " + std::to_string(row) + " is not numeric");
      cols[i].push_back(v);
    }
  }
  const std::size_t t = cols[0].size();
  Tensor out(Shape{n, t});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < t; ++k) out[i * t + k] = cols[i][k];
  return out;
}

void Bundle::put_text(const std::string& name, const std::string& bytes) {
  write_file(dir_ / name, bytes);
  manifest_["payloads"][name] = {{"sha256", sha256_hex(bytes)}, {"bytes", bytes.size()}};
}

void Bundle::put_tensor(const std::string& name, const Tensor& t) { put_text(name, encode_tensor(t)); }

bool Bundle::has(const std::string& name) const {
  return manifest_.contains("payloads") && manifest_["payloads"].contains(name);
}

std::string Bundle::get_text(const std::string& name) const {
  if (!has(name)) throw IoError("bundle " + dir_.string() + " has no payload " + name);
  std::string bytes = read_file(dir_ / name);
  if (sha256_hex(bytes) != manifest_["payloads"][name]["sha256"].get<std::string>()) {
    throw IoError("digest mismatch for " + (dir_ / name).string());
  }
  return bytes;
}

Tensor Bundle::get_tensor(const std::string& name) const { return decode_tensor(get_text(name)); }

Tensor Bundle::values() const { return decode_values(get_text(kValuesName)); }

std::vector<std::string> Bundle::series_names() const {
  std::vector<std::string> names;
  decode_values(get_text(kValuesName), &names);
  return names;
}

void Bundle::save() const { write_file(dir_ / kManifestName, manifest_.dump(2) + "\n"); }

Bundle Bundle::load(const fs::path& dir) {
  Bundle b(dir);
  try {
    b.manifest_ = Json::parse(read_file(dir / kManifestName));
  } catch (const Json::exception& e) {
    throw IoError("bad manifest in " + dir.string() + ": " + e.what());
  }
  if (b.manifest_.contains("payloads")) {
    for (const auto& [name, _] : b.manifest_["payloads"].items()) b.get_text(name);
  }
  return b;
}

}  // namespace mncastle::cli
