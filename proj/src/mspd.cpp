#include "xreid/mspd.hpp"

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace xreid {

namespace {

constexpr char kMagic[4] = {'M', 'S', 'P', 'D'};
constexpr uint32_t kVersion = 1;

void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& is, const std::string& path, const char* what) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw IoError("mspd: truncated file while reading " + std::string(what) + ": " + path);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

}  // namespace

void save_mspd(const std::string& path, const Shape& shape, const std::vector<float>& data) {
  if (static_cast<int64_t>(data.size()) != shape_numel(shape))
    throw std::invalid_argument("save_mspd: data size does not match shape " + shape_str(shape));
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("save_mspd: cannot open for writing: " + path);
  os.write(kMagic, 4);
  put_u32(os, kVersion);
  put_u32(os, static_cast<uint32_t>(shape.size()));
  for (int e : shape) put_u32(os, static_cast<uint32_t>(e));
  // float32 payload, little-endian word by word.
  for (float f : data) {
    uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(os, bits);
  }
  if (!os) throw IoError("save_mspd: write failed: " + path);
}

HostTensor load_mspd(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("load_mspd: cannot open: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw IoError("load_mspd: bad magic, not an MSPD file: " + path);
  const uint32_t version = get_u32(is, path, "version");
  if (version != kVersion)
    throw IoError("load_mspd: unsupported version " + std::to_string(version) + ": " + path);
  const uint32_t rank = get_u32(is, path, "rank");
  if (rank > 8) throw IoError("load_mspd: implausible rank " + std::to_string(rank) + ": " + path);
  HostTensor t;
  t.shape.resize(rank);
  int64_t numel = 1;
  for (uint32_t i = 0; i < rank; ++i) {
    const uint32_t e = get_u32(is, path, "extent");
    if (e == 0 || numel > (int64_t(1) << 40) / std::max<uint32_t>(e, 1))
      throw IoError("load_mspd: invalid extents: " + path);
    t.shape[i] = static_cast<int>(e);
    numel *= e;
  }
  t.data.resize(static_cast<size_t>(numel));
  for (int64_t i = 0; i < numel; ++i) {
    const uint32_t bits = get_u32(is, path, "payload");
    std::memcpy(&t.data[static_cast<size_t>(i)], &bits, 4);
  }
  return t;
}

void save_checkpoint(const std::string& dir,
                     const std::vector<std::pair<std::string, HostTensor>>& params) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("save_checkpoint: cannot create directory: " + dir);
  std::ostringstream manifest;
  int idx = 0;
  for (const auto& [name, t] : params) {
    char fname[32];
    std::snprintf(fname, sizeof(fname), "param_%04d.mspd", idx++);
    save_mspd((fs::path(dir) / fname).string(), t.shape, t.data);
    manifest << name << ' ' << fname << '\n';
  }
  std::ofstream mf(fs::path(dir) / "manifest.txt", std::ios::trunc);
  if (!mf) throw IoError("save_checkpoint: cannot write manifest in: " + dir);
  mf << manifest.str();
  if (!mf) throw IoError("save_checkpoint: manifest write failed in: " + dir);
}

std::vector<std::pair<std::string, HostTensor>> load_checkpoint(const std::string& dir) {
  std::ifstream mf(fs::path(dir) / "manifest.txt");
  if (!mf) throw IoError("load_checkpoint: cannot open manifest in: " + dir);
  std::vector<std::pair<std::string, HostTensor>> out;
  std::string line;
  while (std::getline(mf, line)) {
    if (line.empty()) continue;
    const auto sp = line.find(' ');
    if (sp == std::string::npos)
      throw IoError("load_checkpoint: malformed manifest line '" + line + "' in: " + dir);
    const std::string name = line.substr(0, sp);
    const std::string file = line.substr(sp + 1);
    out.emplace_back(name, load_mspd((fs::path(dir) / file).string()));
  }
  if (out.empty()) throw IoError("load_checkpoint: empty manifest in: " + dir);
  return out;
}

}  // namespace xreid
