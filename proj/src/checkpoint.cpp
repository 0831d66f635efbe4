#include "fewsum/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace fewsum {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'F', 'S', 'C', 'K'};
constexpr uint32_t kVersion = 1;
constexpr uint32_t kDtypeF64 = 0;

template <typename T>
void write_pod(std::ofstream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) fail("checkpoint: truncated file");
  return v;
}

void write_string(std::ofstream& os, const std::string& s) {
  write_pod<uint64_t>(os, s.size());
  os.write(s.data(), std::streamsize(s.size()));
}

std::string read_string(std::ifstream& is) {
  uint64_t len = read_pod<uint64_t>(is);
  std::string s(len, '\0');
  is.read(s.data(), std::streamsize(len));
  if (!is) fail("checkpoint: truncated string");
  return s;
}

}  // namespace

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return &t;
  return nullptr;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail("save_checkpoint: cannot open " + path);
  os.write(kMagic, 4);
  write_pod<uint32_t>(os, kVersion);
  write_string(os, ckpt.metadata_json);
  write_pod<uint64_t>(os, ckpt.tensors.size());
  uint64_t offset = 0;
  for (const auto& [name, t] : ckpt.tensors) {
    write_string(os, name);
    write_pod<uint32_t>(os, uint32_t(t.rows()));
    write_pod<uint32_t>(os, uint32_t(t.cols()));
    write_pod<uint32_t>(os, kDtypeF64);
    write_pod<uint64_t>(os, offset);
    offset += uint64_t(t.size()) * sizeof(double);
  }
  for (const auto& [name, t] : ckpt.tensors)
    os.write(reinterpret_cast<const char*>(t.values().data()),
             std::streamsize(t.size() * sizeof(double)));
  if (!os) fail("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail("load_checkpoint: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    fail("load_checkpoint: " + path + " is not a checkpoint file");
  uint32_t version = read_pod<uint32_t>(is);
  if (version != kVersion)
    fail("load_checkpoint: unsupported format version " + std::to_string(version));
  Checkpoint ckpt;
  ckpt.metadata_json = read_string(is);
  uint64_t count = read_pod<uint64_t>(is);
  struct Entry {
    std::string name;
    uint32_t rows, cols;
    uint64_t offset;
  };
  std::vector<Entry> entries;
  for (uint64_t i = 0; i < count; ++i) {
    Entry e;
    e.name = read_string(is);
    e.rows = read_pod<uint32_t>(is);
    e.cols = read_pod<uint32_t>(is);
    uint32_t dtype = read_pod<uint32_t>(is);
    if (dtype != kDtypeF64) fail("load_checkpoint: unsupported dtype for " + e.name);
    e.offset = read_pod<uint64_t>(is);
    entries.push_back(std::move(e));
  }
  std::streampos data_start = is.tellg();
  for (const auto& e : entries) {
    is.seekg(data_start + std::streampos(e.offset));
    size_t n = size_t(e.rows) * size_t(e.cols);
    std::vector<double> values(n);
    is.read(reinterpret_cast<char*>(values.data()), std::streamsize(n * sizeof(double)));
    if (!is) fail("load_checkpoint: truncated tensor data for " + e.name);
    ckpt.tensors.emplace_back(e.name,
                              Tensor::from_values(int(e.rows), int(e.cols), std::move(values)));
  }
  return ckpt;
}

uint64_t file_hash(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail("file_hash: cannot open " + path);
  uint64_t h = 0xcbf29ce484222325ull;
  char buf[65536];
  while (is) {
    is.read(buf, sizeof(buf));
    h = fnv1a64(buf, size_t(is.gcount()), h);
  }
  return h;
}

}  // namespace fewsum
