#include "dgrd/io.hpp"

#include <array>

namespace dgrd::io {

namespace {

std::array<uint32_t, 256> make_crc_table() {
  std::array<uint32_t, 256> table{};
  for (uint32_t i = 0; i < 256; ++i) {
    uint32_t c = i;
    for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
    table[i] = c;
  }
  return table;
}

}  // namespace

uint32_t crc32(const uint8_t* data, std::size_t n, uint32_t seed) {
  static const std::array<uint32_t, 256> table = make_crc_table();
  uint32_t c = seed ^ 0xFFFFFFFFu;
  for (std::size_t i = 0; i < n; ++i) c = table[(c ^ data[i]) & 0xFFu] ^ (c >> 8);
  return c ^ 0xFFFFFFFFu;
}

void write_file(const std::string& path, const char magic[8], const Writer& payload) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(IoErrorKind::kOpenFailed, "cannot open " + path + " for writing");
  out.write(magic, 8);
  const auto& buf = payload.data();
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  const uint32_t crc = crc32(buf.data(), buf.size());
  char trailer[4];
  for (int i = 0; i < 4; ++i) trailer[i] = static_cast<char>(crc >> (8 * i));
  out.write(trailer, 4);
  if (!out) throw IoError(IoErrorKind::kOpenFailed, "write failed for " + path);
}

std::vector<uint8_t> read_file(const std::string& path, const char magic[8]) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(IoErrorKind::kOpenFailed, "cannot open " + path);
  std::vector<uint8_t> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (raw.size() < 12) throw IoError(IoErrorKind::kTruncated, path + " smaller than header");
  if (std::memcmp(raw.data(), magic, 8) != 0) {
    throw IoError(IoErrorKind::kMagicMismatch, path + " does not carry the expected magic");
  }
  const std::size_t payload_len = raw.size() - 12;
  uint32_t stored = 0;
  for (int i = 0; i < 4; ++i) stored |= static_cast<uint32_t>(raw[raw.size() - 4 + i]) << (8 * i);
  const uint32_t actual = crc32(raw.data() + 8, payload_len);
  if (stored != actual) {
    throw IoError(IoErrorKind::kChecksumMismatch, path + " payload checksum mismatch");
  }
  return std::vector<uint8_t>(raw.begin() + 8, raw.end() - 4);
}

}  // namespace dgrd::io
