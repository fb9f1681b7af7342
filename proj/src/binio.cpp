// SPDX-License-Identifier: Apache-2.0

#include "mpt/binio.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace mpt {

void BinaryWriter::magic(std::string_view four_cc) {
  if (four_cc.size() != 4) throw std::invalid_argument("magic must be four bytes");
  buf_.append(four_cc);
}

void BinaryWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xffU));
}

void BinaryWriter::f64(double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((bits >> (8 * i)) & 0xffU));
}

void BinaryWriter::f64s(std::span<const double> values) {
  for (double v : values) f64(v);
}

void BinaryWriter::str(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  buf_.append(s);
}

void BinaryWriter::write_file(const std::filesystem::path& path) const {
  write_file_bytes(path, buf_);
}

BinaryReader BinaryReader::from_file(const std::filesystem::path& path) {
  return BinaryReader(read_file_bytes(path));
}

void BinaryReader::need(std::size_t n) const {
  if (buf_.size() - pos_ < n) throw FormatError("truncated binary container");
}

void BinaryReader::expect_magic(std::string_view four_cc) {
  need(4);
  if (std::string_view(buf_).substr(pos_, 4) != four_cc)
    throw FormatError("bad magic: expected '" + std::string(four_cc) + "'");
  pos_ += 4;
}

std::uint32_t BinaryReader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
  pos_ += 4;
  return v;
}

double BinaryReader::f64() {
  need(8);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i)
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
  pos_ += 8;
  return std::bit_cast<double>(bits);
}

void BinaryReader::f64s(std::span<double> out) {
  need(out.size() * 8);
  for (double& v : out) v = f64();
}

std::string BinaryReader::str() {
  const std::uint32_t n = u32();
  need(n);
  std::string s = buf_.substr(pos_, n);
  pos_ += n;
  return s;
}

void BinaryReader::expect_end() const {
  if (!at_end()) throw FormatError("trailing bytes after container payload");
}

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_bytes(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("short write to " + path.string());
}

}  // namespace mpt
