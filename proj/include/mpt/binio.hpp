// SPDX-License-Identifier: Apache-2.0
//
// Little-endian binary container helpers shared by the checkpoint formats.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mpt {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BinaryWriter {
 public:
  void magic(std::string_view four_cc);
  void u32(std::uint32_t v);
  void f64(double v);
  void f64s(std::span<const double> values);
  void str(std::string_view s);  // u32 byte length then UTF-8 bytes

  const std::string& bytes() const { return buf_; }
  void write_file(const std::filesystem::path& path) const;

 private:
  std::string buf_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::string bytes) : buf_(std::move(bytes)) {}
  static BinaryReader from_file(const std::filesystem::path& path);

  // Throws FormatError unless the next four bytes equal four_cc.
  void expect_magic(std::string_view four_cc);
  std::uint32_t u32();
  double f64();
  void f64s(std::span<double> out);
  std::string str();

  bool at_end() const { return pos_ == buf_.size(); }
  void expect_end() const;

 private:
  void need(std::size_t n) const;
  std::string buf_;
  std::size_t pos_ = 0;
};

std::string read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::string_view bytes);

}  // namespace mpt
