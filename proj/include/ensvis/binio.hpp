//------------------------------------------------------------------------------
//
//   Copyright 2026 The ensvis Authors
//
//   Licensed under the Apache License, Version 2.0 (the "License");
//   you may not use this file except in compliance with the License.
//   You may obtain a copy of the License at
//
//       http://www.apache.org/licenses/LICENSE-2.0
//
//   Unless required by applicable law or agreed to in writing, software
//   distributed under the License is distributed on an "AS IS" BASIS,
//   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
//   See the License for the specific language governing permissions and
//   limitations under the License.
//
//------------------------------------------------------------------------------

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ensvis {

// Little-endian byte encoding shared by every on-disk format in the library.
class ByteWriter
{
public:
  void u8(std::uint8_t v);
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void f64(double v);
  void bytes(std::string_view s);

  std::vector<std::uint8_t> const &buffer() const noexcept
  {
    return buf_;
  }

  std::vector<std::uint8_t> take() noexcept
  {
    return std::move(buf_);
  }

  void reserve(std::size_t n)
  {
    buf_.reserve(n);
  }

private:
  std::vector<std::uint8_t> buf_;
};

// Reads fail with ErrorCode::Truncated when the buffer runs out.
class ByteReader
{
public:
  explicit ByteReader(std::span<std::uint8_t const> data)
    : data_(data)
  {}

  std::uint8_t  u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  float         f32();
  double        f64();
  std::string   bytes(std::size_t n);

  std::size_t remaining() const noexcept
  {
    return data_.size() - pos_;
  }

  std::size_t position() const noexcept
  {
    return pos_;
  }

private:
  std::span<std::uint8_t const> take(std::size_t n);

  std::span<std::uint8_t const> data_;
  std::size_t                   pos_ = 0;
};

std::vector<std::uint8_t> read_file(std::filesystem::path const &path);

// Writes through a sibling temporary and renames, so readers never observe a
// partially written file.
void write_file(std::filesystem::path const &path, std::span<std::uint8_t const> data);

}  // namespace ensvis
