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

#include "ensvis/binio.hpp"

#include "ensvis/error.hpp"

#include <bit>
#include <fstream>
#include <system_error>

namespace ensvis {

void ByteWriter::u8(std::uint8_t v)
{
  buf_.push_back(v);
}

void ByteWriter::u16(std::uint16_t v)
{
  for (int i = 0; i < 2; ++i)
  {
    buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
}

void ByteWriter::u32(std::uint32_t v)
{
  for (int i = 0; i < 4; ++i)
  {
    buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
}

void ByteWriter::u64(std::uint64_t v)
{
  for (int i = 0; i < 8; ++i)
  {
    buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
}

void ByteWriter::f32(float v)
{
  u32(std::bit_cast<std::uint32_t>(v));
}

void ByteWriter::f64(double v)
{
  u64(std::bit_cast<std::uint64_t>(v));
}

void ByteWriter::bytes(std::string_view s)
{
  buf_.insert(buf_.end(), s.begin(), s.end());
}

std::span<std::uint8_t const> ByteReader::take(std::size_t n)
{
  if (n > remaining())
  {
    fail(ErrorCode::Truncated, "need " + std::to_string(n) + " bytes at offset " +
                                   std::to_string(pos_) + ", " + std::to_string(remaining()) +
                                   " available");
  }
  auto out = data_.subspan(pos_, n);
  pos_ += n;
  return out;
}

std::uint8_t ByteReader::u8()
{
  return take(1)[0];
}

std::uint16_t ByteReader::u16()
{
  auto          b = take(2);
  std::uint16_t v = 0;
  for (int i = 0; i < 2; ++i)
  {
    v = static_cast<std::uint16_t>(v | (std::uint16_t{b[i]} << (8 * i)));
  }
  return v;
}

std::uint32_t ByteReader::u32()
{
  auto          b = take(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
  {
    v |= std::uint32_t{b[i]} << (8 * i);
  }
  return v;
}

std::uint64_t ByteReader::u64()
{
  auto          b = take(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
  {
    v |= std::uint64_t{b[i]} << (8 * i);
  }
  return v;
}

float ByteReader::f32()
{
  return std::bit_cast<float>(u32());
}

double ByteReader::f64()
{
  return std::bit_cast<double>(u64());
}

std::string ByteReader::bytes(std::size_t n)
{
  auto b = take(n);
  return {b.begin(), b.end()};
}

std::vector<std::uint8_t> read_file(std::filesystem::path const &path)
{
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in)
  {
    fail(ErrorCode::Io, "cannot open " + path.string());
  }
  auto const size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  std::vector<std::uint8_t> data(size);
  if (size > 0 && !in.read(reinterpret_cast<char *>(data.data()), static_cast<std::streamsize>(size)))
  {
    fail(ErrorCode::Io, "read failed for " + path.string());
  }
  return data;
}

void write_file(std::filesystem::path const &path, std::span<std::uint8_t const> data)
{
  if (path.has_parent_path())
  {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
    {
      fail(ErrorCode::Io, "cannot open " + tmp.string() + " for writing");
    }
    out.write(reinterpret_cast<char const *>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out)
    {
      fail(ErrorCode::Io, "write failed for " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec)
  {
    fail(ErrorCode::Io, "cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

}  // namespace ensvis
