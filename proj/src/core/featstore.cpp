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

#include "ensvis/featstore.hpp"

#include "ensvis/binio.hpp"
#include "ensvis/error.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <regex>
#include <set>
#include <sstream>

namespace ensvis::featstore {

namespace {

constexpr std::array<KnownLayer, 6> kKnownLayers = {{
    {"alexnet", 4, 18432, 2500},
    {"alexnet", 5, 4096, 1000},
    {"alexnet", 7, 4096, 1000},
    {"vgg16", 5, 18432, 2500},
    {"vgg16", 6, 4096, 1000},
    {"vgg16", 7, 4096, 1000},
}};

bool valid_name_char(char c)
{
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
         c == '_' || c == '.' || c == '+';
}

void check_model_name(std::string const &name)
{
  if (name.empty() || name.size() > 255)
  {
    fail(ErrorCode::Format, "model name must be 1..255 bytes");
  }
  if (!std::all_of(name.begin(), name.end(), valid_name_char))
  {
    fail(ErrorCode::Format, "model name '" + name + "' has characters outside [A-Za-z0-9._+-]");
  }
}

// Header fields in order; the reader is left at the start of the id table.
FeatureHeader parse_header(ByteReader &r)
{
  if (r.remaining() < 4)
  {
    fail(ErrorCode::Truncated, "file shorter than the magic");
  }
  if (r.bytes(4) != "DFV1")
  {
    fail(ErrorCode::Format, "bad magic, expected DFV1");
  }
  auto const version = r.u16();
  if (version != kVersion)
  {
    fail(ErrorCode::Format, "unsupported version " + std::to_string(version));
  }
  FeatureHeader h;
  auto const    name_len = r.u8();
  h.model_name           = r.bytes(name_len);
  check_model_name(h.model_name);
  h.layer_id = r.u32();
  h.dim      = r.u32();
  h.count    = r.u64();
  if (h.dim == 0)
  {
    fail(ErrorCode::Format, "feature dimension is zero");
  }
  return h;
}

void check_against_file_name(FeatureHeader const &h, std::filesystem::path const &path)
{
  auto const parsed = parse_feature_file_name(path.filename().string());
  if (!parsed)
  {
    return;
  }
  if (parsed->first.model != h.model_name || parsed->first.layer != h.layer_id)
  {
    fail(ErrorCode::Format, path.string() + ": header says " + h.model_name + ":" +
                                std::to_string(h.layer_id) + " but file name says " +
                                parsed->first.to_string());
  }
}

}  // namespace

void FeatureFile::validate() const
{
  check_model_name(model_name);
  if (dim == 0)
  {
    fail(ErrorCode::Format, "feature dimension is zero");
  }
  if (rows.size() != ids.size() * dim)
  {
    fail(ErrorCode::Truncated, "payload holds " + std::to_string(rows.size()) + " values, expected " +
                                   std::to_string(ids.size() * dim));
  }
  for (std::size_t i = 1; i < ids.size(); ++i)
  {
    if (ids[i] <= ids[i - 1])
    {
      fail(ErrorCode::CorruptIndex, "ids not strictly increasing at row " + std::to_string(i));
    }
  }
}

std::size_t header_size(std::string const &model_name) noexcept
{
  return 4 + 2 + 1 + model_name.size() + 4 + 4 + 8;
}

std::size_t file_size(std::string const &model_name, std::uint32_t dim, std::uint64_t count) noexcept
{
  return header_size(model_name) + count * (8 + 4 * static_cast<std::size_t>(dim));
}

std::vector<std::uint8_t> encode_features(FeatureFile const &ff)
{
  ff.validate();
  ByteWriter w;
  w.reserve(file_size(ff.model_name, ff.dim, ff.count()));
  w.bytes("DFV1");
  w.u16(kVersion);
  w.u8(static_cast<std::uint8_t>(ff.model_name.size()));
  w.bytes(ff.model_name);
  w.u32(ff.layer_id);
  w.u32(ff.dim);
  w.u64(ff.count());
  for (auto id : ff.ids)
  {
    w.u64(id);
  }
  for (float v : ff.rows)
  {
    w.f32(v);
  }
  return w.take();
}

FeatureHeader decode_header(std::span<std::uint8_t const> bytes)
{
  ByteReader r(bytes);
  return parse_header(r);
}

FeatureFile decode_features(std::span<std::uint8_t const> bytes)
{
  ByteReader r(bytes);
  auto const h = parse_header(r);

  std::uint64_t const row_bytes = 8 + 4 * std::uint64_t{h.dim};
  if (h.count > (std::numeric_limits<std::uint64_t>::max() - header_size(h.model_name)) / row_bytes)
  {
    fail(ErrorCode::Truncated, "row count " + std::to_string(h.count) + " overflows the file size");
  }
  std::uint64_t const expected = file_size(h.model_name, h.dim, h.count);
  if (bytes.size() != expected)
  {
    fail(ErrorCode::Truncated, "file is " + std::to_string(bytes.size()) + " bytes, header implies " +
                                   std::to_string(expected));
  }

  FeatureFile ff;
  ff.model_name = h.model_name;
  ff.layer_id   = h.layer_id;
  ff.dim        = h.dim;
  ff.ids.resize(h.count);
  for (auto &id : ff.ids)
  {
    id = r.u64();
  }
  ff.rows.resize(h.count * h.dim);
  for (auto &v : ff.rows)
  {
    v = r.f32();
  }
  ff.validate();
  return ff;
}

void write_features(FeatureFile const &ff, std::filesystem::path const &path)
{
  write_file(path, encode_features(ff));
}

FeatureFile read_features(std::filesystem::path const &path)
{
  auto const bytes = read_file(path);
  try
  {
    auto ff = decode_features(bytes);
    check_against_file_name(FeatureHeader{ff.model_name, ff.layer_id, ff.dim, ff.count()}, path);
    return ff;
  }
  catch (Error const &e)
  {
    throw e.within(path.string());
  }
}

FeatureHeader read_header(std::filesystem::path const &path)
{
  auto const bytes = read_file(path);
  try
  {
    auto const h = decode_header(bytes);
    if (bytes.size() != file_size(h.model_name, h.dim, h.count))
    {
      fail(ErrorCode::Truncated, "file size does not match header");
    }
    check_against_file_name(h, path);
    return h;
  }
  catch (Error const &e)
  {
    throw e.within(path.string());
  }
}

std::string LayerKey::to_string() const
{
  return model + ":" + std::to_string(layer);
}

LayerKey parse_layer_key(std::string const &text)
{
  auto const colon = text.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == text.size())
  {
    fail(ErrorCode::InvalidArgument, "expected model:layer, got '" + text + "'");
  }
  LayerKey key;
  key.model = text.substr(0, colon);
  try
  {
    std::size_t used = 0;
    auto const  v    = std::stoul(text.substr(colon + 1), &used);
    if (used != text.size() - colon - 1 || v > std::numeric_limits<std::uint32_t>::max())
    {
      throw std::invalid_argument("layer");
    }
    key.layer = static_cast<std::uint32_t>(v);
  }
  catch (std::exception const &)
  {
    fail(ErrorCode::InvalidArgument, "bad layer index in '" + text + "'");
  }
  return key;
}

std::string feature_file_name(LayerKey const &key, Split split)
{
  return key.model + "_" + std::to_string(key.layer) + "_" + std::string(to_string(split)) + ".dfv";
}

std::optional<std::pair<LayerKey, Split>> parse_feature_file_name(std::string const &file_name)
{
  static std::regex const pattern(R"(^(.+)_(\d{1,9})_(train|test)\.dfv$)");
  std::smatch             m;
  if (!std::regex_match(file_name, m, pattern))
  {
    return std::nullopt;
  }
  LayerKey key{m[1].str(), static_cast<std::uint32_t>(std::stoul(m[2].str()))};
  return std::make_pair(key, parse_split(m[3].str()));
}

std::span<KnownLayer const> known_layers() noexcept
{
  return kKnownLayers;
}

std::optional<KnownLayer> find_known_layer(LayerKey const &key)
{
  for (auto const &k : kKnownLayers)
  {
    if (key.model == k.model && key.layer == k.layer)
    {
      return k;
    }
  }
  return std::nullopt;
}

void FeatureRegistry::add(LayerKey const &key, Split split, std::filesystem::path path)
{
  entries[key][split] = std::move(path);
}

std::optional<std::filesystem::path> FeatureRegistry::find(LayerKey const &key, Split split) const
{
  auto const it = entries.find(key);
  if (it == entries.end())
  {
    return std::nullopt;
  }
  auto const jt = it->second.find(split);
  if (jt == it->second.end())
  {
    return std::nullopt;
  }
  return jt->second;
}

FeatureRegistry FeatureRegistry::scan(std::filesystem::path const &dir)
{
  FeatureRegistry reg;
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec))
  {
    return reg;
  }
  std::vector<std::filesystem::path> files;
  for (auto const &entry : std::filesystem::directory_iterator(dir, ec))
  {
    files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (auto const &path : files)
  {
    if (auto parsed = parse_feature_file_name(path.filename().string()))
    {
      reg.add(parsed->first, parsed->second, path);
    }
  }
  return reg;
}

bool RegistryReport::ok() const noexcept
{
  return std::none_of(issues.begin(), issues.end(),
                      [](auto const &i) { return i.kind == RegistryIssue::Kind::Violation; });
}

std::string RegistryReport::to_text() const
{
  std::ostringstream out;
  for (auto const &issue : issues)
  {
    out << (issue.kind == RegistryIssue::Kind::Violation ? "violation " : "note      ")
        << issue.key.to_string() << ": " << issue.message << "\n";
  }
  out << (ok() ? "registry ok\n" : "registry has violations\n");
  return out.str();
}

RegistryReport validate_registry(FeatureRegistry const &reg)
{
  RegistryReport report;
  auto const     violation = [&](LayerKey const &key, std::string msg) {
    report.issues.push_back({RegistryIssue::Kind::Violation, key, std::move(msg)});
  };
  auto const note = [&](LayerKey const &key, std::string msg) {
    report.issues.push_back({RegistryIssue::Kind::Note, key, std::move(msg)});
  };

  for (auto const &[key, splits] : reg.entries)
  {
    std::set<std::uint32_t> dims;
    for (auto const &[split, path] : splits)
    {
      try
      {
        auto const h = read_header(path);
        if (h.model_name != key.model || h.layer_id != key.layer)
        {
          violation(key, std::string(to_string(split)) + " file header is " + h.model_name + ":" +
                             std::to_string(h.layer_id));
        }
        dims.insert(h.dim);
      }
      catch (Error const &e)
      {
        violation(key, e.detail());
      }
    }
    for (Split split : {Split::Train, Split::Test})
    {
      if (!splits.contains(split))
      {
        note(key, "no " + std::string(to_string(split)) + " split registered");
      }
    }
    if (dims.size() > 1)
    {
      violation(key, "dimension differs across splits");
    }
    if (dims.empty())
    {
      continue;
    }
    auto const known = find_known_layer(key);
    if (!known)
    {
      note(key, "unregistered dimension " + std::to_string(*dims.begin()) + " accepted");
    }
    else if (dims.size() == 1 && *dims.begin() != known->dim)
    {
      violation(key, "dimension " + std::to_string(*dims.begin()) + " differs from expected " +
                         std::to_string(known->dim));
    }
  }
  return report;
}

}  // namespace ensvis::featstore
