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

#include "ensvis/dataset.hpp"

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ensvis::featstore {

inline constexpr std::uint16_t kVersion = 1;

/// In-memory form of a DFV1 file:
///
///   "DFV1" | u16 version | u8 name_len | name | u32 layer | u32 dim |
///   u64 count | u64 ids[count] | f32 rows[count * dim]
///
/// little-endian, no padding.
struct FeatureFile
{
  std::string                model_name;
  std::uint32_t              layer_id = 0;
  std::uint32_t              dim      = 0;
  std::vector<std::uint64_t> ids;
  std::vector<float>         rows;

  std::size_t count() const noexcept
  {
    return ids.size();
  }

  std::span<float const> row(std::size_t i) const noexcept
  {
    return {rows.data() + i * dim, dim};
  }

  /// Throws on a bad name, zero dim, payload size mismatch or unsorted ids.
  void validate() const;

  friend bool operator==(FeatureFile const &, FeatureFile const &) = default;
};

struct FeatureHeader
{
  std::string   model_name;
  std::uint32_t layer_id = 0;
  std::uint32_t dim      = 0;
  std::uint64_t count    = 0;
};

std::size_t header_size(std::string const &model_name) noexcept;
std::size_t file_size(std::string const &model_name, std::uint32_t dim, std::uint64_t count) noexcept;

std::vector<std::uint8_t> encode_features(FeatureFile const &ff);
FeatureFile               decode_features(std::span<std::uint8_t const> bytes);
FeatureHeader             decode_header(std::span<std::uint8_t const> bytes);

void write_features(FeatureFile const &ff, std::filesystem::path const &path);

/// Full validation. When the file name follows the `<model>_<layer>_<split>.dfv`
/// convention, the header's model and layer must agree with it.
FeatureFile   read_features(std::filesystem::path const &path);
FeatureHeader read_header(std::filesystem::path const &path);

struct LayerKey
{
  std::string   model;
  std::uint32_t layer = 0;

  auto operator<=>(LayerKey const &) const = default;
  bool operator==(LayerKey const &) const  = default;

  std::string to_string() const;
};

/// Parses "model:layer".
LayerKey parse_layer_key(std::string const &text);

std::string                  feature_file_name(LayerKey const &key, Split split);
std::optional<std::pair<LayerKey, Split>> parse_feature_file_name(std::string const &file_name);

struct KnownLayer
{
  char const   *model;
  std::uint32_t layer;
  std::uint32_t dim;
  std::uint32_t pca_dim;
};

/// Layer dimensionalities and their PCA targets for the reference networks.
std::span<KnownLayer const> known_layers() noexcept;
std::optional<KnownLayer>   find_known_layer(LayerKey const &key);

struct FeatureRegistry
{
  std::map<LayerKey, std::map<Split, std::filesystem::path>> entries;

  void add(LayerKey const &key, Split split, std::filesystem::path path);
  std::optional<std::filesystem::path> find(LayerKey const &key, Split split) const;

  /// Registers every conventionally named .dfv file in `dir`.
  static FeatureRegistry scan(std::filesystem::path const &dir);
};

struct RegistryIssue
{
  enum class Kind
  {
    Violation,
    Note,
  };
  Kind        kind;
  LayerKey    key;
  std::string message;
};

struct RegistryReport
{
  std::vector<RegistryIssue> issues;

  bool ok() const noexcept;
  std::string to_text() const;
};

RegistryReport validate_registry(FeatureRegistry const &reg);

}  // namespace ensvis::featstore
