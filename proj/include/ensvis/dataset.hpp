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

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace ensvis {

inline constexpr std::size_t kCifarSide    = 32;
inline constexpr std::size_t kCifarPixels  = kCifarSide * kCifarSide * 3;
inline constexpr std::size_t kCifarRecord  = kCifarPixels + 1;
inline constexpr std::size_t kCifarClasses = 10;

enum class Split
{
  Train,
  Test,
};

std::string_view to_string(Split split) noexcept;
Split            parse_split(std::string_view text);

/// One CIFAR-10 record. Pixels are channel-planar: 1024 red bytes, then green,
/// then blue, each plane row-major.
struct Image
{
  std::array<std::uint8_t, kCifarPixels> pixels{};
  std::uint8_t                           label = 0;
  std::uint32_t                          id    = 0;

  std::uint8_t red(std::size_t x, std::size_t y) const noexcept
  {
    return pixels[y * kCifarSide + x];
  }
  std::uint8_t green(std::size_t x, std::size_t y) const noexcept
  {
    return pixels[kCifarSide * kCifarSide + y * kCifarSide + x];
  }
  std::uint8_t blue(std::size_t x, std::size_t y) const noexcept
  {
    return pixels[2 * kCifarSide * kCifarSide + y * kCifarSide + x];
  }
};

/// Single-channel image with intensities in [0,1].
struct GrayImage
{
  int                 width        = 0;
  int                 height       = 0;
  int                 scale_factor = 1;
  std::vector<double> pixels;

  double at(int x, int y) const noexcept
  {
    return pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                  static_cast<std::size_t>(x)];
  }
  double &at(int x, int y) noexcept
  {
    return pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                  static_cast<std::size_t>(x)];
  }
};

/// Parses a batch buffer. Ids are assigned consecutively from `first_id`.
std::vector<Image> parse_cifar_batch(std::span<std::uint8_t const> bytes, std::uint32_t first_id);

std::vector<Image> load_cifar_batch(std::filesystem::path const &path, std::uint32_t first_id);

/// Loads one split from a CIFAR-10 binary directory. The train split is the
/// concatenation of every `data_batch_<n>.bin` present (ascending n); the test
/// split is `test_batch.bin`. Ids are positions within the split.
std::vector<Image> load_cifar10(std::filesystem::path const &dir, Split split);

std::vector<std::uint8_t> encode_cifar_batch(std::span<Image const> images);
void write_cifar_batch(std::filesystem::path const &path, std::span<Image const> images);

/// First `per_class` images of each label, in file order. 0 keeps everything.
std::vector<Image> subset_per_class(std::span<Image const> images, std::size_t per_class);

/// BT.601 luminance followed by Catmull-Rom upsampling (upscale in {1,2,4}).
GrayImage preprocess(Image const &img, int upscale);

}  // namespace ensvis
