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

#include "ensvis/dataset.hpp"

#include "ensvis/binio.hpp"
#include "ensvis/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <regex>
#include <string>

namespace ensvis {

std::string_view to_string(Split split) noexcept
{
  return split == Split::Train ? "train" : "test";
}

Split parse_split(std::string_view text)
{
  if (text == "train")
  {
    return Split::Train;
  }
  if (text == "test")
  {
    return Split::Test;
  }
  fail(ErrorCode::InvalidArgument, "unknown split '" + std::string(text) + "'");
}

std::vector<Image> parse_cifar_batch(std::span<std::uint8_t const> bytes, std::uint32_t first_id)
{
  if (bytes.size() % kCifarRecord != 0)
  {
    fail(ErrorCode::MalformedCorpus, "batch size " + std::to_string(bytes.size()) +
                                         " is not a multiple of " + std::to_string(kCifarRecord));
  }
  std::size_t const  n = bytes.size() / kCifarRecord;
  std::vector<Image> images(n);
  for (std::size_t i = 0; i < n; ++i)
  {
    auto const record = bytes.subspan(i * kCifarRecord, kCifarRecord);
    if (record[0] >= kCifarClasses)
    {
      fail(ErrorCode::CorruptRecord, "record " + std::to_string(i) + " has label byte " +
                                         std::to_string(record[0]));
    }
    images[i].label = record[0];
    images[i].id    = first_id + static_cast<std::uint32_t>(i);
    std::copy(record.begin() + 1, record.end(), images[i].pixels.begin());
  }
  return images;
}

std::vector<Image> load_cifar_batch(std::filesystem::path const &path, std::uint32_t first_id)
{
  auto const bytes = read_file(path);
  try
  {
    return parse_cifar_batch(bytes, first_id);
  }
  catch (Error const &e)
  {
    throw e.within(path.string());
  }
}

std::vector<Image> load_cifar10(std::filesystem::path const &dir, Split split)
{
  std::vector<std::filesystem::path> files;
  if (split == Split::Test)
  {
    files.push_back(dir / "test_batch.bin");
  }
  else
  {
    std::map<int, std::filesystem::path> batches;
    std::regex const                     pattern(R"(data_batch_(\d+)\.bin)");
    std::error_code                      ec;
    for (auto const &entry : std::filesystem::directory_iterator(dir, ec))
    {
      std::smatch m;
      auto const  name = entry.path().filename().string();
      if (std::regex_match(name, m, pattern))
      {
        batches[std::stoi(m[1].str())] = entry.path();
      }
    }
    if (ec)
    {
      fail(ErrorCode::Io, "cannot list " + dir.string() + ": " + ec.message());
    }
    for (auto const &[index, path] : batches)
    {
      files.push_back(path);
    }
    if (files.empty())
    {
      fail(ErrorCode::Io, "no data_batch_*.bin files in " + dir.string());
    }
  }

  std::vector<Image> images;
  for (auto const &file : files)
  {
    auto batch = load_cifar_batch(file, static_cast<std::uint32_t>(images.size()));
    images.insert(images.end(), batch.begin(), batch.end());
  }
  return images;
}

std::vector<std::uint8_t> encode_cifar_batch(std::span<Image const> images)
{
  std::vector<std::uint8_t> out;
  out.reserve(images.size() * kCifarRecord);
  for (auto const &img : images)
  {
    out.push_back(img.label);
    out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  }
  return out;
}

void write_cifar_batch(std::filesystem::path const &path, std::span<Image const> images)
{
  write_file(path, encode_cifar_batch(images));
}

std::vector<Image> subset_per_class(std::span<Image const> images, std::size_t per_class)
{
  if (per_class == 0)
  {
    return {images.begin(), images.end()};
  }
  std::array<std::size_t, kCifarClasses> taken{};
  std::vector<Image>                     out;
  for (auto const &img : images)
  {
    if (taken[img.label] < per_class)
    {
      ++taken[img.label];
      out.push_back(img);
    }
  }
  return out;
}

namespace {

double catmull_rom(double p0, double p1, double p2, double p3, double t)
{
  double const t2 = t * t;
  double const t3 = t2 * t;
  return 0.5 * ((2.0 * p1) + (-p0 + p2) * t + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t2 +
                (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * t3);
}

}  // namespace

GrayImage preprocess(Image const &img, int upscale)
{
  if (upscale != 1 && upscale != 2 && upscale != 4)
  {
    fail(ErrorCode::InvalidArgument, "upscale must be 1, 2 or 4, got " + std::to_string(upscale));
  }

  int constexpr n = static_cast<int>(kCifarSide);
  std::vector<double> luma(kCifarSide * kCifarSide);
  for (int y = 0; y < n; ++y)
  {
    for (int x = 0; x < n; ++x)
    {
      auto const ux = static_cast<std::size_t>(x);
      auto const uy = static_cast<std::size_t>(y);
      luma[uy * kCifarSide + ux] =
          (0.299 * img.red(ux, uy) + 0.587 * img.green(ux, uy) + 0.114 * img.blue(ux, uy)) / 255.0;
    }
  }

  GrayImage out;
  out.width        = n * upscale;
  out.height       = n * upscale;
  out.scale_factor = upscale;
  out.pixels.resize(static_cast<std::size_t>(out.width) * static_cast<std::size_t>(out.height));

  auto const src = [&](int x, int y) {
    x = std::clamp(x, 0, n - 1);
    y = std::clamp(y, 0, n - 1);
    return luma[static_cast<std::size_t>(y) * kCifarSide + static_cast<std::size_t>(x)];
  };

  for (int oy = 0; oy < out.height; ++oy)
  {
    double const sy = (oy + 0.5) / upscale - 0.5;
    int const    iy = static_cast<int>(std::floor(sy));
    double const ty = sy - iy;
    for (int ox = 0; ox < out.width; ++ox)
    {
      double const sx = (ox + 0.5) / upscale - 0.5;
      int const    ix = static_cast<int>(std::floor(sx));
      double const tx = sx - ix;

      double rows[4];
      for (int k = 0; k < 4; ++k)
      {
        int const yy = iy - 1 + k;
        rows[k] = catmull_rom(src(ix - 1, yy), src(ix, yy), src(ix + 1, yy), src(ix + 2, yy), tx);
      }
      double const v = catmull_rom(rows[0], rows[1], rows[2], rows[3], ty);
      out.at(ox, oy) = std::clamp(v, 0.0, 1.0);
    }
  }
  return out;
}

}  // namespace ensvis
