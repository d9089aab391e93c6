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

#include "synthetic.hpp"

#include "ensvis/binio.hpp"
#include "ensvis/dataset.hpp"
#include "ensvis/error.hpp"

#include "gtest/gtest.h"

#include <filesystem>

namespace {

using namespace ensvis;

Image solid(std::uint8_t r, std::uint8_t g, std::uint8_t b)
{
  Image       img;
  std::size_t n = kCifarSide * kCifarSide;
  std::fill(img.pixels.begin(), img.pixels.begin() + n, r);
  std::fill(img.pixels.begin() + n, img.pixels.begin() + 2 * n, g);
  std::fill(img.pixels.begin() + 2 * n, img.pixels.end(), b);
  return img;
}

ErrorCode code_of(auto &&fn)
{
  try
  {
    fn();
  }
  catch (Error const &e)
  {
    return e.code();
  }
  return ErrorCode::Internal;
}

TEST(DatasetTest, RecordCountFromByteSize)
{
  auto const images = fixtures::random_images(10, 3);
  auto const bytes  = encode_cifar_batch(images);
  EXPECT_EQ(bytes.size(), 10u * kCifarRecord);
  EXPECT_EQ(parse_cifar_batch(bytes, 0).size(), 10u);
  EXPECT_EQ(10000u * kCifarRecord, 30730000u);
}

TEST(DatasetTest, ChannelPlanarLayout)
{
  std::vector<std::uint8_t> bytes(kCifarRecord, 0);
  bytes[0]                                    = 7;
  bytes[1 + 5 * kCifarSide + 3]               = 11;  // red (3, 5)
  bytes[1 + 1024 + 5 * kCifarSide + 3]        = 22;
  bytes[1 + 2048 + 5 * kCifarSide + 3]        = 33;
  auto const images = parse_cifar_batch(bytes, 40);
  ASSERT_EQ(images.size(), 1u);
  EXPECT_EQ(images[0].label, 7);
  EXPECT_EQ(images[0].id, 40u);
  EXPECT_EQ(images[0].red(3, 5), 11);
  EXPECT_EQ(images[0].green(3, 5), 22);
  EXPECT_EQ(images[0].blue(3, 5), 33);
}

TEST(DatasetTest, MalformedSize)
{
  std::vector<std::uint8_t> bytes(3072, 0);
  EXPECT_EQ(code_of([&] { parse_cifar_batch(bytes, 0); }), ErrorCode::MalformedCorpus);
  bytes.resize(kCifarRecord + 1);
  EXPECT_EQ(code_of([&] { parse_cifar_batch(bytes, 0); }), ErrorCode::MalformedCorpus);
}

TEST(DatasetTest, CorruptLabel)
{
  auto bytes = encode_cifar_batch(fixtures::random_images(3, 1));
  bytes[kCifarRecord] = 10;
  EXPECT_EQ(code_of([&] { parse_cifar_batch(bytes, 0); }), ErrorCode::CorruptRecord);
}

TEST(DatasetTest, LoadSplitsAndIdempotence)
{
  auto const dir = fixtures::temp_dir("dataset");
  auto const a   = fixtures::random_images(7, 1);
  auto const b   = fixtures::random_images(5, 2);
  auto const t   = fixtures::random_images(4, 3);
  write_cifar_batch(dir / "data_batch_2.bin", b);
  write_cifar_batch(dir / "data_batch_1.bin", a);
  write_cifar_batch(dir / "test_batch.bin", t);

  auto const train = load_cifar10(dir, Split::Train);
  ASSERT_EQ(train.size(), 12u);
  for (std::size_t i = 0; i < train.size(); ++i)
  {
    EXPECT_EQ(train[i].id, i);
    auto const &src = i < 7 ? a[i] : b[i - 7];
    EXPECT_EQ(train[i].pixels, src.pixels);
    EXPECT_EQ(train[i].label, src.label);
    EXPECT_LT(train[i].label, kCifarClasses);
  }
  auto const again = load_cifar10(dir, Split::Train);
  EXPECT_EQ(encode_cifar_batch(train), encode_cifar_batch(again));
  EXPECT_EQ(load_cifar10(dir, Split::Test).size(), 4u);
  std::filesystem::remove_all(dir);
}

TEST(DatasetTest, MissingCorpus)
{
  auto const dir = fixtures::temp_dir("dataset-empty");
  EXPECT_THROW(load_cifar10(dir, Split::Train), Error);
  EXPECT_THROW(load_cifar10(dir, Split::Test), Error);
  std::filesystem::remove_all(dir);
}

TEST(DatasetTest, SubsetPerClassKeepsFileOrder)
{
  auto const images = fixtures::random_images(200, 9);
  auto const sub    = subset_per_class(images, 3);
  std::map<int, int> counts;
  std::uint32_t      last = 0;
  for (std::size_t i = 0; i < sub.size(); ++i)
  {
    ++counts[sub[i].label];
    if (i > 0)
    {
      EXPECT_GT(sub[i].id, last);
    }
    last = sub[i].id;
  }
  for (auto const &[label, count] : counts)
  {
    EXPECT_EQ(count, 3) << "label " << label;
  }
  // First three of each class in file order.
  std::map<int, int> seen;
  for (auto const &img : images)
  {
    if (seen[img.label]++ < 3)
    {
      EXPECT_TRUE(std::any_of(sub.begin(), sub.end(), [&](auto const &s) { return s.id == img.id; }));
    }
  }
  EXPECT_EQ(subset_per_class(images, 0).size(), images.size());
}

TEST(DatasetTest, PreprocessConstants)
{
  for (int up : {1, 2, 4})
  {
    auto const black = preprocess(solid(0, 0, 0), up);
    auto const white = preprocess(solid(255, 255, 255), up);
    auto const red   = preprocess(solid(255, 0, 0), up);
    ASSERT_EQ(black.width, 32 * up);
    ASSERT_EQ(black.height, 32 * up);
    EXPECT_EQ(black.scale_factor, up);
    for (std::size_t i = 0; i < black.pixels.size(); ++i)
    {
      EXPECT_EQ(black.pixels[i], 0.0);
      EXPECT_NEAR(white.pixels[i], 1.0, 1e-12);
      EXPECT_NEAR(red.pixels[i], 0.299, 1e-12);
    }
  }
}

TEST(DatasetTest, PreprocessBoundsAndIdentity)
{
  auto const images = fixtures::random_images(5, 4);
  for (auto const &img : images)
  {
    auto const g1 = preprocess(img, 1);
    for (int y = 0; y < 32; ++y)
    {
      for (int x = 0; x < 32; ++x)
      {
        double const lum = (0.299 * img.red(x, y) + 0.587 * img.green(x, y) + 0.114 * img.blue(x, y)) / 255.0;
        EXPECT_NEAR(g1.at(x, y), lum, 1e-12);
      }
    }
    auto const g2 = preprocess(img, 2);
    for (double p : g2.pixels)
    {
      EXPECT_GE(p, 0.0);
      EXPECT_LE(p, 1.0);
    }
  }
}

TEST(DatasetTest, PreprocessRejectsOddUpscale)
{
  EXPECT_EQ(code_of([] { preprocess(Image{}, 3); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([] { preprocess(Image{}, 0); }), ErrorCode::InvalidArgument);
}

TEST(DatasetTest, SplitNames)
{
  EXPECT_EQ(parse_split("train"), Split::Train);
  EXPECT_EQ(parse_split("test"), Split::Test);
  EXPECT_EQ(to_string(Split::Test), "test");
  EXPECT_THROW(parse_split("val"), Error);
}

}  // namespace
