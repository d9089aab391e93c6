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

#include "ensvis/error.hpp"
#include "ensvis/sift.hpp"

#include "gtest/gtest.h"

#include <cmath>

namespace {

using namespace ensvis;
using sift::Plane;

GrayImage constant_image(int side, double v)
{
  GrayImage img;
  img.width = img.height = side;
  img.pixels.assign(static_cast<std::size_t>(side * side), v);
  return img;
}

GrayImage blob_image(int side, double cx, double cy, double s, double background, double amplitude)
{
  GrayImage img = constant_image(side, background);
  for (int y = 0; y < side; ++y)
  {
    for (int x = 0; x < side; ++x)
    {
      double const r2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
      img.at(x, y) += amplitude * std::exp(-r2 / (2 * s * s));
    }
  }
  return img;
}

bool strict_extremum(sift::ScaleSpace const &ss, sift::Keypoint const &kp)
{
  auto const &levels = ss.dog[static_cast<std::size_t>(kp.octave)];
  double const v     = levels[static_cast<std::size_t>(kp.level)].at(kp.ix, kp.iy);
  bool         is_max = true, is_min = true;
  for (int dl = -1; dl <= 1; ++dl)
  {
    auto const &p = levels[static_cast<std::size_t>(kp.level + dl)];
    for (int dy = -1; dy <= 1; ++dy)
    {
      for (int dx = -1; dx <= 1; ++dx)
      {
        if (dl == 0 && dx == 0 && dy == 0)
        {
          continue;
        }
        double const n = p.at(kp.ix + dx, kp.iy + dy);
        is_max         = is_max && v > n;
        is_min         = is_min && v < n;
      }
    }
  }
  return is_max || is_min;
}

TEST(SiftTest, ScaleSpaceShape)
{
  auto const ss = sift::build_scale_space(fixtures::textured_fixture(64, 1), 4, 3, 1.6);
  ASSERT_EQ(ss.octaves(), 4);
  int side = 64;
  for (int o = 0; o < 4; ++o)
  {
    ASSERT_EQ(ss.gaussians[o].size(), 6u);
    ASSERT_EQ(ss.dog[o].size(), 5u);
    EXPECT_EQ(ss.gaussians[o][0].width, side);
    EXPECT_EQ(ss.gaussians[o][0].height, side);
    side /= 2;
  }
  EXPECT_EQ(ss.gaussians[3][0].width, 8);
  EXPECT_NEAR(ss.level_sigma(3), 3.2, 1e-12);
}

TEST(SiftTest, DogIsAdjacentDifference)
{
  auto const ss = sift::build_scale_space(fixtures::textured_fixture(64, 2), 3, 3, 1.6);
  for (int o = 0; o < ss.octaves(); ++o)
  {
    for (std::size_t i = 0; i < ss.dog[o].size(); ++i)
    {
      for (std::size_t k = 0; k < ss.dog[o][i].values.size(); ++k)
      {
        ASSERT_EQ(ss.dog[o][i].values[k], ss.gaussians[o][i + 1].values[k] - ss.gaussians[o][i].values[k]);
      }
    }
  }
}

TEST(SiftTest, InsufficientResolution)
{
  try
  {
    sift::build_scale_space(constant_image(15, 0.5), 4, 3, 1.6);
    FAIL() << "expected an error";
  }
  catch (Error const &e)
  {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientResolution);
  }
  EXPECT_NO_THROW(sift::build_scale_space(constant_image(16, 0.5), 4, 3, 1.6));
}

TEST(SiftTest, ConstantImageHasFlatDog)
{
  auto const ss = sift::build_scale_space(constant_image(64, 0.37), 4, 3, 1.6);
  for (auto const &octave : ss.dog)
  {
    for (auto const &level : octave)
    {
      for (double v : level.values)
      {
        ASSERT_NEAR(v, 0.0, 1e-12);
      }
    }
  }
  EXPECT_TRUE(sift::detect_keypoints(ss, 0.03, 10.0).empty());
}

TEST(SiftTest, ConstantImageFallsBackToDenseGrid)
{
  auto const set = sift::extract_sift(constant_image(64, 0.5), {}, 5);
  EXPECT_TRUE(set.dense);
  EXPECT_EQ(set.image_id, 5u);
  EXPECT_EQ(set.descriptors.rows(), 64u);  // stride 8 on 64 x 64
  EXPECT_EQ(set.keypoints.size(), 64u);
  for (double v : set.descriptors.data())
  {
    EXPECT_EQ(v, 0.0);
  }
}

// The centre of a Gaussian blob of std s, after a blur of total variance v,
// has height A s^2 / v; DoG levels are differences of these heights.
TEST(SiftTest, BlobDogPeaksAtMatchingScale)
{
  double const amplitude = 0.5;
  for (double s : {2.0, 2.8, 3.6})
  {
    auto const ss = sift::build_scale_space(blob_image(64, 32, 32, s, 0.2, amplitude), 1, 3, 1.6);
    std::vector<double> oracle, measured;
    for (std::size_t i = 0; i < ss.dog[0].size(); ++i)
    {
      double const a = ss.level_sigma(static_cast<double>(i));
      double const b = ss.level_sigma(static_cast<double>(i + 1));
      double const va = s * s + a * a - sift::kAssumedInputBlur * sift::kAssumedInputBlur;
      double const vb = s * s + b * b - sift::kAssumedInputBlur * sift::kAssumedInputBlur;
      oracle.push_back(amplitude * s * s * (1.0 / vb - 1.0 / va));
      measured.push_back(ss.dog[0][i].at(32, 32));
    }
    for (std::size_t i = 0; i < oracle.size(); ++i)
    {
      EXPECT_NEAR(measured[i], oracle[i], 0.03 * std::abs(oracle[i])) << "s=" << s << " level " << i;
    }
    auto const argmax = [](std::vector<double> const &v) {
      std::size_t best = 0;
      for (std::size_t i = 1; i < v.size(); ++i)
      {
        if (std::abs(v[i]) > std::abs(v[best]))
        {
          best = i;
        }
      }
      return best;
    };
    EXPECT_EQ(argmax(measured), argmax(oracle)) << "s=" << s;
  }
}

TEST(SiftTest, BlobPeakLevelGrowsWithFootprint)
{
  std::vector<std::size_t> peaks;
  for (double s : {1.5, 2.5, 3.5})
  {
    auto const ss = sift::build_scale_space(blob_image(64, 32, 32, s, 0.2, 0.5), 1, 3, 1.6);
    std::size_t best = 0;
    for (std::size_t i = 1; i < ss.dog[0].size(); ++i)
    {
      if (std::abs(ss.dog[0][i].at(32, 32)) > std::abs(ss.dog[0][best].at(32, 32)))
      {
        best = i;
      }
    }
    peaks.push_back(best);
  }
  EXPECT_LT(peaks[0], peaks[1]);
  EXPECT_LT(peaks[1], peaks[2]);
}

// Centred on sample 16 of octave 1 so the disk centre is a single sample there.
TEST(SiftTest, DiskYieldsKeypointNearCentre)
{
  GrayImage img = constant_image(64, 0.0);
  for (int y = 0; y < 64; ++y)
  {
    for (int x = 0; x < 64; ++x)
    {
      if ((x - 32.5) * (x - 32.5) + (y - 32.5) * (y - 32.5) <= 6.0 * 6.0)
      {
        img.at(x, y) = 1.0;
      }
    }
  }
  auto const ss  = sift::build_scale_space(img, 4, 3, 1.6);
  auto const kps = sift::detect_keypoints(ss, 0.03, 10.0);

  bool near_centre = false;
  for (auto const &kp : kps)
  {
    EXPECT_TRUE(strict_extremum(ss, kp));
    near_centre = near_centre || std::hypot(kp.x - 32.5, kp.y - 32.5) < 2.0;
  }
  EXPECT_TRUE(near_centre);
}

TEST(SiftTest, StepEdgeYieldsNoKeypoints)
{
  GrayImage img = constant_image(64, 0.1);
  for (int y = 0; y < 64; ++y)
  {
    for (int x = 32; x < 64; ++x)
    {
      img.at(x, y) = 0.9;
    }
  }
  auto const ss = sift::build_scale_space(img, 4, 3, 1.6);
  EXPECT_TRUE(sift::detect_keypoints(ss, 0.03, 10.0).empty());

  // Brute-force Hessian ratio along the edge: every candidate fails.
  for (int o = 0; o < ss.octaves(); ++o)
  {
    for (std::size_t l = 1; l + 1 < ss.dog[o].size(); ++l)
    {
      auto const &p = ss.dog[o][l];
      for (int y = 1; y + 1 < p.height; ++y)
      {
        for (int x = 1; x + 1 < p.width; ++x)
        {
          double const dxx = p.at(x + 1, y) + p.at(x - 1, y) - 2 * p.at(x, y);
          double const dyy = p.at(x, y + 1) + p.at(x, y - 1) - 2 * p.at(x, y);
          double const dxy = 0.25 * (p.at(x + 1, y + 1) - p.at(x - 1, y + 1) - p.at(x + 1, y - 1) + p.at(x - 1, y - 1));
          double const det = dxx * dyy - dxy * dxy;
          bool const   oracle = det > 0 && (dxx + dyy) * (dxx + dyy) * 10.0 < 121.0 * det;
          ASSERT_EQ(sift::passes_edge_test(p, x, y, 10.0), oracle);
        }
      }
    }
  }
}

TEST(SiftTest, EdgeTestOnHandBuiltPlanes)
{
  Plane bowl(5, 5);
  Plane ridge(5, 5);
  for (int y = 0; y < 5; ++y)
  {
    for (int x = 0; x < 5; ++x)
    {
      bowl.at(x, y)  = -((x - 2) * (x - 2) + (y - 2) * (y - 2));
      ridge.at(x, y) = -(x - 2) * (x - 2) - 0.01 * (y - 2) * (y - 2);
    }
  }
  EXPECT_TRUE(sift::passes_edge_test(bowl, 2, 2, 10.0));
  EXPECT_FALSE(sift::passes_edge_test(ridge, 2, 2, 10.0));
}

TEST(SiftTest, KeypointsAreStrictExtremaAndDescriptorsUnitNorm)
{
  for (std::uint64_t seed = 1; seed <= 6; ++seed)
  {
    auto const img = fixtures::textured_fixture(64, seed);
    auto const ss  = sift::build_scale_space(img, 4, 3, 1.6);
    auto const kps = sift::detect_keypoints(ss, 0.03, 10.0);
    ASSERT_FALSE(kps.empty());
    for (auto const &kp : kps)
    {
      EXPECT_TRUE(strict_extremum(ss, kp));
      EXPECT_GE(std::abs(kp.response), 0.03);
      EXPECT_GE(kp.x, 0.0);
      EXPECT_LT(kp.x, 64.0);
      EXPECT_GE(kp.y, 0.0);
      EXPECT_LT(kp.y, 64.0);
    }

    auto const set = sift::compute_descriptors(ss, kps, 0, 2);
    ASSERT_EQ(set.descriptors.rows(), set.keypoints.size());
    EXPECT_LE(set.descriptors.rows(), 2 * kps.size());
    for (std::size_t r = 0; r < set.descriptors.rows(); ++r)
    {
      double sq = 0.0;
      for (double v : set.descriptors.row(r))
      {
        EXPECT_GE(v, 0.0);
        sq += v * v;
      }
      EXPECT_NEAR(std::sqrt(sq), 1.0, 1e-6);
      EXPECT_GE(set.keypoints[r].orientation, 0.0);
      EXPECT_LT(set.keypoints[r].orientation, 2 * M_PI);
    }
  }
}

TEST(SiftTest, TexturedFixtureUsesSparseDescriptors)
{
  auto const set = sift::extract_sift(fixtures::textured_fixture(64, 3));
  EXPECT_FALSE(set.dense);
  EXPECT_GT(set.descriptors.rows(), 0u);
}

// A straight edge puts most gradient mass in few bins; those entries are
// clipped at 0.2 and so tie at the maximum after renormalization.
TEST(SiftTest, DescriptorClippingOnEdge)
{
  GrayImage img = constant_image(64, 0.1);
  for (int y = 0; y < 64; ++y)
  {
    for (int x = 30; x < 64; ++x)
    {
      img.at(x, y) = 0.9;
    }
  }
  auto const ss  = sift::build_scale_space(img, 4, 3, 1.6);
  auto const set = sift::dense_descriptors(ss, 8, 1.6);
  bool       clipped_seen = false;
  for (std::size_t r = 0; r < set.descriptors.rows(); ++r)
  {
    auto const   row = set.descriptors.row(r);
    double const mx  = *std::max_element(row.begin(), row.end());
    if (mx == 0.0)
    {
      continue;
    }
    int ties = 0;
    for (double v : row)
    {
      ties += std::abs(v - mx) < 1e-12 ? 1 : 0;
    }
    // Undo the final renormalization: the clipped vector has max 0.2.
    double sq = 0.0;
    for (double v : row)
    {
      sq += (v * 0.2 / mx) * (v * 0.2 / mx);
    }
    if (ties >= 2)
    {
      clipped_seen = true;
      EXPECT_LT(std::sqrt(sq), 1.0);
    }
  }
  EXPECT_TRUE(clipped_seen);
}

TEST(SiftTest, RotationRepeatabilityAndDescriptorMatch)
{
  std::size_t total = 0, repeated = 0, pairs = 0, close = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed)
  {
    auto const img = fixtures::textured_fixture(64, seed);
    auto const a   = sift::extract_sift(img);
    auto const b   = sift::extract_sift(fixtures::rotate90(img));
    ASSERT_FALSE(a.dense);
    ASSERT_FALSE(b.dense);
    for (std::size_t i = 0; i < a.keypoints.size(); ++i)
    {
      double const mx = a.keypoints[i].y;
      double const my = 63.0 - a.keypoints[i].x;
      double       best_pos = 1e9, best_desc = 1e9;
      for (std::size_t j = 0; j < b.keypoints.size(); ++j)
      {
        double const d = std::hypot(b.keypoints[j].x - mx, b.keypoints[j].y - my);
        best_pos       = std::min(best_pos, d);
        if (d <= 1.5)
        {
          double sq = 0.0;
          for (std::size_t k = 0; k < sift::kDescriptorDim; ++k)
          {
            double const diff = a.descriptors(i, k) - b.descriptors(j, k);
            sq += diff * diff;
          }
          best_desc = std::min(best_desc, std::sqrt(sq));
        }
      }
      ++total;
      if (best_pos <= 1.5)
      {
        ++repeated;
        ++pairs;
        close += best_desc < 0.15 ? 1 : 0;
      }
    }
  }
  ASSERT_GT(total, 0u);
  double const repeatability = static_cast<double>(repeated) / static_cast<double>(total);
  double const matched       = static_cast<double>(close) / static_cast<double>(pairs);
  RecordProperty("repeatability", std::to_string(repeatability));
  RecordProperty("descriptor_match", std::to_string(matched));
  EXPECT_GE(repeatability, 0.7);
  EXPECT_GE(matched, 0.8);
}

TEST(SiftTest, Deterministic)
{
  auto const img = fixtures::textured_fixture(64, 11);
  auto const a   = sift::extract_sift(img);
  auto const b   = sift::extract_sift(img);
  EXPECT_EQ(a.descriptors, b.descriptors);
  ASSERT_EQ(a.keypoints.size(), b.keypoints.size());
  for (std::size_t i = 0; i < a.keypoints.size(); ++i)
  {
    EXPECT_EQ(a.keypoints[i].x, b.keypoints[i].x);
    EXPECT_EQ(a.keypoints[i].orientation, b.keypoints[i].orientation);
  }
}

TEST(SiftTest, CifarSizedInputAtEachUpscale)
{
  auto const images = fixtures::two_class_images(2, 5);
  for (auto const &img : images)
  {
    for (int up : {1, 2, 4})
    {
      auto const set = sift::extract_sift(preprocess(img, up));
      EXPECT_GT(set.descriptors.rows(), 0u);
    }
  }
}

}  // namespace
