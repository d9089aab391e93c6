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
#include "ensvis/matrix.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace ensvis::sift {

inline constexpr std::size_t kDescriptorDim = 128;

/// Blur the input image is assumed to carry before any smoothing is applied.
inline constexpr double kAssumedInputBlur = 0.5;

struct Params
{
  int    octaves           = 4;
  int    scales_per_octave = 3;
  double sigma0            = 1.6;
  double contrast_thresh   = 0.03;
  double edge_ratio        = 10.0;
  int    min_keypoints     = 8;
  int    dense_stride      = 8;
  double dense_sigma       = 1.6;
  int    max_orientations  = 2;
};

struct Plane
{
  int                 width  = 0;
  int                 height = 0;
  std::vector<double> values;

  Plane() = default;
  Plane(int w, int h, double fill = 0.0)
    : width(w)
    , height(h)
    , values(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill)
  {}

  double at(int x, int y) const noexcept
  {
    return values[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                  static_cast<std::size_t>(x)];
  }
  double &at(int x, int y) noexcept
  {
    return values[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                  static_cast<std::size_t>(x)];
  }
};

/// Gaussian pyramid with s+3 levels per octave and the s+2 difference levels
/// between them. Level i of every octave carries blur sigma0 * 2^(i/s) in that
/// octave's pixel units. Octave o+1 is the 2x2 box average of level s of
/// octave o, so octave pixel (px, py) sits at input coordinate
/// 2^o * (px + 0.5) - 0.5.
struct ScaleSpace
{
  std::vector<std::vector<Plane>> gaussians;
  std::vector<std::vector<Plane>> dog;
  double                          sigma0            = 1.6;
  int                             scales_per_octave = 3;

  int octaves() const noexcept
  {
    return static_cast<int>(gaussians.size());
  }

  /// Blur of a (possibly fractional) level, in octave pixel units.
  double level_sigma(double level) const;
};

struct Keypoint
{
  double x           = 0.0;  // input-image pixels
  double y           = 0.0;
  double scale       = 0.0;  // absolute sigma in input-image pixels
  double orientation = 0.0;  // radians, [0, 2pi)
  double response    = 0.0;  // interpolated DoG value

  // Discrete sample the keypoint was detected at.
  int octave = 0;
  int level  = 0;
  int ix     = 0;
  int iy     = 0;

  // Refined position in octave pixel units.
  double octave_x     = 0.0;
  double octave_y     = 0.0;
  double octave_sigma = 0.0;
};

struct DescriptorSet
{
  Matrix                descriptors{0, kDescriptorDim};
  std::vector<Keypoint> keypoints;  // one per descriptor row
  std::uint32_t         image_id = 0;
  std::size_t           skipped  = 0;  // keypoint outside the sampled image
  std::size_t           rejected = 0;  // zero-gradient window
  bool                  dense    = false;
};

ScaleSpace build_scale_space(GrayImage const &img, int octaves, int scales_per_octave, double sigma0);

std::vector<Keypoint> detect_keypoints(ScaleSpace const &ss, double contrast_thresh, double edge_ratio);

/// True when the spatial Hessian at a DoG sample passes tr^2/det < (r+1)^2/r.
bool passes_edge_test(Plane const &dog, int x, int y, double edge_ratio);

/// Assigns orientations (up to `max_orientations` per keypoint) and computes
/// one descriptor per oriented keypoint.
DescriptorSet compute_descriptors(ScaleSpace const &ss, std::span<Keypoint const> keypoints,
                                  std::uint32_t image_id = 0, int max_orientations = 2);

/// Full pipeline with a dense-grid fallback for low-texture images.
DescriptorSet extract_sift(GrayImage const &img, Params const &params = {}, std::uint32_t image_id = 0);

/// Descriptors on a regular grid at fixed sigma and orientation 0. Zero-gradient
/// windows yield all-zero rows instead of being rejected.
DescriptorSet dense_descriptors(ScaleSpace const &ss, int stride, double sigma, std::uint32_t image_id = 0);

}  // namespace ensvis::sift
