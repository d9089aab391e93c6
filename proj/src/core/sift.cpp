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

#include "ensvis/sift.hpp"

#include "ensvis/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace ensvis::sift {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

constexpr int    kOrientationBins    = 36;
constexpr double kOrientationPeak    = 0.8;
constexpr double kOrientationSigma   = 1.5;
constexpr int    kSpatialBins        = 4;
constexpr int    kDescriptorOriBins  = 8;
constexpr double kBinWidthFactor     = 3.0;
constexpr double kDescriptorClip     = 0.2;
constexpr double kMaxRefineOffset    = 0.6;

std::vector<double> gaussian_kernel(double sigma)
{
  int const           radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma)));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double              sum = 0.0;
  for (int i = -radius; i <= radius; ++i)
  {
    double const v                          = std::exp(-0.5 * i * i / (sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (auto &v : k)
  {
    v /= sum;
  }
  return k;
}

Plane blur(Plane const &src, double sigma)
{
  auto const kernel = gaussian_kernel(sigma);
  int const  radius = static_cast<int>(kernel.size() / 2);
  int const  w      = src.width;
  int const  h      = src.height;

  Plane tmp(w, h);
  for (int y = 0; y < h; ++y)
  {
    for (int x = 0; x < w; ++x)
    {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k)
      {
        acc += kernel[static_cast<std::size_t>(k + radius)] * src.at(std::clamp(x + k, 0, w - 1), y);
      }
      tmp.at(x, y) = acc;
    }
  }
  Plane out(w, h);
  for (int y = 0; y < h; ++y)
  {
    for (int x = 0; x < w; ++x)
    {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k)
      {
        acc += kernel[static_cast<std::size_t>(k + radius)] * tmp.at(x, std::clamp(y + k, 0, h - 1));
      }
      out.at(x, y) = acc;
    }
  }
  return out;
}

Plane downsample(Plane const &src)
{
  Plane out(src.width / 2, src.height / 2);
  for (int y = 0; y < out.height; ++y)
  {
    for (int x = 0; x < out.width; ++x)
    {
      out.at(x, y) = 0.25 * (src.at(2 * x, 2 * y) + src.at(2 * x + 1, 2 * y) +
                             src.at(2 * x, 2 * y + 1) + src.at(2 * x + 1, 2 * y + 1));
    }
  }
  return out;
}

bool is_strict_extremum(std::vector<Plane> const &dog, int l, int x, int y)
{
  double const v      = dog[static_cast<std::size_t>(l)].at(x, y);
  bool         is_max = true;
  bool         is_min = true;
  for (int dl = -1; dl <= 1; ++dl)
  {
    auto const &p = dog[static_cast<std::size_t>(l + dl)];
    for (int dy = -1; dy <= 1; ++dy)
    {
      for (int dx = -1; dx <= 1; ++dx)
      {
        if (dl == 0 && dx == 0 && dy == 0)
        {
          continue;
        }
        double const n = p.at(x + dx, y + dy);
        is_max         = is_max && v > n;
        is_min         = is_min && v < n;
      }
    }
    if (!is_max && !is_min)
    {
      return false;
    }
  }
  return is_max || is_min;
}

// Solves a 3x3 system with partial pivoting. Returns false when singular.
bool solve3(std::array<std::array<double, 3>, 3> a, std::array<double, 3> b, std::array<double, 3> &x)
{
  for (int c = 0; c < 3; ++c)
  {
    int pivot = c;
    for (int r = c + 1; r < 3; ++r)
    {
      if (std::abs(a[r][c]) > std::abs(a[pivot][c]))
      {
        pivot = r;
      }
    }
    if (std::abs(a[pivot][c]) < 1e-12)
    {
      return false;
    }
    std::swap(a[c], a[pivot]);
    std::swap(b[c], b[pivot]);
    for (int r = c + 1; r < 3; ++r)
    {
      double const f = a[r][c] / a[c][c];
      for (int k = c; k < 3; ++k)
      {
        a[r][k] -= f * a[c][k];
      }
      b[r] -= f * b[c];
    }
  }
  for (int r = 2; r >= 0; --r)
  {
    double s = b[r];
    for (int k = r + 1; k < 3; ++k)
    {
      s -= a[r][k] * x[k];
    }
    x[r] = s / a[r][r];
  }
  return true;
}

double wrap_angle(double a)
{
  a = std::fmod(a, kTwoPi);
  if (a < 0.0)
  {
    a += kTwoPi;
  }
  if (a >= kTwoPi)
  {
    a = 0.0;
  }
  return a;
}

int nearest_level(ScaleSpace const &ss, double level)
{
  int const top = static_cast<int>(ss.gaussians.front().size()) - 1;
  return std::clamp(static_cast<int>(std::lround(level)), 0, top);
}

// Dominant gradient orientations around (kx, ky), strongest first.
std::vector<double> orientations(Plane const &img, double kx, double ky, double sigma, int max_count)
{
  double const sigma_w = kOrientationSigma * sigma;
  int const    radius  = static_cast<int>(std::lround(3.0 * sigma_w));
  int const    cx      = static_cast<int>(std::lround(kx));
  int const    cy      = static_cast<int>(std::lround(ky));

  std::array<double, kOrientationBins> hist{};
  for (int y = cy - radius; y <= cy + radius; ++y)
  {
    if (y < 1 || y > img.height - 2)
    {
      continue;
    }
    for (int x = cx - radius; x <= cx + radius; ++x)
    {
      if (x < 1 || x > img.width - 2)
      {
        continue;
      }
      double const dx = x - kx;
      double const dy = y - ky;
      double const r2 = dx * dx + dy * dy;
      if (r2 > radius * radius + 0.5)
      {
        continue;
      }
      double const gx  = img.at(x + 1, y) - img.at(x - 1, y);
      double const gy  = img.at(x, y + 1) - img.at(x, y - 1);
      double const mag = std::sqrt(gx * gx + gy * gy);
      if (mag == 0.0)
      {
        continue;
      }
      double const w    = std::exp(-r2 / (2.0 * sigma_w * sigma_w)) * mag;
      double const fbin = wrap_angle(std::atan2(gy, gx)) * kOrientationBins / kTwoPi;
      int const    b0   = static_cast<int>(std::floor(fbin));
      double const t    = fbin - b0;
      hist[static_cast<std::size_t>(b0 % kOrientationBins)] += (1.0 - t) * w;
      hist[static_cast<std::size_t>((b0 + 1) % kOrientationBins)] += t * w;
    }
  }

  for (int pass = 0; pass < 6; ++pass)
  {
    auto const prev = hist;
    for (int b = 0; b < kOrientationBins; ++b)
    {
      hist[static_cast<std::size_t>(b)] =
          (prev[static_cast<std::size_t>((b + kOrientationBins - 1) % kOrientationBins)] +
           prev[static_cast<std::size_t>(b)] +
           prev[static_cast<std::size_t>((b + 1) % kOrientationBins)]) /
          3.0;
    }
  }

  double const peak = *std::max_element(hist.begin(), hist.end());
  if (peak <= 0.0)
  {
    return {};
  }

  std::vector<std::pair<double, double>> peaks;  // (height, angle)
  for (int b = 0; b < kOrientationBins; ++b)
  {
    double const h  = hist[static_cast<std::size_t>(b)];
    double const hl = hist[static_cast<std::size_t>((b + kOrientationBins - 1) % kOrientationBins)];
    double const hr = hist[static_cast<std::size_t>((b + 1) % kOrientationBins)];
    if (h > hl && h > hr && h >= kOrientationPeak * peak)
    {
      double const denom  = hl - 2.0 * h + hr;
      double const offset = denom != 0.0 ? 0.5 * (hl - hr) / denom : 0.0;
      peaks.emplace_back(h, wrap_angle(kTwoPi * (b + offset) / kOrientationBins));
    }
  }
  std::stable_sort(peaks.begin(), peaks.end(),
                   [](auto const &a, auto const &b) { return a.first > b.first; });
  if (peaks.size() > static_cast<std::size_t>(max_count))
  {
    peaks.resize(static_cast<std::size_t>(max_count));
  }
  std::vector<double> out;
  out.reserve(peaks.size());
  for (auto const &p : peaks)
  {
    out.push_back(p.second);
  }
  return out;
}

// 4x4 spatial x 8 orientation histogram in the keypoint frame, unnormalized.
std::array<double, kDescriptorDim> raw_descriptor(Plane const &img, double kx, double ky, double sigma,
                                                  double theta)
{
  std::array<double, kDescriptorDim> d{};

  double const hist_w = kBinWidthFactor * sigma;
  int const    radius = static_cast<int>(
      std::lround(hist_w * std::numbers::sqrt2 * (kSpatialBins + 1) * 0.5));
  double const ct = std::cos(theta);
  double const st = std::sin(theta);
  int const    cx = static_cast<int>(std::lround(kx));
  int const    cy = static_cast<int>(std::lround(ky));

  double const half       = 0.5 * kSpatialBins;
  double const window_var = 2.0 * half * half;

  for (int y = cy - radius; y <= cy + radius; ++y)
  {
    if (y < 1 || y > img.height - 2)
    {
      continue;
    }
    for (int x = cx - radius; x <= cx + radius; ++x)
    {
      if (x < 1 || x > img.width - 2)
      {
        continue;
      }
      double const dx   = x - kx;
      double const dy   = y - ky;
      double const rx   = (ct * dx + st * dy) / hist_w;
      double const ry   = (-st * dx + ct * dy) / hist_w;
      double const rbin = ry + half - 0.5;
      double const cbin = rx + half - 0.5;
      if (rbin <= -1.0 || rbin >= kSpatialBins || cbin <= -1.0 || cbin >= kSpatialBins)
      {
        continue;
      }
      double const gx  = img.at(x + 1, y) - img.at(x - 1, y);
      double const gy  = img.at(x, y + 1) - img.at(x, y - 1);
      double const mag = std::sqrt(gx * gx + gy * gy);
      if (mag == 0.0)
      {
        continue;
      }
      double const obin = wrap_angle(std::atan2(gy, gx) - theta) * kDescriptorOriBins / kTwoPi;
      double const w    = std::exp(-(rx * rx + ry * ry) / window_var) * mag;

      int const    r0 = static_cast<int>(std::floor(rbin));
      int const    c0 = static_cast<int>(std::floor(cbin));
      int const    o0 = static_cast<int>(std::floor(obin));
      double const fr = rbin - r0;
      double const fc = cbin - c0;
      double const fo = obin - o0;

      for (int ir = 0; ir <= 1; ++ir)
      {
        int const r = r0 + ir;
        if (r < 0 || r >= kSpatialBins)
        {
          continue;
        }
        double const wr = ir ? fr : 1.0 - fr;
        for (int ic = 0; ic <= 1; ++ic)
        {
          int const c = c0 + ic;
          if (c < 0 || c >= kSpatialBins)
          {
            continue;
          }
          double const wc = ic ? fc : 1.0 - fc;
          for (int io = 0; io <= 1; ++io)
          {
            int const    o  = (o0 + io) % kDescriptorOriBins;
            double const wo = io ? fo : 1.0 - fo;
            d[static_cast<std::size_t>((r * kSpatialBins + c) * kDescriptorOriBins + o)] +=
                w * wr * wc * wo;
          }
        }
      }
    }
  }
  return d;
}

double l2_norm(std::array<double, kDescriptorDim> const &d)
{
  double s = 0.0;
  for (double v : d)
  {
    s += v * v;
  }
  return std::sqrt(s);
}

// Normalize, clip, renormalize. Returns false for an all-zero histogram.
bool finalize_descriptor(std::array<double, kDescriptorDim> &d)
{
  double n = l2_norm(d);
  if (n == 0.0)
  {
    return false;
  }
  for (auto &v : d)
  {
    v = std::min(v / n, kDescriptorClip);
  }
  n = l2_norm(d);
  for (auto &v : d)
  {
    v /= n;
  }
  return true;
}

}  // namespace

double ScaleSpace::level_sigma(double level) const
{
  return sigma0 * std::exp2(level / scales_per_octave);
}

ScaleSpace build_scale_space(GrayImage const &img, int octaves, int scales_per_octave, double sigma0)
{
  if (octaves < 1 || scales_per_octave < 2 || !(sigma0 > 0.0))
  {
    fail(ErrorCode::InvalidArgument, "scale space needs octaves >= 1, scales >= 2, sigma0 > 0");
  }
  int const min_side = 1 << octaves;
  if (img.width < min_side || img.height < min_side)
  {
    fail(ErrorCode::InsufficientResolution,
         std::to_string(img.width) + "x" + std::to_string(img.height) + " image is too small for " +
             std::to_string(octaves) + " octaves");
  }

  ScaleSpace ss;
  ss.sigma0            = sigma0;
  ss.scales_per_octave = scales_per_octave;

  Plane input(img.width, img.height);
  input.values = img.pixels;
  double const pre_blur =
      std::sqrt(std::max(sigma0 * sigma0 - kAssumedInputBlur * kAssumedInputBlur, 0.01));
  Plane base = blur(input, pre_blur);

  int const levels = scales_per_octave + 3;
  for (int o = 0; o < octaves; ++o)
  {
    std::vector<Plane> gauss;
    gauss.reserve(static_cast<std::size_t>(levels));
    gauss.push_back(std::move(base));
    for (int i = 1; i < levels; ++i)
    {
      double const prev = ss.level_sigma(i - 1);
      double const cur  = ss.level_sigma(i);
      gauss.push_back(blur(gauss.back(), std::sqrt(cur * cur - prev * prev)));
    }

    std::vector<Plane> dog;
    dog.reserve(static_cast<std::size_t>(levels - 1));
    for (int i = 0; i + 1 < levels; ++i)
    {
      auto const &lo = gauss[static_cast<std::size_t>(i)];
      auto const &hi = gauss[static_cast<std::size_t>(i + 1)];
      Plane       d(lo.width, lo.height);
      for (std::size_t k = 0; k < d.values.size(); ++k)
      {
        d.values[k] = hi.values[k] - lo.values[k];
      }
      dog.push_back(std::move(d));
    }

    if (o + 1 < octaves)
    {
      base = downsample(gauss[static_cast<std::size_t>(scales_per_octave)]);
    }
    ss.gaussians.push_back(std::move(gauss));
    ss.dog.push_back(std::move(dog));
  }
  return ss;
}

bool passes_edge_test(Plane const &dog, int x, int y, double edge_ratio)
{
  double const v   = dog.at(x, y);
  double const dxx = dog.at(x + 1, y) + dog.at(x - 1, y) - 2.0 * v;
  double const dyy = dog.at(x, y + 1) + dog.at(x, y - 1) - 2.0 * v;
  double const dxy =
      0.25 * (dog.at(x + 1, y + 1) - dog.at(x - 1, y + 1) - dog.at(x + 1, y - 1) + dog.at(x - 1, y - 1));
  double const tr  = dxx + dyy;
  double const det = dxx * dyy - dxy * dxy;
  if (det <= 0.0)
  {
    return false;
  }
  return tr * tr * edge_ratio < (edge_ratio + 1.0) * (edge_ratio + 1.0) * det;
}

std::vector<Keypoint> detect_keypoints(ScaleSpace const &ss, double contrast_thresh, double edge_ratio)
{
  if (!(contrast_thresh > 0.0) || !(edge_ratio > 0.0))
  {
    fail(ErrorCode::InvalidArgument, "keypoint thresholds must be positive");
  }

  std::vector<Keypoint> out;
  int const             s = ss.scales_per_octave;
  for (int o = 0; o < ss.octaves(); ++o)
  {
    auto const &dog = ss.dog[static_cast<std::size_t>(o)];
    int const   w   = dog.front().width;
    int const   h   = dog.front().height;
    for (int l = 1; l <= s; ++l)
    {
      auto const &lo  = dog[static_cast<std::size_t>(l - 1)];
      auto const &cur = dog[static_cast<std::size_t>(l)];
      auto const &hi  = dog[static_cast<std::size_t>(l + 1)];
      for (int y = 1; y < h - 1; ++y)
      {
        for (int x = 1; x < w - 1; ++x)
        {
          double const v = cur.at(x, y);
          if (std::abs(v) < 0.5 * contrast_thresh || !is_strict_extremum(dog, l, x, y))
          {
            continue;
          }

          std::array<double, 3> const g = {0.5 * (cur.at(x + 1, y) - cur.at(x - 1, y)),
                                           0.5 * (cur.at(x, y + 1) - cur.at(x, y - 1)),
                                           0.5 * (hi.at(x, y) - lo.at(x, y))};
          double const dxx = cur.at(x + 1, y) + cur.at(x - 1, y) - 2.0 * v;
          double const dyy = cur.at(x, y + 1) + cur.at(x, y - 1) - 2.0 * v;
          double const dss = hi.at(x, y) + lo.at(x, y) - 2.0 * v;
          double const dxy = 0.25 * (cur.at(x + 1, y + 1) - cur.at(x - 1, y + 1) -
                                     cur.at(x + 1, y - 1) + cur.at(x - 1, y - 1));
          double const dxs =
              0.25 * (hi.at(x + 1, y) - hi.at(x - 1, y) - lo.at(x + 1, y) + lo.at(x - 1, y));
          double const dys =
              0.25 * (hi.at(x, y + 1) - hi.at(x, y - 1) - lo.at(x, y + 1) + lo.at(x, y - 1));

          std::array<std::array<double, 3>, 3> const hess = {{{dxx, dxy, dxs}, {dxy, dyy, dys}, {dxs, dys, dss}}};
          std::array<double, 3>                      off{};
          if (!solve3(hess, {-g[0], -g[1], -g[2]}, off))
          {
            continue;
          }
          if (std::abs(off[0]) > kMaxRefineOffset || std::abs(off[1]) > kMaxRefineOffset ||
              std::abs(off[2]) > kMaxRefineOffset)
          {
            continue;
          }
          double const response = v + 0.5 * (g[0] * off[0] + g[1] * off[1] + g[2] * off[2]);
          if (std::abs(response) < contrast_thresh || !passes_edge_test(cur, x, y, edge_ratio))
          {
            continue;
          }

          Keypoint kp;
          kp.octave       = o;
          kp.level        = l;
          kp.ix           = x;
          kp.iy           = y;
          kp.octave_x     = std::clamp(x + off[0], 0.0, w - 1.0);
          kp.octave_y     = std::clamp(y + off[1], 0.0, h - 1.0);
          kp.octave_sigma = ss.level_sigma(l + off[2]);
          double const f  = std::exp2(o);
          kp.x            = f * (kp.octave_x + 0.5) - 0.5;
          kp.y            = f * (kp.octave_y + 0.5) - 0.5;
          kp.scale        = f * kp.octave_sigma;
          kp.response     = response;
          out.push_back(kp);
        }
      }
    }
  }
  return out;
}

DescriptorSet compute_descriptors(ScaleSpace const &ss, std::span<Keypoint const> keypoints,
                                  std::uint32_t image_id, int max_orientations)
{
  DescriptorSet set;
  set.image_id = image_id;
  for (auto const &kp : keypoints)
  {
    if (kp.octave < 0 || kp.octave >= ss.octaves())
    {
      ++set.skipped;
      continue;
    }
    auto const &octave = ss.gaussians[static_cast<std::size_t>(kp.octave)];
    double const level = std::log2(kp.octave_sigma / ss.sigma0) * ss.scales_per_octave;
    auto const  &img   = octave[static_cast<std::size_t>(nearest_level(ss, level))];
    if (kp.octave_x < 0.0 || kp.octave_x > img.width - 1.0 || kp.octave_y < 0.0 ||
        kp.octave_y > img.height - 1.0)
    {
      ++set.skipped;
      continue;
    }

    auto const angles =
        orientations(img, kp.octave_x, kp.octave_y, kp.octave_sigma, max_orientations);
    if (angles.empty())
    {
      ++set.rejected;
      continue;
    }
    for (double theta : angles)
    {
      auto d = raw_descriptor(img, kp.octave_x, kp.octave_y, kp.octave_sigma, theta);
      if (!finalize_descriptor(d))
      {
        ++set.rejected;
        continue;
      }
      Keypoint oriented    = kp;
      oriented.orientation = theta;
      set.keypoints.push_back(oriented);
      set.descriptors.append_row(d);
    }
  }
  return set;
}

DescriptorSet dense_descriptors(ScaleSpace const &ss, int stride, double sigma, std::uint32_t image_id)
{
  if (stride < 1 || !(sigma > 0.0))
  {
    fail(ErrorCode::InvalidArgument, "dense sampling needs stride >= 1 and sigma > 0");
  }
  DescriptorSet set;
  set.image_id = image_id;
  set.dense    = true;

  double const level = std::log2(sigma / ss.sigma0) * ss.scales_per_octave;
  auto const  &img   = ss.gaussians.front()[static_cast<std::size_t>(nearest_level(ss, level))];
  for (int y = stride / 2; y < img.height; y += stride)
  {
    for (int x = stride / 2; x < img.width; x += stride)
    {
      auto d = raw_descriptor(img, x, y, sigma, 0.0);
      if (!finalize_descriptor(d))
      {
        d.fill(0.0);
      }
      Keypoint kp;
      kp.x = kp.octave_x = x;
      kp.y = kp.octave_y = y;
      kp.ix              = x;
      kp.iy              = y;
      kp.scale = kp.octave_sigma = sigma;
      set.keypoints.push_back(kp);
      set.descriptors.append_row(d);
    }
  }
  return set;
}

DescriptorSet extract_sift(GrayImage const &img, Params const &params, std::uint32_t image_id)
{
  auto const ss = build_scale_space(img, params.octaves, params.scales_per_octave, params.sigma0);
  auto const kps = detect_keypoints(ss, params.contrast_thresh, params.edge_ratio);
  if (static_cast<int>(kps.size()) >= params.min_keypoints)
  {
    auto set = compute_descriptors(ss, kps, image_id, params.max_orientations);
    if (!set.descriptors.empty())
    {
      return set;
    }
  }
  return dense_descriptors(ss, params.dense_stride, params.dense_sigma, image_id);
}

}  // namespace ensvis::sift
