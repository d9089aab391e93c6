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

#include "ensvis/fisher.hpp"

#include "ensvis/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace ensvis::fisher {

FisherVector encode_fv(codebook::GmmParams const &params, Matrix const &descriptors)
{
  std::size_t const T = descriptors.rows();
  std::size_t const K = params.components();
  std::size_t const D = params.dim();
  if (T == 0)
  {
    fail(ErrorCode::EmptySample, "cannot encode an empty descriptor set");
  }
  if (descriptors.cols() != D)
  {
    fail(ErrorCode::Dimension, "descriptor dimension " + std::to_string(descriptors.cols()) +
                                   " does not match codebook dimension " + std::to_string(D));
  }

  auto const gamma = codebook::responsibilities(params, descriptors);

  std::vector<std::size_t> order(T);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    auto const ra = descriptors.row(a);
    auto const rb = descriptors.row(b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
  });

  std::vector<double> inv_sigma(K * D);
  for (std::size_t i = 0; i < K * D; ++i)
  {
    inv_sigma[i] = 1.0 / std::sqrt(params.variances.data()[i]);
  }

  FisherVector fv;
  fv.values.assign(2 * K * D, 0.0);
  fv.gmm_id = codebook::fingerprint(params);

  double *mean_block = fv.values.data();
  double *var_block  = fv.values.data() + K * D;
  for (std::size_t t : order)
  {
    auto const x = descriptors.row(t);
    for (std::size_t k = 0; k < K; ++k)
    {
      double const g = gamma(t, k);
      if (g < kGammaFloor)
      {
        continue;
      }
      auto const mu = params.means.row(k);
      for (std::size_t d = 0; d < D; ++d)
      {
        double const z = (x[d] - mu[d]) * inv_sigma[k * D + d];
        mean_block[k * D + d] += g * z;
        var_block[k * D + d] += g * (z * z - 1.0);
      }
    }
  }

  for (std::size_t k = 0; k < K; ++k)
  {
    double const w         = params.weights[k];
    double const mean_norm = 1.0 / (static_cast<double>(T) * std::sqrt(w));
    double const var_norm  = 1.0 / (static_cast<double>(T) * std::sqrt(2.0 * w));
    for (std::size_t d = 0; d < D; ++d)
    {
      mean_block[k * D + d] *= mean_norm;
      var_block[k * D + d] *= var_norm;
    }
  }
  return fv;
}

FisherVector normalize_fv(FisherVector fv)
{
  double sq = 0.0;
  for (auto &v : fv.values)
  {
    if (!std::isfinite(v))
    {
      fail(ErrorCode::Numerical, "non-finite Fisher vector entry");
    }
    v = std::copysign(std::sqrt(std::abs(v)), v);
    sq += v * v;
  }
  if (sq > 0.0)
  {
    double const inv = 1.0 / std::sqrt(sq);
    for (auto &v : fv.values)
    {
      v *= inv;
    }
  }
  fv.normalized = true;
  return fv;
}

}  // namespace ensvis::fisher
