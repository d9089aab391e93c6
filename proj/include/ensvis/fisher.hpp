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

#include "ensvis/codebook.hpp"
#include "ensvis/matrix.hpp"

#include <cstdint>
#include <vector>

namespace ensvis::fisher {

/// Responsibilities below this are treated as exactly zero.
inline constexpr double kGammaFloor = 1e-12;

/// Layout: K mean blocks of length D, then K variance blocks of length D.
struct FisherVector
{
  std::vector<double> values;
  std::uint64_t       gmm_id     = 0;
  bool                normalized = false;
};

/// Gradient of the per-descriptor average log-likelihood with respect to the
/// means and standard deviations, whitened by the diagonal closed-form Fisher
/// information:
///
///   G_mu_k    = 1/(T sqrt(w_k))   sum_t g_tk (x_t - mu_k) / sigma_k
///   G_sigma_k = 1/(T sqrt(2 w_k)) sum_t g_tk [((x_t - mu_k) / sigma_k)^2 - 1]
///
/// Descriptors are accumulated in lexicographic order, so the result does not
/// depend on row order.
FisherVector encode_fv(codebook::GmmParams const &params, Matrix const &descriptors);

/// Signed square root followed by L2 normalization.
FisherVector normalize_fv(FisherVector fv);

inline FisherVector encode_normalized(codebook::GmmParams const &params, Matrix const &descriptors)
{
  return normalize_fv(encode_fv(params, descriptors));
}

}  // namespace ensvis::fisher
