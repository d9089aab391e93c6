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

#include "ensvis/matrix.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace ensvis::pca {

/// Principal axes as rows of `components` (q x D), eigenvalues non-increasing.
/// Each axis is signed so its largest-magnitude coordinate is positive.
struct PcaModel
{
  std::vector<double> mean;
  Matrix              components;
  std::vector<double> eigenvalues;

  std::size_t dim() const noexcept
  {
    return mean.size();
  }
  std::size_t target() const noexcept
  {
    return components.rows();
  }

  friend bool operator==(PcaModel const &, PcaModel const &) = default;
};

/// Throws ErrorCode::Dimension unless N >= 2 and 1 <= q <= min(N - 1, D).
void check_fit_shape(std::size_t n, std::size_t d, std::size_t q);

/// Covariance uses the 1/(N-1) normalization. When N <= D the eigenproblem is
/// solved on the N x N Gram matrix instead of the D x D covariance.
PcaModel fit_pca(Matrix const &data, std::size_t q);

std::vector<double> project(PcaModel const &model, std::span<double const> x);
Matrix              project_rows(PcaModel const &model, Matrix const &data);

std::vector<std::uint8_t> encode_pca(PcaModel const &model);
PcaModel                  decode_pca(std::span<std::uint8_t const> bytes);
void                      save_pca(PcaModel const &model, std::filesystem::path const &path);
PcaModel                  load_pca(std::filesystem::path const &path);

}  // namespace ensvis::pca
