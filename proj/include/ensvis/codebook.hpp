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

namespace ensvis::codebook {

inline constexpr double kVarianceFloor = 1e-4;

/// Diagonal-covariance Gaussian mixture.
struct GmmParams
{
  std::vector<double> weights;
  Matrix              means;      // K x D
  Matrix              variances;  // K x D

  std::size_t components() const noexcept
  {
    return weights.size();
  }
  std::size_t dim() const noexcept
  {
    return means.cols();
  }

  /// Throws ErrorCode::InvalidArgument when shapes or invariants are off.
  void validate() const;

  friend bool operator==(GmmParams const &, GmmParams const &) = default;
};

struct EmResult
{
  GmmParams           params;
  std::vector<double> trace;  // mean log-likelihood per point; trace[0] is the initial model
  int                 iterations = 0;
};

struct TrainOptions
{
  std::size_t   components  = 64;
  std::uint64_t seed        = 1;
  int           max_iter    = 30;
  double        tol         = 1e-6;
  std::size_t   max_samples = 200000;
  unsigned      threads     = 1;
};

/// k-means++ seeding followed by at most 25 Lloyd iterations.
GmmParams init_kmeans(Matrix const &data, std::size_t k, std::uint64_t seed);

/// Posterior responsibilities, T x K. Rows are independent and may be spread
/// over `threads` workers without changing the result.
Matrix responsibilities(GmmParams const &params, Matrix const &data, unsigned threads = 1);

double log_likelihood(GmmParams const &params, Matrix const &data, unsigned threads = 1);

EmResult em_fit(Matrix const &data, GmmParams init, int max_iter, double tol, unsigned threads = 1);

/// Seeded uniform subsample (without replacement) to at most `max_rows` rows,
/// preserving the original row order.
Matrix subsample_rows(Matrix const &data, std::size_t max_rows, std::uint64_t seed);

/// subsample -> init_kmeans -> em_fit.
EmResult train_gmm(Matrix const &data, TrainOptions const &opts);

std::vector<std::uint8_t> encode_gmm(GmmParams const &params);
GmmParams                 decode_gmm(std::span<std::uint8_t const> bytes);
void                      save_gmm(GmmParams const &params, std::filesystem::path const &path);
GmmParams                 load_gmm(std::filesystem::path const &path);

/// FNV-1a over the serialized parameters; ties encodings to their codebook.
std::uint64_t fingerprint(GmmParams const &params);

}  // namespace ensvis::codebook
