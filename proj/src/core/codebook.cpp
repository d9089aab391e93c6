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

#include "ensvis/codebook.hpp"

#include "ensvis/binio.hpp"
#include "ensvis/error.hpp"
#include "ensvis/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

namespace ensvis::codebook {

namespace {

constexpr int    kLloydIterations = 25;
constexpr double kMinWeight       = 1e-12;

double uniform01(std::mt19937_64 &rng)
{
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double squared_distance(std::span<double const> a, std::span<double const> b)
{
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
  {
    double const d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void check_data(GmmParams const &params, Matrix const &data)
{
  if (data.cols() != params.dim())
  {
    fail(ErrorCode::Dimension, "data has " + std::to_string(data.cols()) + " columns, model expects " +
                                   std::to_string(params.dim()));
  }
}

// Per-component log(w_k) - 0.5 * sum_d log(2 pi var_kd), and 1 / var.
struct Precomputed
{
  std::vector<double> log_norm;
  Matrix              inv_var;
};

Precomputed precompute(GmmParams const &params)
{
  std::size_t const K = params.components();
  std::size_t const D = params.dim();
  Precomputed       pre{std::vector<double>(K), Matrix(K, D)};
  double const      log_two_pi = std::log(2.0 * std::numbers::pi);
  for (std::size_t k = 0; k < K; ++k)
  {
    double c = std::log(params.weights[k]);
    for (std::size_t d = 0; d < D; ++d)
    {
      double const v    = params.variances(k, d);
      c -= 0.5 * (log_two_pi + std::log(v));
      pre.inv_var(k, d) = 1.0 / v;
    }
    pre.log_norm[k] = c;
  }
  return pre;
}

// Fills gamma (if non-null) and per-row log p(x_t). Rows are independent.
void estep(GmmParams const &params, Matrix const &data, Matrix *gamma, std::vector<double> &row_ll,
           unsigned threads)
{
  std::size_t const K   = params.components();
  std::size_t const D   = params.dim();
  auto const        pre = precompute(params);
  row_ll.assign(data.rows(), 0.0);

  parallel_for(data.rows(), threads, [&](std::size_t begin, std::size_t end) {
    std::vector<double> logp(K);
    for (std::size_t t = begin; t < end; ++t)
    {
      auto const x    = data.row(t);
      double     best = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < K; ++k)
      {
        auto const mu  = params.means.row(k);
        auto const inv = pre.inv_var.row(k);
        double     q   = 0.0;
        for (std::size_t d = 0; d < D; ++d)
        {
          double const diff = x[d] - mu[d];
          q += diff * diff * inv[d];
        }
        logp[k] = pre.log_norm[k] - 0.5 * q;
        best    = std::max(best, logp[k]);
      }
      double sum = 0.0;
      for (std::size_t k = 0; k < K; ++k)
      {
        sum += std::exp(logp[k] - best);
      }
      double const lse = best + std::log(sum);
      row_ll[t]        = lse;
      if (gamma != nullptr)
      {
        for (std::size_t k = 0; k < K; ++k)
        {
          (*gamma)(t, k) = std::exp(logp[k] - lse);
        }
      }
    }
  });
}

double sum_in_order(std::vector<double> const &values)
{
  double s = 0.0;
  for (double v : values)
  {
    s += v;
  }
  return s;
}

GmmParams mstep(Matrix const &data, Matrix const &gamma, GmmParams const &prev)
{
  std::size_t const N = data.rows();
  std::size_t const D = data.cols();
  std::size_t const K = gamma.cols();

  std::vector<double> mass(K, 0.0);
  Matrix              sums(K, D);
  for (std::size_t t = 0; t < N; ++t)
  {
    auto const x = data.row(t);
    for (std::size_t k = 0; k < K; ++k)
    {
      double const g = gamma(t, k);
      if (g == 0.0)
      {
        continue;
      }
      mass[k] += g;
      auto s = sums.row(k);
      for (std::size_t d = 0; d < D; ++d)
      {
        s[d] += g * x[d];
      }
    }
  }

  GmmParams next;
  next.weights.assign(K, 0.0);
  next.means     = prev.means;
  next.variances = prev.variances;
  for (std::size_t k = 0; k < K; ++k)
  {
    if (mass[k] > 0.0)
    {
      for (std::size_t d = 0; d < D; ++d)
      {
        next.means(k, d) = sums(k, d) / mass[k];
      }
    }
  }

  Matrix sq(K, D);
  for (std::size_t t = 0; t < N; ++t)
  {
    auto const x = data.row(t);
    for (std::size_t k = 0; k < K; ++k)
    {
      double const g = gamma(t, k);
      if (g == 0.0)
      {
        continue;
      }
      auto const mu = next.means.row(k);
      auto       s  = sq.row(k);
      for (std::size_t d = 0; d < D; ++d)
      {
        double const diff = x[d] - mu[d];
        s[d] += g * diff * diff;
      }
    }
  }

  double total = 0.0;
  for (std::size_t k = 0; k < K; ++k)
  {
    if (mass[k] > 0.0)
    {
      for (std::size_t d = 0; d < D; ++d)
      {
        next.variances(k, d) = std::max(sq(k, d) / mass[k], kVarianceFloor);
      }
    }
    next.weights[k] = std::max(mass[k] / static_cast<double>(N), kMinWeight);
    total += next.weights[k];
  }
  for (auto &w : next.weights)
  {
    w /= total;
  }
  return next;
}

}  // namespace

void GmmParams::validate() const
{
  std::size_t const K = weights.size();
  if (K == 0 || means.rows() != K || variances.rows() != K || variances.cols() != means.cols() ||
      means.cols() == 0)
  {
    fail(ErrorCode::InvalidArgument, "inconsistent GMM shapes");
  }
  double sum = 0.0;
  for (double w : weights)
  {
    if (!(w > 0.0) || !std::isfinite(w))
    {
      fail(ErrorCode::InvalidArgument, "GMM weights must be positive and finite");
    }
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9)
  {
    fail(ErrorCode::InvalidArgument, "GMM weights sum to " + std::to_string(sum));
  }
  for (double v : variances.data())
  {
    if (!(v >= kVarianceFloor) || !std::isfinite(v))
    {
      fail(ErrorCode::InvalidArgument, "GMM variance below floor or non-finite");
    }
  }
  for (double m : means.data())
  {
    if (!std::isfinite(m))
    {
      fail(ErrorCode::InvalidArgument, "GMM mean is non-finite");
    }
  }
}

GmmParams init_kmeans(Matrix const &data, std::size_t k, std::uint64_t seed)
{
  std::size_t const N = data.rows();
  std::size_t const D = data.cols();
  if (k == 0 || N < k || D == 0)
  {
    fail(ErrorCode::InvalidArgument, "k-means needs 1 <= K <= N and D >= 1 (K=" + std::to_string(k) +
                                         ", N=" + std::to_string(N) + ", D=" + std::to_string(D) + ")");
  }

  std::mt19937_64 rng(seed);
  Matrix          centers(k, D);

  // k-means++ seeding.
  std::size_t first = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(N));
  first             = std::min(first, N - 1);
  std::copy(data.row(first).begin(), data.row(first).end(), centers.row(0).begin());
  std::vector<double> nearest(N);
  for (std::size_t t = 0; t < N; ++t)
  {
    nearest[t] = squared_distance(data.row(t), centers.row(0));
  }
  for (std::size_t c = 1; c < k; ++c)
  {
    double const total  = sum_in_order(nearest);
    std::size_t  chosen = 0;
    if (total > 0.0)
    {
      double const target = uniform01(rng) * total;
      double       acc    = 0.0;
      chosen              = N - 1;
      for (std::size_t t = 0; t < N; ++t)
      {
        acc += nearest[t];
        if (acc > target)
        {
          chosen = t;
          break;
        }
      }
    }
    else
    {
      chosen = std::min(static_cast<std::size_t>(uniform01(rng) * static_cast<double>(N)), N - 1);
    }
    std::copy(data.row(chosen).begin(), data.row(chosen).end(), centers.row(c).begin());
    for (std::size_t t = 0; t < N; ++t)
    {
      nearest[t] = std::min(nearest[t], squared_distance(data.row(t), centers.row(c)));
    }
  }

  // Lloyd iterations.
  std::vector<std::size_t> assign(N, k);
  std::vector<double>      dist(N, 0.0);
  for (int iter = 0; iter < kLloydIterations; ++iter)
  {
    bool changed = false;
    for (std::size_t t = 0; t < N; ++t)
    {
      std::size_t best   = 0;
      double      best_d = squared_distance(data.row(t), centers.row(0));
      for (std::size_t c = 1; c < k; ++c)
      {
        double const d = squared_distance(data.row(t), centers.row(c));
        if (d < best_d)
        {
          best_d = d;
          best   = c;
        }
      }
      changed   = changed || assign[t] != best;
      assign[t] = best;
      dist[t]   = best_d;
    }

    std::vector<std::size_t> count(k, 0);
    Matrix                   sums(k, D);
    for (std::size_t t = 0; t < N; ++t)
    {
      ++count[assign[t]];
      auto s = sums.row(assign[t]);
      auto x = data.row(t);
      for (std::size_t d = 0; d < D; ++d)
      {
        s[d] += x[d];
      }
    }
    for (std::size_t c = 0; c < k; ++c)
    {
      if (count[c] == 0)
      {
        // Re-seed the empty cluster from the point farthest from its center.
        auto const far = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
        std::copy(data.row(far).begin(), data.row(far).end(), centers.row(c).begin());
        dist[far]   = 0.0;
        assign[far] = c;
        changed     = true;
        continue;
      }
      for (std::size_t d = 0; d < D; ++d)
      {
        centers(c, d) = sums(c, d) / static_cast<double>(count[c]);
      }
    }
    if (!changed)
    {
      break;
    }
  }

  // Final assignment against the final centers.
  for (std::size_t t = 0; t < N; ++t)
  {
    std::size_t best   = 0;
    double      best_d = squared_distance(data.row(t), centers.row(0));
    for (std::size_t c = 1; c < k; ++c)
    {
      double const d = squared_distance(data.row(t), centers.row(c));
      if (d < best_d)
      {
        best_d = d;
        best   = c;
      }
    }
    assign[t] = best;
  }

  GmmParams params;
  params.weights.assign(k, 0.0);
  params.means     = Matrix(k, D);
  params.variances = Matrix(k, D);
  std::vector<std::size_t> count(k, 0);
  for (std::size_t t = 0; t < N; ++t)
  {
    ++count[assign[t]];
    auto m = params.means.row(assign[t]);
    auto x = data.row(t);
    for (std::size_t d = 0; d < D; ++d)
    {
      m[d] += x[d];
    }
  }
  for (std::size_t c = 0; c < k; ++c)
  {
    if (count[c] == 0)
    {
      std::copy(centers.row(c).begin(), centers.row(c).end(), params.means.row(c).begin());
      continue;
    }
    for (std::size_t d = 0; d < D; ++d)
    {
      params.means(c, d) /= static_cast<double>(count[c]);
    }
  }
  for (std::size_t t = 0; t < N; ++t)
  {
    auto v  = params.variances.row(assign[t]);
    auto mu = params.means.row(assign[t]);
    auto x  = data.row(t);
    for (std::size_t d = 0; d < D; ++d)
    {
      double const diff = x[d] - mu[d];
      v[d] += diff * diff;
    }
  }
  double total = 0.0;
  for (std::size_t c = 0; c < k; ++c)
  {
    double const n = static_cast<double>(count[c]);
    for (std::size_t d = 0; d < D; ++d)
    {
      params.variances(c, d) =
          count[c] > 0 ? std::max(params.variances(c, d) / n, kVarianceFloor) : kVarianceFloor;
    }
    params.weights[c] = std::max(n / static_cast<double>(N), kMinWeight);
    total += params.weights[c];
  }
  for (auto &w : params.weights)
  {
    w /= total;
  }
  return params;
}

Matrix responsibilities(GmmParams const &params, Matrix const &data, unsigned threads)
{
  check_data(params, data);
  Matrix              gamma(data.rows(), params.components());
  std::vector<double> row_ll;
  estep(params, data, &gamma, row_ll, threads);
  return gamma;
}

double log_likelihood(GmmParams const &params, Matrix const &data, unsigned threads)
{
  check_data(params, data);
  std::vector<double> row_ll;
  estep(params, data, nullptr, row_ll, threads);
  return sum_in_order(row_ll);
}

EmResult em_fit(Matrix const &data, GmmParams init, int max_iter, double tol, unsigned threads)
{
  init.validate();
  check_data(init, data);
  if (max_iter < 1)
  {
    fail(ErrorCode::InvalidArgument, "em_fit needs max_iter >= 1");
  }
  if (data.rows() == 0)
  {
    fail(ErrorCode::InvalidArgument, "em_fit needs at least one data row");
  }

  double const n = static_cast<double>(data.rows());
  EmResult     result;
  result.params = std::move(init);

  Matrix              gamma(data.rows(), result.params.components());
  std::vector<double> row_ll;
  estep(result.params, data, &gamma, row_ll, threads);
  double ll = sum_in_order(row_ll);
  if (!std::isfinite(ll))
  {
    fail(ErrorCode::Numerical, "non-finite log-likelihood at iteration 0");
  }
  result.trace.push_back(ll / n);

  for (int it = 1; it <= max_iter; ++it)
  {
    result.params = mstep(data, gamma, result.params);
    estep(result.params, data, &gamma, row_ll, threads);
    ll = sum_in_order(row_ll);
    if (!std::isfinite(ll))
    {
      fail(ErrorCode::Numerical, "non-finite log-likelihood at iteration " + std::to_string(it));
    }
    result.trace.push_back(ll / n);
    result.iterations = it;
    if (result.trace[static_cast<std::size_t>(it)] - result.trace[static_cast<std::size_t>(it - 1)] < tol)
    {
      break;
    }
  }
  return result;
}

Matrix subsample_rows(Matrix const &data, std::size_t max_rows, std::uint64_t seed)
{
  if (data.rows() <= max_rows)
  {
    return data;
  }
  std::vector<std::size_t> idx(data.rows());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < max_rows; ++i)
  {
    std::size_t const remaining = idx.size() - i;
    std::size_t const j = i + std::min(static_cast<std::size_t>(uniform01(rng) * static_cast<double>(remaining)),
                                       remaining - 1);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(max_rows);
  std::sort(idx.begin(), idx.end());
  Matrix out(max_rows, data.cols());
  for (std::size_t i = 0; i < max_rows; ++i)
  {
    std::copy(data.row(idx[i]).begin(), data.row(idx[i]).end(), out.row(i).begin());
  }
  return out;
}

EmResult train_gmm(Matrix const &data, TrainOptions const &opts)
{
  auto const sample = subsample_rows(data, opts.max_samples, opts.seed);
  auto       init   = init_kmeans(sample, opts.components, opts.seed);
  return em_fit(sample, std::move(init), opts.max_iter, opts.tol, opts.threads);
}

std::vector<std::uint8_t> encode_gmm(GmmParams const &params)
{
  params.validate();
  ByteWriter w;
  w.bytes("GMM1");
  w.u32(static_cast<std::uint32_t>(params.components()));
  w.u32(static_cast<std::uint32_t>(params.dim()));
  for (double v : params.weights)
  {
    w.f64(v);
  }
  for (double v : params.means.data())
  {
    w.f64(v);
  }
  for (double v : params.variances.data())
  {
    w.f64(v);
  }
  return w.take();
}

GmmParams decode_gmm(std::span<std::uint8_t const> bytes)
{
  ByteReader r(bytes);
  if (r.bytes(4) != "GMM1")
  {
    fail(ErrorCode::Format, "bad GMM magic");
  }
  std::size_t const K        = r.u32();
  std::size_t const D        = r.u32();
  std::size_t const expected = 12 + 8 * (K + 2 * K * D);
  if (bytes.size() < expected)
  {
    fail(ErrorCode::Truncated, "GMM blob is " + std::to_string(bytes.size()) + " bytes, expected " +
                                   std::to_string(expected));
  }
  if (bytes.size() > expected)
  {
    fail(ErrorCode::Format, "trailing bytes after GMM payload");
  }
  GmmParams params;
  params.weights.resize(K);
  params.means     = Matrix(K, D);
  params.variances = Matrix(K, D);
  for (auto &v : params.weights)
  {
    v = r.f64();
  }
  for (auto &v : params.means.data())
  {
    v = r.f64();
  }
  for (auto &v : params.variances.data())
  {
    v = r.f64();
  }
  try
  {
    params.validate();
  }
  catch (Error const &e)
  {
    fail(ErrorCode::Format, std::string("invalid GMM payload: ") + e.what());
  }
  return params;
}

void save_gmm(GmmParams const &params, std::filesystem::path const &path)
{
  write_file(path, encode_gmm(params));
}

GmmParams load_gmm(std::filesystem::path const &path)
{
  return decode_gmm(read_file(path));
}

std::uint64_t fingerprint(GmmParams const &params)
{
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : encode_gmm(params))
  {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace ensvis::codebook
