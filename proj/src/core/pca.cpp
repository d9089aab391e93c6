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

#include "ensvis/pca.hpp"

#include "ensvis/binio.hpp"
#include "ensvis/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

namespace ensvis::pca {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void fix_sign(std::span<double> axis)
{
  std::size_t best = 0;
  for (std::size_t i = 1; i < axis.size(); ++i)
  {
    if (std::abs(axis[i]) > std::abs(axis[best]))
    {
      best = i;
    }
  }
  if (axis[best] < 0.0)
  {
    for (auto &v : axis)
    {
      v = -v;
    }
  }
}

// Modified Gram-Schmidt over the rows, in order.
void orthonormalize_rows(Matrix &m)
{
  for (std::size_t i = 0; i < m.rows(); ++i)
  {
    auto ri = m.row(i);
    for (std::size_t j = 0; j < i; ++j)
    {
      auto const rj  = m.row(j);
      double     dot = 0.0;
      for (std::size_t d = 0; d < ri.size(); ++d)
      {
        dot += ri[d] * rj[d];
      }
      for (std::size_t d = 0; d < ri.size(); ++d)
      {
        ri[d] -= dot * rj[d];
      }
    }
    double norm = 0.0;
    for (double v : ri)
    {
      norm += v * v;
    }
    norm = std::sqrt(norm);
    if (norm == 0.0)
    {
      fail(ErrorCode::Numerical, "degenerate principal axis " + std::to_string(i));
    }
    for (auto &v : ri)
    {
      v /= norm;
    }
  }
}

}  // namespace

void check_fit_shape(std::size_t n, std::size_t d, std::size_t q)
{
  if (n < 2)
  {
    fail(ErrorCode::Dimension, "PCA needs at least two samples");
  }
  if (q < 1 || q > std::min(n - 1, d))
  {
    fail(ErrorCode::Dimension, "target dimension " + std::to_string(q) + " outside [1, " +
                                   std::to_string(std::min(n - 1, d)) + "] for N=" + std::to_string(n) +
                                   ", D=" + std::to_string(d));
  }
}

PcaModel fit_pca(Matrix const &data, std::size_t q)
{
  std::size_t const N = data.rows();
  std::size_t const D = data.cols();
  check_fit_shape(N, D, q);

  PcaModel model;
  model.mean.assign(D, 0.0);
  for (std::size_t t = 0; t < N; ++t)
  {
    auto const x = data.row(t);
    for (std::size_t d = 0; d < D; ++d)
    {
      model.mean[d] += x[d];
    }
  }
  for (auto &m : model.mean)
  {
    m /= static_cast<double>(N);
  }

  RowMatrix centered(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(D));
  for (std::size_t t = 0; t < N; ++t)
  {
    auto const x = data.row(t);
    for (std::size_t d = 0; d < D; ++d)
    {
      centered(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(d)) = x[d] - model.mean[d];
    }
  }
  double const denom = static_cast<double>(N - 1);

  model.components = Matrix(q, D);
  model.eigenvalues.assign(q, 0.0);

  if (N > D)
  {
    Eigen::MatrixXd const cov = (centered.transpose() * centered) / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success)
    {
      fail(ErrorCode::Numerical, "covariance eigendecomposition failed");
    }
    // Eigen returns ascending eigenvalues.
    for (std::size_t i = 0; i < q; ++i)
    {
      auto const col       = static_cast<Eigen::Index>(D - 1 - i);
      model.eigenvalues[i] = std::max(solver.eigenvalues()(col), 0.0);
      for (std::size_t d = 0; d < D; ++d)
      {
        model.components(i, d) = solver.eigenvectors()(static_cast<Eigen::Index>(d), col);
      }
    }
  }
  else
  {
    Eigen::MatrixXd const gram = (centered * centered.transpose()) / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
    if (solver.info() != Eigen::Success)
    {
      fail(ErrorCode::Numerical, "Gram eigendecomposition failed");
    }
    for (std::size_t i = 0; i < q; ++i)
    {
      auto const col       = static_cast<Eigen::Index>(N - 1 - i);
      model.eigenvalues[i] = std::max(solver.eigenvalues()(col), 0.0);
      Eigen::VectorXd const axis = centered.transpose() * solver.eigenvectors().col(col);
      for (std::size_t d = 0; d < D; ++d)
      {
        model.components(i, d) = axis(static_cast<Eigen::Index>(d));
      }
    }
  }

  orthonormalize_rows(model.components);
  for (std::size_t i = 0; i < q; ++i)
  {
    fix_sign(model.components.row(i));
  }
  return model;
}

std::vector<double> project(PcaModel const &model, std::span<double const> x)
{
  if (x.size() != model.dim())
  {
    fail(ErrorCode::Dimension, "PCA input has length " + std::to_string(x.size()) + ", model expects " +
                                   std::to_string(model.dim()));
  }
  std::vector<double> out(model.target(), 0.0);
  for (std::size_t i = 0; i < model.target(); ++i)
  {
    auto const axis = model.components.row(i);
    double     s    = 0.0;
    for (std::size_t d = 0; d < x.size(); ++d)
    {
      s += axis[d] * (x[d] - model.mean[d]);
    }
    out[i] = s;
  }
  return out;
}

Matrix project_rows(PcaModel const &model, Matrix const &data)
{
  Matrix out(data.rows(), model.target());
  for (std::size_t t = 0; t < data.rows(); ++t)
  {
    auto const p = project(model, data.row(t));
    std::copy(p.begin(), p.end(), out.row(t).begin());
  }
  return out;
}

std::vector<std::uint8_t> encode_pca(PcaModel const &model)
{
  ByteWriter w;
  w.bytes("PCA1");
  w.u32(static_cast<std::uint32_t>(model.dim()));
  w.u32(static_cast<std::uint32_t>(model.target()));
  for (double v : model.mean)
  {
    w.f64(v);
  }
  for (double v : model.components.data())
  {
    w.f64(v);
  }
  for (double v : model.eigenvalues)
  {
    w.f64(v);
  }
  return w.take();
}

PcaModel decode_pca(std::span<std::uint8_t const> bytes)
{
  ByteReader r(bytes);
  if (r.bytes(4) != "PCA1")
  {
    fail(ErrorCode::Format, "bad PCA magic");
  }
  std::size_t const D        = r.u32();
  std::size_t const q        = r.u32();
  std::size_t const expected = 12 + 8 * (D + q * D + q);
  if (bytes.size() < expected)
  {
    fail(ErrorCode::Truncated, "PCA blob is " + std::to_string(bytes.size()) + " bytes, expected " +
                                   std::to_string(expected));
  }
  if (bytes.size() > expected)
  {
    fail(ErrorCode::Format, "trailing bytes after PCA payload");
  }
  PcaModel model;
  model.mean.resize(D);
  model.components = Matrix(q, D);
  model.eigenvalues.resize(q);
  for (auto &v : model.mean)
  {
    v = r.f64();
  }
  for (auto &v : model.components.data())
  {
    v = r.f64();
  }
  for (auto &v : model.eigenvalues)
  {
    v = r.f64();
  }
  return model;
}

void save_pca(PcaModel const &model, std::filesystem::path const &path)
{
  write_file(path, encode_pca(model));
}

PcaModel load_pca(std::filesystem::path const &path)
{
  return decode_pca(read_file(path));
}

}  // namespace ensvis::pca
