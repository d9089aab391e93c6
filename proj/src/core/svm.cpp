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

#include "ensvis/svm.hpp"

#include "ensvis/binio.hpp"
#include "ensvis/error.hpp"
#include "ensvis/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

namespace ensvis::svm {

namespace {

double dot(std::span<double const> a, std::span<double const> b)
{
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
  {
    s += a[i] * b[i];
  }
  return s;
}

void check_dim(MulticlassModel const &model, std::span<double const> x)
{
  if (x.size() != model.dim())
  {
    fail(ErrorCode::Dimension, "input has length " + std::to_string(x.size()) + ", model expects " +
                                   std::to_string(model.dim()));
  }
}

}  // namespace

double LinearModel::decision(std::span<double const> x) const
{
  return dot(w, x) + b;
}

BinaryResult train_binary_detailed(Matrix const &data, std::span<int const> y, BinaryOptions const &opts)
{
  std::size_t const N = data.rows();
  std::size_t const D = data.cols();
  if (y.size() != N)
  {
    fail(ErrorCode::Dimension, "label count does not match data rows");
  }
  if (!(opts.C > 0.0))
  {
    fail(ErrorCode::InvalidArgument, "C must be positive");
  }
  bool has_pos = false;
  bool has_neg = false;
  for (int v : y)
  {
    if (v != 1 && v != -1)
    {
      fail(ErrorCode::InvalidArgument, "binary labels must be +1 or -1");
    }
    has_pos = has_pos || v == 1;
    has_neg = has_neg || v == -1;
  }
  if (!has_pos || !has_neg)
  {
    fail(ErrorCode::DegenerateLabels, "binary training needs both classes present");
  }

  // w holds D weights followed by the bias weight.
  std::vector<double> w(D + 1, 0.0);
  std::vector<double> alpha(N, 0.0);
  std::vector<double> qdiag(N);
  for (std::size_t i = 0; i < N; ++i)
  {
    auto const x = data.row(i);
    qdiag[i]     = dot(x, x) + 1.0;
  }

  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(opts.seed);

  BinaryResult result;
  double const C = opts.C;
  for (int epoch = 0; epoch < opts.epochs; ++epoch)
  {
    for (std::size_t i = N; i > 1; --i)
    {
      std::size_t const j = static_cast<std::size_t>(rng() % i);
      std::swap(order[i - 1], order[j]);
    }

    double pg_max = -std::numeric_limits<double>::infinity();
    double pg_min = std::numeric_limits<double>::infinity();
    for (std::size_t i : order)
    {
      auto const   x  = data.row(i);
      double const yi = y[i];
      double const G  = yi * (dot(std::span<double const>(w).first(D), x) + w[D]) - 1.0;

      double pg = G;
      if (alpha[i] == 0.0)
      {
        pg = std::min(G, 0.0);
      }
      else if (alpha[i] == C)
      {
        pg = std::max(G, 0.0);
      }
      pg_max = std::max(pg_max, pg);
      pg_min = std::min(pg_min, pg);

      if (std::abs(pg) > 1e-12)
      {
        double const old = alpha[i];
        alpha[i]         = std::clamp(old - G / qdiag[i], 0.0, C);
        double const d   = (alpha[i] - old) * yi;
        for (std::size_t k = 0; k < D; ++k)
        {
          w[k] += d * x[k];
        }
        w[D] += d;
      }
    }

    double const wnorm = dot(w, w);
    double       asum  = 0.0;
    for (double a : alpha)
    {
      asum += a;
    }
    result.dual_trace.push_back(asum - 0.5 * wnorm);
    result.epochs_run      = epoch + 1;
    result.final_violation = pg_max - pg_min;
    if (result.final_violation < opts.tolerance)
    {
      break;
    }
  }

  result.model.w.assign(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(D));
  result.model.b = w[D];
  result.model.C = C;
  result.alpha   = std::move(alpha);
  return result;
}

LinearModel train_binary(Matrix const &data, std::span<int const> y, double C, int epochs, std::uint64_t seed)
{
  BinaryOptions opts;
  opts.C      = C;
  opts.epochs = epochs;
  opts.seed   = seed;
  return train_binary_detailed(data, y, opts).model;
}

MulticlassModel train_ovr(Matrix const &data, std::span<std::uint32_t const> labels, double C,
                          std::span<std::uint32_t const> label_table, OvrOptions const &opts)
{
  if (labels.size() != data.rows())
  {
    fail(ErrorCode::Dimension, "label count does not match data rows");
  }
  MulticlassModel model;
  if (label_table.empty())
  {
    std::set<std::uint32_t> distinct(labels.begin(), labels.end());
    model.labels.assign(distinct.begin(), distinct.end());
  }
  else
  {
    model.labels.assign(label_table.begin(), label_table.end());
    std::set<std::uint32_t> distinct(model.labels.begin(), model.labels.end());
    if (distinct.size() != model.labels.size())
    {
      fail(ErrorCode::InvalidArgument, "label table has duplicate entries");
    }
  }
  if (model.labels.size() < 2)
  {
    fail(ErrorCode::DegenerateLabels, "one-vs-rest training needs at least two classes");
  }

  model.models.resize(model.labels.size());
  parallel_for(model.labels.size(), opts.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k)
    {
      std::vector<int> y(labels.size());
      for (std::size_t i = 0; i < labels.size(); ++i)
      {
        y[i] = labels[i] == model.labels[k] ? 1 : -1;
      }
      BinaryOptions bo;
      bo.C      = C;
      bo.epochs = opts.epochs;
      bo.seed   = opts.seed + k;
      try
      {
        model.models[k] = train_binary_detailed(data, y, bo).model;
      }
      catch (Error const &e)
      {
        throw e.within("class " + std::to_string(model.labels[k]));
      }
    }
  });
  return model;
}

std::vector<double> decision_values(MulticlassModel const &model, std::span<double const> x)
{
  check_dim(model, x);
  std::vector<double> out(model.classes());
  for (std::size_t k = 0; k < model.classes(); ++k)
  {
    out[k] = model.models[k].decision(x);
  }
  return out;
}

std::size_t predict_index(MulticlassModel const &model, std::span<double const> x)
{
  auto const values = decision_values(model, x);
  if (values.empty())
  {
    fail(ErrorCode::InvalidArgument, "model has no classes");
  }
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

std::uint32_t predict(MulticlassModel const &model, std::span<double const> x)
{
  return model.labels[predict_index(model, x)];
}

double select_c(Matrix const &data, std::span<std::uint32_t const> labels, std::span<double const> grid,
                int folds, OvrOptions const &opts)
{
  if (grid.empty())
  {
    fail(ErrorCode::InvalidArgument, "empty C grid");
  }
  if (grid.size() == 1)
  {
    return grid.front();
  }
  if (folds < 2)
  {
    fail(ErrorCode::InvalidArgument, "cross-validation needs at least two folds");
  }

  std::set<std::uint32_t> const        distinct(labels.begin(), labels.end());
  std::vector<std::uint32_t> const     table(distinct.begin(), distinct.end());
  std::size_t const                    N = data.rows();
  std::vector<std::size_t>             correct(grid.size(), 0);

  for (int f = 0; f < folds; ++f)
  {
    Matrix                     train(0, data.cols());
    std::vector<std::uint32_t> train_labels;
    std::vector<std::size_t>   held;
    for (std::size_t i = 0; i < N; ++i)
    {
      if (static_cast<int>(i % static_cast<std::size_t>(folds)) == f)
      {
        held.push_back(i);
      }
      else
      {
        train.append_row(data.row(i));
        train_labels.push_back(labels[i]);
      }
    }
    std::set<std::uint32_t> const present(train_labels.begin(), train_labels.end());
    if (present.size() < 2 || held.empty())
    {
      continue;
    }
    for (std::size_t g = 0; g < grid.size(); ++g)
    {
      auto const model = train_ovr(train, train_labels, grid[g], {}, opts);
      for (std::size_t i : held)
      {
        correct[g] += predict(model, data.row(i)) == labels[i] ? 1 : 0;
      }
    }
  }
  auto const best = std::max_element(correct.begin(), correct.end());
  return grid[static_cast<std::size_t>(best - correct.begin())];
}

std::vector<std::uint8_t> encode_model(MulticlassModel const &model)
{
  std::size_t const D = model.dim();
  for (auto const &m : model.models)
  {
    if (m.w.size() != D)
    {
      fail(ErrorCode::Dimension, "per-class models disagree on dimension");
    }
  }
  if (model.labels.size() != model.classes())
  {
    fail(ErrorCode::InvalidArgument, "label table size does not match class count");
  }
  ByteWriter w;
  w.bytes("SVMK");
  w.u32(static_cast<std::uint32_t>(model.classes()));
  w.u32(static_cast<std::uint32_t>(D));
  for (auto const &m : model.models)
  {
    for (double v : m.w)
    {
      w.f64(v);
    }
    w.f64(m.b);
  }
  for (auto l : model.labels)
  {
    w.u32(l);
  }
  return w.take();
}

MulticlassModel decode_model(std::span<std::uint8_t const> bytes)
{
  ByteReader r(bytes);
  if (r.bytes(4) != "SVMK")
  {
    fail(ErrorCode::Format, "bad SVM model magic");
  }
  std::size_t const K        = r.u32();
  std::size_t const D        = r.u32();
  std::size_t const expected = 12 + K * (D + 1) * 8 + K * 4;
  if (bytes.size() < expected)
  {
    fail(ErrorCode::Truncated, "SVM model is " + std::to_string(bytes.size()) + " bytes, expected " +
                                   std::to_string(expected));
  }
  if (bytes.size() > expected)
  {
    fail(ErrorCode::Format, "trailing bytes after SVM model payload");
  }
  MulticlassModel model;
  model.models.resize(K);
  for (auto &m : model.models)
  {
    m.w.resize(D);
    for (auto &v : m.w)
    {
      v = r.f64();
    }
    m.b = r.f64();
  }
  model.labels.resize(K);
  for (auto &l : model.labels)
  {
    l = r.u32();
  }
  return model;
}

void save_model(MulticlassModel const &model, std::filesystem::path const &path)
{
  write_file(path, encode_model(model));
}

MulticlassModel load_model(std::filesystem::path const &path)
{
  return decode_model(read_file(path));
}

}  // namespace ensvis::svm
