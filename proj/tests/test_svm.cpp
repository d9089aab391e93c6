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
#include "ensvis/svm.hpp"

#include "gtest/gtest.h"

#include <algorithm>
#include <cmath>
#include <random>

namespace {

using namespace ensvis;

// Two clouds separated by a slab of width 2 around x0 = 0.
void gap_clouds(std::size_t per_class, std::uint64_t seed, Matrix &data, std::vector<int> &y)
{
  std::mt19937_64                        rng(seed);
  std::uniform_real_distribution<double> spread(0.0, 3.0);
  std::normal_distribution<double>       z(0.0, 1.0);
  data = Matrix(0, 3);
  y.clear();
  for (std::size_t i = 0; i < 2 * per_class; ++i)
  {
    int const           label = i % 2 == 0 ? 1 : -1;
    std::vector<double> x     = {label * (1.0 + spread(rng)), z(rng), z(rng)};
    data.append_row(x);
    y.push_back(label);
  }
}

void overlapping(std::size_t n, std::uint64_t seed, Matrix &data, std::vector<int> &y)
{
  std::mt19937_64                  rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  data = Matrix(0, 4);
  y.clear();
  for (std::size_t i = 0; i < n; ++i)
  {
    int const           label = i % 2 == 0 ? 1 : -1;
    std::vector<double> x     = {label * 0.7 + z(rng), z(rng), label * 0.3 + z(rng), z(rng)};
    data.append_row(x);
    y.push_back(label);
  }
}

TEST(SvmTest, SeparableDataIsFitExactly)
{
  Matrix           data;
  std::vector<int> y;
  gap_clouds(50, 1, data, y);
  auto const model = svm::train_binary(data, y, 100.0, 1000, 1);
  for (std::size_t i = 0; i < data.rows(); ++i)
  {
    double const margin = y[i] * model.decision(data.row(i));
    EXPECT_GT(margin, 0.0);
    EXPECT_GE(margin, 1.0 - 1e-2);
  }
}

TEST(SvmTest, FlippingLabelsNegatesModel)
{
  Matrix           data;
  std::vector<int> y;
  overlapping(80, 2, data, y);
  auto const a = svm::train_binary(data, y, 1.0, 200, 9);
  for (auto &v : y)
  {
    v = -v;
  }
  auto const b = svm::train_binary(data, y, 1.0, 200, 9);
  for (std::size_t d = 0; d < a.w.size(); ++d)
  {
    EXPECT_NEAR(a.w[d], -b.w[d], 1e-6);
  }
  EXPECT_NEAR(a.b, -b.b, 1e-6);
}

TEST(SvmTest, DualObjectiveNeverDecreases)
{
  Matrix           data;
  std::vector<int> y;
  overlapping(120, 3, data, y);
  svm::BinaryOptions opts;
  opts.C         = 0.5;
  opts.tolerance = 1e-9;
  opts.epochs    = 300;
  auto const res = svm::train_binary_detailed(data, y, opts);
  ASSERT_GE(res.dual_trace.size(), 2u);
  for (std::size_t i = 1; i < res.dual_trace.size(); ++i)
  {
    EXPECT_GE(res.dual_trace[i], res.dual_trace[i - 1] - 1e-10 * std::max(1.0, std::abs(res.dual_trace[i])));
  }
}

TEST(SvmTest, SolutionSatisfiesKktConditions)
{
  Matrix           data;
  std::vector<int> y;
  overlapping(150, 4, data, y);
  svm::BinaryOptions opts;
  opts.C         = 2.0;
  opts.tolerance = 1e-4;
  opts.epochs    = 20000;
  auto const res = svm::train_binary_detailed(data, y, opts);
  ASSERT_LT(res.final_violation, opts.tolerance);
  double const tol = 1e-3;
  for (std::size_t i = 0; i < data.rows(); ++i)
  {
    double const a  = res.alpha[i];
    double const yf = y[i] * res.model.decision(data.row(i));
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, opts.C);
    if (a == 0.0)
    {
      EXPECT_GE(yf, 1.0 - tol);
    }
    else if (a == opts.C)
    {
      EXPECT_LE(yf, 1.0 + tol);
    }
    else
    {
      EXPECT_NEAR(yf, 1.0, tol);
    }
  }
  // w = sum alpha_i y_i x_i and b = sum alpha_i y_i.
  std::vector<double> w(data.cols(), 0.0);
  double              b = 0.0;
  for (std::size_t i = 0; i < data.rows(); ++i)
  {
    for (std::size_t d = 0; d < data.cols(); ++d)
    {
      w[d] += res.alpha[i] * y[i] * data(i, d);
    }
    b += res.alpha[i] * y[i];
  }
  for (std::size_t d = 0; d < w.size(); ++d)
  {
    EXPECT_NEAR(w[d], res.model.w[d], 1e-9);
  }
  EXPECT_NEAR(b, res.model.b, 1e-9);
}

TEST(SvmTest, DeterministicForSeed)
{
  Matrix           data;
  std::vector<int> y;
  overlapping(60, 5, data, y);
  EXPECT_EQ(svm::train_binary(data, y, 1.0, 100, 4), svm::train_binary(data, y, 1.0, 100, 4));
}

TEST(SvmTest, InvalidBinaryInputs)
{
  Matrix           data(4, 2, 1.0);
  std::vector<int> same = {1, 1, 1, 1};
  try
  {
    svm::train_binary(data, same, 1.0, 10, 1);
    FAIL();
  }
  catch (Error const &e)
  {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateLabels);
  }
  std::vector<int> bad = {1, -1, 0, 1};
  EXPECT_THROW(svm::train_binary(data, bad, 1.0, 10, 1), Error);
  std::vector<int> ok = {1, -1, 1, -1};
  EXPECT_THROW(svm::train_binary(data, ok, 0.0, 10, 1), Error);
}

Matrix three_clouds(std::vector<std::uint32_t> &labels)
{
  std::mt19937_64 rng(6);
  Matrix          data;
  labels.clear();
  std::vector<std::vector<double>> const centres = {{5.0, 0.0}, {-5.0, 5.0}, {-5.0, -5.0}};
  for (std::size_t i = 0; i < 90; ++i)
  {
    auto const rows = fixtures::gaussian_rows(1, centres[i % 3], 0.7, rng);
    data.append_row(rows.row(0));
    labels.push_back(static_cast<std::uint32_t>(2 * (i % 3) + 1));
  }
  return data;
}

TEST(SvmTest, OneVsRestSeparatesThreeClasses)
{
  std::vector<std::uint32_t> labels;
  auto const                 data  = three_clouds(labels);
  auto const                 model = svm::train_ovr(data, labels, 1.0);
  EXPECT_EQ(model.labels, (std::vector<std::uint32_t>{1, 3, 5}));
  for (std::size_t i = 0; i < data.rows(); ++i)
  {
    EXPECT_EQ(svm::predict(model, data.row(i)), labels[i]);
  }
  svm::OvrOptions threaded;
  threaded.threads = 3;
  EXPECT_EQ(model, svm::train_ovr(data, labels, 1.0, {}, threaded));
}

TEST(SvmTest, MissingClassInLabelTable)
{
  std::vector<std::uint32_t> labels;
  auto const                 data  = three_clouds(labels);
  std::vector<std::uint32_t> table = {1, 3, 5, 7};
  try
  {
    svm::train_ovr(data, labels, 1.0, table);
    FAIL();
  }
  catch (Error const &e)
  {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateLabels);
    EXPECT_NE(std::string(e.what()).find("class 7"), std::string::npos);
  }
  std::vector<std::uint32_t> one = {1, 1, 1};
  EXPECT_THROW(svm::train_ovr(Matrix(3, 2, 0.0), one, 1.0), Error);
}

TEST(SvmTest, DecisionValuesAreAffine)
{
  std::vector<std::uint32_t> labels;
  auto const                 data  = three_clouds(labels);
  auto const                 model = svm::train_ovr(data, labels, 1.0);
  std::vector<double>        x     = {0.3, -1.2};
  std::vector<double>        u     = {2.0, 0.5};
  std::vector<double>        mix(2);
  double const               t = 0.25;
  for (std::size_t d = 0; d < 2; ++d)
  {
    mix[d] = t * x[d] + (1 - t) * u[d];
  }
  auto const fx = svm::decision_values(model, x);
  auto const fu = svm::decision_values(model, u);
  auto const fm = svm::decision_values(model, mix);
  for (std::size_t k = 0; k < 3; ++k)
  {
    EXPECT_NEAR(fm[k], t * fx[k] + (1 - t) * fu[k], 1e-12);
  }
  std::vector<double> wrong = {1.0};
  EXPECT_THROW(svm::decision_values(model, wrong), Error);
}

TEST(SvmTest, PredictionTiesGoToLowestIndex)
{
  svm::MulticlassModel model;
  model.labels = {4, 2, 9};
  for (int k = 0; k < 3; ++k)
  {
    svm::LinearModel m;
    m.w = {1.0, 0.0};
    m.b = k == 0 ? -1.0 : 0.5;
    model.models.push_back(m);
  }
  std::vector<double> x = {0.0, 0.0};
  EXPECT_EQ(svm::predict_index(model, x), 1u);
  EXPECT_EQ(svm::predict(model, x), 2u);
}

TEST(SvmTest, SelectCPrefersEarlierGridEntryOnTies)
{
  std::vector<std::uint32_t> labels;
  auto const                 data = three_clouds(labels);
  std::vector<double>        grid = {0.1, 1.0, 10.0};
  EXPECT_EQ(svm::select_c(data, labels, grid), 0.1);
  std::vector<double> single = {3.0};
  EXPECT_EQ(svm::select_c(data, labels, single), 3.0);
  EXPECT_THROW(svm::select_c(data, labels, std::span<double const>{}), Error);
}

TEST(SvmTest, SelectCPicksBestCrossValidatedValue)
{
  // Tiny C underfits badly on these overlapping clouds.
  Matrix           data;
  std::vector<int> y;
  overlapping(300, 7, data, y);
  for (std::size_t i = 0; i < data.rows(); ++i)
  {
    data(i, 0) *= 1e-3;
    data(i, 2) *= 1e-3;
  }
  std::vector<std::uint32_t> labels;
  for (int v : y)
  {
    labels.push_back(v > 0 ? 1u : 0u);
  }
  std::vector<double> grid = {1e-6, 1e4};
  EXPECT_EQ(svm::select_c(data, labels, grid), 1e4);
}

TEST(SvmTest, ModelFileRoundtrip)
{
  std::vector<std::uint32_t> labels;
  auto const                 data  = three_clouds(labels);
  auto const                 model = svm::train_ovr(data, labels, 1.0);
  auto const                 bytes = svm::encode_model(model);
  EXPECT_EQ(bytes.size(), 12u + 3u * 3u * 8u + 3u * 4u);
  auto const back = svm::decode_model(bytes);
  EXPECT_EQ(back.labels, model.labels);
  for (std::size_t k = 0; k < 3; ++k)
  {
    EXPECT_EQ(back.models[k].w, model.models[k].w);
    EXPECT_EQ(back.models[k].b, model.models[k].b);
  }
  auto cut = bytes;
  cut.pop_back();
  try
  {
    svm::decode_model(cut);
    FAIL();
  }
  catch (Error const &e)
  {
    EXPECT_EQ(e.code(), ErrorCode::Truncated);
  }
  auto extra = bytes;
  extra.push_back(1);
  try
  {
    svm::decode_model(extra);
    FAIL();
  }
  catch (Error const &e)
  {
    EXPECT_EQ(e.code(), ErrorCode::Format);
  }
}

}  // namespace
