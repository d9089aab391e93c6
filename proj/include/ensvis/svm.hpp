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
#include <string>
#include <vector>

namespace ensvis::svm {

/// Linear decision function f(x) = w.x + b.
struct LinearModel
{
  std::vector<double> w;
  double              b = 0.0;
  double              C = 1.0;
  std::string         feature_tag;

  double decision(std::span<double const> x) const;

  friend bool operator==(LinearModel const &, LinearModel const &) = default;
};

struct BinaryOptions
{
  double        C         = 1.0;
  int           epochs    = 1000;
  std::uint64_t seed      = 1;
  double        tolerance = 1e-3;  // max projected-gradient spread
};

struct BinaryResult
{
  LinearModel         model;
  std::vector<double> alpha;
  std::vector<double> dual_trace;  // dual objective after each sweep
  int                 epochs_run      = 0;
  double              final_violation = 0.0;
};

/// L1-loss (hinge) SVM by dual coordinate descent. The bias is learned as the
/// weight of an appended constant feature of value 1. `y` holds +1 / -1.
BinaryResult train_binary_detailed(Matrix const &data, std::span<int const> y, BinaryOptions const &opts);

LinearModel train_binary(Matrix const &data, std::span<int const> y, double C, int epochs, std::uint64_t seed);

/// One-vs-rest model; labels[k] is the class reported for row k of `models`.
struct MulticlassModel
{
  std::vector<LinearModel>   models;
  std::vector<std::uint32_t> labels;

  std::size_t classes() const noexcept
  {
    return models.size();
  }
  std::size_t dim() const noexcept
  {
    return models.empty() ? 0 : models.front().w.size();
  }

  friend bool operator==(MulticlassModel const &, MulticlassModel const &) = default;
};

struct OvrOptions
{
  int           epochs  = 1000;
  std::uint64_t seed    = 1;
  unsigned      threads = 1;
};

/// Trains one class-vs-rest model per entry of `label_table`. An empty table
/// means the sorted distinct values of `labels`.
MulticlassModel train_ovr(Matrix const &data, std::span<std::uint32_t const> labels, double C,
                          std::span<std::uint32_t const> label_table = {}, OvrOptions const &opts = {});

std::vector<double> decision_values(MulticlassModel const &model, std::span<double const> x);

/// Index into model.labels of the largest decision value; ties go to the
/// lowest index.
std::size_t predict_index(MulticlassModel const &model, std::span<double const> x);

std::uint32_t predict(MulticlassModel const &model, std::span<double const> x);

/// k-fold cross-validated accuracy for each C of `grid`; returns the C with the
/// best accuracy, preferring the earlier grid entry on ties. Fold of row i is
/// i mod folds.
double select_c(Matrix const &data, std::span<std::uint32_t const> labels, std::span<double const> grid,
                int folds = 3, OvrOptions const &opts = {});

std::vector<std::uint8_t> encode_model(MulticlassModel const &model);
MulticlassModel           decode_model(std::span<std::uint8_t const> bytes);
void                      save_model(MulticlassModel const &model, std::filesystem::path const &path);
MulticlassModel           load_model(std::filesystem::path const &path);

}  // namespace ensvis::svm
