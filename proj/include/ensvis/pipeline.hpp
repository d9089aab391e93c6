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
#include "ensvis/dataset.hpp"
#include "ensvis/ensemble.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ensvis::pipeline {

struct RunConfig
{
  std::filesystem::path                data_dir;
  std::filesystem::path                feat_dir;
  std::filesystem::path                work_dir = "ensvis-work";
  std::optional<std::filesystem::path> ensemble_config;  // sift-fv only when unset

  std::size_t   gmm_components  = 64;
  std::size_t   subset          = 0;  // images per class, 0 = whole split
  std::uint64_t seed            = 1;
  int           upscale         = 2;
  unsigned      threads         = 1;
  int           em_max_iter     = 30;
  std::size_t   gmm_max_samples = 200000;
  int           svm_epochs      = 1000;
  bool          resume          = false;  // skip stages whose outputs exist
};

/// Artifact locations under work_dir.
std::filesystem::path sift_path(RunConfig const &cfg, Split split);
std::filesystem::path fv_path(RunConfig const &cfg, Split split);
std::filesystem::path gmm_path(RunConfig const &cfg);
std::filesystem::path model_dir(RunConfig const &cfg);

ensemble::EnsembleConfig load_run_ensemble(RunConfig const &cfg);

/// Images of one split after the per-class subset is applied.
std::vector<Image> load_split(RunConfig const &cfg, Split split);

/// Feature rows for a split: "sift-fv" from work_dir, deep layers from the
/// registry under feat_dir.
ensemble::FeatureProvider make_provider(RunConfig const &cfg, Split split);

/// Descriptor rows of image i get the id (i << kRowBits) | row.
inline constexpr int kRowBits = 20;

struct ExtractStats
{
  std::size_t images      = 0;
  std::size_t descriptors = 0;
  std::size_t dense       = 0;
};

ExtractStats      extract_sift(RunConfig const &cfg, Split split);
codebook::EmResult train_gmm(RunConfig const &cfg);
std::size_t       encode_fv(RunConfig const &cfg, Split split);

/// Both operate on every configured stream, or on the one named `only`.
void fit_pca(RunConfig const &cfg, std::string const &only = {});
void train_svm(RunConfig const &cfg, std::string const &only = {});

ensemble::EnsembleModel train_ensemble(RunConfig const &cfg);

struct Evaluation
{
  using Confusion = std::array<std::array<std::uint64_t, kCifarClasses>, kCifarClasses>;

  double      accuracy  = 0.0;
  std::size_t correct   = 0;
  std::size_t total     = 0;
  Confusion   confusion = {};  // [truth][predicted]
};

Evaluation evaluate(std::span<std::uint32_t const> preds, std::span<std::uint32_t const> truth);

struct ReportRow
{
  std::string           name;
  std::optional<double> svm;
  std::optional<double> pca_svm;

  friend bool operator==(ReportRow const &, ReportRow const &) = default;
};

struct EvalReport
{
  std::uint64_t          seed = 0;
  std::vector<ReportRow> rows;
  Evaluation             ensemble;

  std::vector<std::pair<std::string, double>> timings;  // seconds, kept out of the text and CSV
};

/// "VGGNet (6)", "AlexNet (457)", "SIFT (FV)" ...
std::string display_name(ensemble::FeatureStream const &stream);

/// Table ordering: single VGGNet layers, single AlexNet layers (deepest
/// first), fused VGGNet, fused AlexNet, other streams, SIFT, then the
/// ensemble rows.
void sort_rows(std::vector<ReportRow> &rows);

/// Adds an accuracy to the row named `name`, creating it when needed.
void record(EvalReport &report, std::string const &name, bool reduced, double accuracy);

std::string render_text(EvalReport const &report);
std::string render_csv(EvalReport const &report);
EvalReport  parse_csv(std::string_view text);

/// Writes report.txt and report.csv into `dir`.
void emit_report(EvalReport const &report, std::filesystem::path const &dir);

/// Classifies the test split and writes report.txt, report.csv and votes.csv.
EvalReport evaluate_stage(RunConfig const &cfg);

/// Re-renders report.txt from report.csv.
std::string report_stage(RunConfig const &cfg);

EvalReport run_pipeline(RunConfig const &cfg);

}  // namespace ensvis::pipeline
