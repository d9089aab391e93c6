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

#include "ensvis/featstore.hpp"
#include "ensvis/matrix.hpp"
#include "ensvis/pca.hpp"
#include "ensvis/svm.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ensvis::ensemble {

enum class StreamKind
{
  SiftFv,
  Deep,
  Fused,
};

enum class TiePolicy
{
  LowestIndex,
  MaxConfidenceSum,
};

std::string_view to_string(TiePolicy policy) noexcept;
TiePolicy        parse_tie_policy(std::string_view text);

/// Source key under which Fisher vectors of SIFT descriptors are stored.
inline featstore::LayerKey const kSiftFvKey{"sift-fv", 0};

struct FeatureStream
{
  std::string                      name;
  StreamKind                       kind = StreamKind::SiftFv;
  std::vector<featstore::LayerKey> layers;      // Deep: one; Fused: several; SiftFv: none
  std::size_t                      pca_target = 0;  // 0 disables reduction
  bool                             votes      = true;
  std::size_t                      raw_dim    = 0;  // fixed at training time
  std::optional<pca::PcaModel>     pca;

  /// Layers this stream reads, in concatenation order.
  std::vector<featstore::LayerKey> sources() const;

  /// "sift-fv", "deep:vgg16:6" or "fused:vgg16:5,vgg16:6,vgg16:7".
  std::string source_text() const;
};

struct EnsembleConfig
{
  std::vector<FeatureStream> streams;
  TiePolicy                  tie_policy = TiePolicy::MaxConfidenceSum;
  std::vector<double>        c_grid     = {0.01, 0.1, 1.0, 10.0};
};

/// Line-oriented `key = value` text:
///
///   tie_policy = max-confidence-sum | lowest-index
///   c_grid     = 0.01, 0.1, 1, 10
///   stream     = <name> <source> [pca=<q>] [vote=no]
///
/// `#` starts a comment. Fused streams require pca=<q>.
EnsembleConfig parse_config(std::string_view text);
EnsembleConfig load_config(std::filesystem::path const &path);
EnsembleConfig default_config();
std::string    format_config(EnsembleConfig const &config);

struct EnsembleMember
{
  FeatureStream        stream;
  svm::MulticlassModel classifier;
  double               C = 1.0;
};

struct EnsembleModel
{
  std::vector<EnsembleMember> members;
  std::vector<std::uint32_t>  labels;
  TiePolicy                   tie_break = TiePolicy::MaxConfidenceSum;
};

/// Returns the rows of one source layer for `ids`, in the same order.
using FeatureProvider =
    std::function<Matrix(featstore::LayerKey const &key, std::span<std::uint64_t const> ids)>;

void                l2_normalize(std::span<double> v);
void                l2_normalize_rows(Matrix &m);

/// Raw stream features: the single source for SiftFv / Deep, or the
/// concatenation of per-layer L2-normalized blocks for Fused.
Matrix assemble_raw(FeatureStream const &stream, FeatureProvider const &provider,
                    std::span<std::uint64_t const> ids);

/// PCA projection (when the stream has one) followed by L2 normalization.
std::vector<double> prepare(FeatureStream const &stream, std::span<double const> raw);

struct TrainOptions
{
  std::vector<double> c_grid   = {1.0};
  int                 cv_folds = 3;
  svm::OvrOptions     ovr;
};

EnsembleMember train_member(FeatureStream stream, FeatureProvider const &provider,
                            std::span<std::uint64_t const> ids, std::span<std::uint32_t const> labels,
                            std::span<std::uint32_t const> label_table, TrainOptions const &opts);

EnsembleModel train_ensemble(EnsembleConfig const &config, FeatureProvider const &provider,
                             std::span<std::uint64_t const> ids, std::span<std::uint32_t const> labels,
                             TrainOptions const &opts);

/// Hard majority vote. `votes[c]` is the class index chosen by member c and
/// row c of `confidences` holds that member's decision values (members x K).
/// Ties on the vote count go, under MaxConfidenceSum, to the largest summed
/// decision value over all members, and otherwise (or on equal sums) to the
/// lowest class index. Confidences may be empty under LowestIndex.
std::size_t majority_vote(std::span<std::size_t const> votes, Matrix const &confidences,
                          std::size_t num_classes, TiePolicy policy);

struct MemberOutput
{
  std::size_t         vote = 0;
  std::vector<double> decision;
};

/// Raw feature vector per stream name.
using StreamInputs = std::map<std::string, std::vector<double>>;

std::vector<MemberOutput> member_outputs(EnsembleModel const &model, StreamInputs const &inputs);

/// Only voting members take part. Returns an index into model.labels.
std::size_t vote_index(EnsembleModel const &model, std::span<MemberOutput const> outputs);

std::uint32_t predict_ensemble(EnsembleModel const &model, StreamInputs const &inputs);

/// Manifest line for one member, as stored in `manifest.txt` and `<name>.member`.
std::string format_member_line(EnsembleMember const &member);

void save_member(EnsembleMember const &member, std::filesystem::path const &dir);
EnsembleMember load_member(std::filesystem::path const &dir, std::string const &name);

void          save_ensemble(EnsembleModel const &model, std::filesystem::path const &dir);
EnsembleModel load_ensemble(std::filesystem::path const &dir);

}  // namespace ensvis::ensemble
