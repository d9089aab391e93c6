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

#include "ensvis/ensvis.h"

#include "ensvis/codebook.hpp"
#include "ensvis/ensemble.hpp"
#include "ensvis/error.hpp"
#include "ensvis/featstore.hpp"
#include "ensvis/fisher.hpp"
#include "ensvis/pipeline.hpp"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

struct ensvis_gmm
{
  ensvis::codebook::GmmParams params;
};

struct ensvis_ensemble
{
  ensvis::ensemble::EnsembleModel model;
};

namespace {

thread_local std::string last_error;

template <typename Fn>
ensvis_status guard(Fn &&fn) noexcept
{
  try
  {
    fn();
    last_error.clear();
    return ENSVIS_OK;
  }
  catch (ensvis::Error const &e)
  {
    last_error = e.what();
    return static_cast<ensvis_status>(e.code());
  }
  catch (std::bad_alloc const &)
  {
    last_error = "internal: out of memory";
  }
  catch (std::exception const &e)
  {
    last_error = std::string("internal: ") + e.what();
  }
  catch (...)
  {
    last_error = "internal: unknown exception";
  }
  return ENSVIS_ERR_INTERNAL;
}

void require(bool cond, char const *what)
{
  if (!cond)
  {
    ensvis::fail(ensvis::ErrorCode::InvalidArgument, what);
  }
}

char *dup_string(std::string const &s)
{
  auto *out = static_cast<char *>(std::malloc(s.size() + 1));
  if (out == nullptr)
  {
    throw std::bad_alloc();
  }
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

ensvis::Matrix copy_matrix(double const *data, std::size_t rows, std::size_t cols)
{
  require(data != nullptr || rows * cols == 0, "null matrix data");
  ensvis::Matrix m(rows, cols);
  if (rows * cols > 0)
  {
    std::memcpy(m.data().data(), data, rows * cols * sizeof(double));
  }
  return m;
}

ensvis::Split to_split(ensvis_split split)
{
  require(split == ENSVIS_SPLIT_TRAIN || split == ENSVIS_SPLIT_TEST, "unknown split");
  return split == ENSVIS_SPLIT_TRAIN ? ensvis::Split::Train : ensvis::Split::Test;
}

ensvis::pipeline::RunConfig to_config(ensvis_run_config const *c)
{
  require(c != nullptr, "null run config");
  ensvis::pipeline::RunConfig cfg;
  if (c->data_dir != nullptr)
  {
    cfg.data_dir = c->data_dir;
  }
  if (c->feat_dir != nullptr)
  {
    cfg.feat_dir = c->feat_dir;
  }
  if (c->work_dir != nullptr)
  {
    cfg.work_dir = c->work_dir;
  }
  if (c->ensemble_config != nullptr && *c->ensemble_config != '\0')
  {
    cfg.ensemble_config = c->ensemble_config;
  }
  require(c->gmm_components > 0, "gmm_components must be positive");
  require(c->threads > 0, "threads must be positive");
  require(c->em_max_iter > 0, "em_max_iter must be positive");
  require(c->svm_epochs > 0, "svm_epochs must be positive");
  cfg.gmm_components  = c->gmm_components;
  cfg.subset          = c->subset;
  cfg.seed            = c->seed;
  cfg.upscale         = c->upscale;
  cfg.threads         = c->threads;
  cfg.em_max_iter     = c->em_max_iter;
  cfg.gmm_max_samples = c->gmm_max_samples;
  cfg.svm_epochs      = c->svm_epochs;
  cfg.resume          = c->resume != 0;
  return cfg;
}

std::string stream_arg(char const *stream)
{
  return stream == nullptr ? std::string() : std::string(stream);
}

}  // namespace

extern "C" {

char const *ensvis_version(void)
{
  return "0.1.0";
}

char const *ensvis_status_name(ensvis_status status)
{
  if (status == ENSVIS_OK)
  {
    return "ok";
  }
  return ensvis::to_string(static_cast<ensvis::ErrorCode>(status));
}

char const *ensvis_last_error(void)
{
  return last_error.c_str();
}

void ensvis_string_free(char *s)
{
  std::free(s);
}

ensvis_status ensvis_gmm_load(char const *path, ensvis_gmm **out)
{
  return guard([&] {
    require(path != nullptr && out != nullptr, "null argument");
    *out = new ensvis_gmm{ensvis::codebook::load_gmm(path)};
  });
}

void ensvis_gmm_free(ensvis_gmm *gmm)
{
  delete gmm;
}

ensvis_status ensvis_gmm_shape(ensvis_gmm const *gmm, size_t *components, size_t *dim)
{
  return guard([&] {
    require(gmm != nullptr, "null codebook");
    if (components != nullptr)
    {
      *components = gmm->params.components();
    }
    if (dim != nullptr)
    {
      *dim = gmm->params.dim();
    }
  });
}

ensvis_status ensvis_gmm_log_likelihood(ensvis_gmm const *gmm, double const *data, size_t rows, size_t cols,
                                        double *out)
{
  return guard([&] {
    require(gmm != nullptr && out != nullptr, "null argument");
    require(cols == gmm->params.dim(), "column count differs from codebook dimension");
    *out = ensvis::codebook::log_likelihood(gmm->params, copy_matrix(data, rows, cols));
  });
}

ensvis_status ensvis_fisher_encode(ensvis_gmm const *gmm, double const *descriptors, size_t rows, size_t cols,
                                   double *out, size_t out_len)
{
  return guard([&] {
    require(gmm != nullptr && out != nullptr, "null argument");
    auto const fv = ensvis::fisher::encode_normalized(gmm->params, copy_matrix(descriptors, rows, cols));
    require(out_len == fv.values.size(), "output length must be 2*K*D");
    std::memcpy(out, fv.values.data(), out_len * sizeof(double));
  });
}

ensvis_status ensvis_features_info(char const *path, ensvis_feature_info *out)
{
  return guard([&] {
    require(path != nullptr && out != nullptr, "null argument");
    auto const ff = ensvis::featstore::read_features(path);
    std::memset(out, 0, sizeof *out);
    std::memcpy(out->model, ff.model_name.data(), std::min<std::size_t>(ff.model_name.size(), 255));
    out->layer = ff.layer_id;
    out->dim   = ff.dim;
    out->count = ff.count();
  });
}

ensvis_status ensvis_validate_registry(char const *dir, int *ok, char **report)
{
  return guard([&] {
    require(dir != nullptr, "null directory");
    auto const rep = ensvis::featstore::validate_registry(ensvis::featstore::FeatureRegistry::scan(dir));
    if (ok != nullptr)
    {
      *ok = rep.ok() ? 1 : 0;
    }
    if (report != nullptr)
    {
      *report = dup_string(rep.to_text());
    }
  });
}

ensvis_status ensvis_majority_vote(size_t const *votes, double const *confidences, size_t members,
                                   size_t classes, ensvis_tie_policy policy, size_t *out)
{
  return guard([&] {
    require(out != nullptr && (votes != nullptr || members == 0), "null argument");
    require(policy == ENSVIS_TIE_LOWEST_INDEX || policy == ENSVIS_TIE_MAX_CONFIDENCE_SUM, "unknown tie policy");
    auto const tie = policy == ENSVIS_TIE_LOWEST_INDEX ? ensvis::ensemble::TiePolicy::LowestIndex
                                                       : ensvis::ensemble::TiePolicy::MaxConfidenceSum;
    ensvis::Matrix conf;
    if (confidences != nullptr)
    {
      conf = copy_matrix(confidences, members, classes);
    }
    *out = ensvis::ensemble::majority_vote({votes, members}, conf, classes, tie);
  });
}

ensvis_status ensvis_ensemble_load(char const *dir, ensvis_ensemble **out)
{
  return guard([&] {
    require(dir != nullptr && out != nullptr, "null argument");
    *out = new ensvis_ensemble{ensvis::ensemble::load_ensemble(dir)};
  });
}

void ensvis_ensemble_free(ensvis_ensemble *ens)
{
  delete ens;
}

size_t ensvis_ensemble_members(ensvis_ensemble const *ens)
{
  return ens == nullptr ? 0 : ens->model.members.size();
}

char const *ensvis_ensemble_member_name(ensvis_ensemble const *ens, size_t member)
{
  if (ens == nullptr || member >= ens->model.members.size())
  {
    return nullptr;
  }
  return ens->model.members[member].stream.name.c_str();
}

size_t ensvis_ensemble_member_dim(ensvis_ensemble const *ens, size_t member)
{
  if (ens == nullptr || member >= ens->model.members.size())
  {
    return 0;
  }
  return ens->model.members[member].stream.raw_dim;
}

ensvis_status ensvis_ensemble_predict(ensvis_ensemble const *ens, double const *const *inputs, size_t const *dims,
                                      uint32_t *label)
{
  return guard([&] {
    require(ens != nullptr && inputs != nullptr && dims != nullptr && label != nullptr, "null argument");
    ensvis::ensemble::StreamInputs in;
    for (std::size_t m = 0; m < ens->model.members.size(); ++m)
    {
      require(inputs[m] != nullptr || dims[m] == 0, "null member input");
      in[ens->model.members[m].stream.name].assign(inputs[m], inputs[m] + dims[m]);
    }
    *label = ensvis::ensemble::predict_ensemble(ens->model, in);
  });
}

void ensvis_run_config_init(ensvis_run_config *cfg)
{
  if (cfg == nullptr)
  {
    return;
  }
  ensvis::pipeline::RunConfig const defaults;
  std::memset(cfg, 0, sizeof *cfg);
  cfg->work_dir        = "ensvis-work";
  cfg->gmm_components  = defaults.gmm_components;
  cfg->subset          = defaults.subset;
  cfg->seed            = defaults.seed;
  cfg->upscale         = defaults.upscale;
  cfg->threads         = defaults.threads;
  cfg->em_max_iter     = defaults.em_max_iter;
  cfg->gmm_max_samples = defaults.gmm_max_samples;
  cfg->svm_epochs      = defaults.svm_epochs;
  cfg->resume          = 0;
}

ensvis_status ensvis_extract_sift(ensvis_run_config const *cfg, ensvis_split split, size_t *images,
                                  size_t *descriptors, size_t *dense)
{
  return guard([&] {
    auto const stats = ensvis::pipeline::extract_sift(to_config(cfg), to_split(split));
    if (images != nullptr)
    {
      *images = stats.images;
    }
    if (descriptors != nullptr)
    {
      *descriptors = stats.descriptors;
    }
    if (dense != nullptr)
    {
      *dense = stats.dense;
    }
  });
}

ensvis_status ensvis_train_gmm(ensvis_run_config const *cfg, int *iterations, double *final_mean_ll)
{
  return guard([&] {
    auto const result = ensvis::pipeline::train_gmm(to_config(cfg));
    if (iterations != nullptr)
    {
      *iterations = result.iterations;
    }
    if (final_mean_ll != nullptr)
    {
      *final_mean_ll = result.trace.empty() ? 0.0 : result.trace.back();
    }
  });
}

ensvis_status ensvis_encode_fv(ensvis_run_config const *cfg, ensvis_split split, size_t *count)
{
  return guard([&] {
    auto const n = ensvis::pipeline::encode_fv(to_config(cfg), to_split(split));
    if (count != nullptr)
    {
      *count = n;
    }
  });
}

ensvis_status ensvis_fit_pca(ensvis_run_config const *cfg, char const *stream)
{
  return guard([&] { ensvis::pipeline::fit_pca(to_config(cfg), stream_arg(stream)); });
}

ensvis_status ensvis_train_svm(ensvis_run_config const *cfg, char const *stream)
{
  return guard([&] { ensvis::pipeline::train_svm(to_config(cfg), stream_arg(stream)); });
}

ensvis_status ensvis_train_ensemble(ensvis_run_config const *cfg)
{
  return guard([&] { ensvis::pipeline::train_ensemble(to_config(cfg)); });
}

ensvis_status ensvis_evaluate(ensvis_run_config const *cfg, char **report)
{
  return guard([&] {
    auto const rep = ensvis::pipeline::evaluate_stage(to_config(cfg));
    if (report != nullptr)
    {
      *report = dup_string(ensvis::pipeline::render_text(rep));
    }
  });
}

ensvis_status ensvis_report(ensvis_run_config const *cfg, char **report)
{
  return guard([&] {
    auto const text = ensvis::pipeline::report_stage(to_config(cfg));
    if (report != nullptr)
    {
      *report = dup_string(text);
    }
  });
}

ensvis_status ensvis_run_pipeline(ensvis_run_config const *cfg, char **report)
{
  return guard([&] {
    auto const rep = ensvis::pipeline::run_pipeline(to_config(cfg));
    if (report != nullptr)
    {
      *report = dup_string(ensvis::pipeline::render_text(rep));
    }
  });
}

}  // extern "C"
