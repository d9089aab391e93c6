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

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <optional>
#include <string>
#include <vector>

namespace {

struct Options
{
  std::string data_dir;
  std::string feat_dir;
  std::string work_dir = "ensvis-work";
  std::string config;
  std::size_t gmm_size        = 64;
  std::size_t subset          = 0;
  std::uint64_t seed          = 1;
  unsigned    threads         = 1;
  int         upscale         = 2;
  int         em_iter         = 30;
  std::size_t gmm_samples     = 200000;
  int         svm_epochs      = 1000;
  bool        resume          = false;
  std::string split;
  std::string stream;
};

std::string resolve(std::string const &flag, char const *env, char const *fallback)
{
  if (!flag.empty())
  {
    return flag;
  }
  if (char const *v = std::getenv(env); v != nullptr && *v != '\0')
  {
    return v;
  }
  return fallback;
}

int report_failure(char const *command, ensvis_status status)
{
  std::fprintf(stderr, "ensvis %s failed: %s\n", command, ensvis_last_error());
  return static_cast<int>(status);
}

void print_and_free(char *text)
{
  if (text != nullptr)
  {
    std::fputs(text, stdout);
    ensvis_string_free(text);
  }
}

std::vector<ensvis_split> splits_of(std::string const &split)
{
  if (split == "train")
  {
    return {ENSVIS_SPLIT_TRAIN};
  }
  if (split == "test")
  {
    return {ENSVIS_SPLIT_TEST};
  }
  return {ENSVIS_SPLIT_TRAIN, ENSVIS_SPLIT_TEST};
}

char const *split_name(ensvis_split split)
{
  return split == ENSVIS_SPLIT_TRAIN ? "train" : "test";
}

}  // namespace

int main(int argc, char **argv)
{
  CLI::App app{"Ensemble image classification with SIFT Fisher vectors and deep features"};
  app.require_subcommand(1);
  app.fallthrough();

  Options o;
  app.add_option("--data-dir", o.data_dir, "CIFAR-10 binary directory (env ENSVIS_DATA_DIR)");
  app.add_option("--feat-dir", o.feat_dir, "Directory of .dfv deep features (env ENSVIS_FEAT_DIR)");
  app.add_option("--work-dir", o.work_dir, "Directory for cached stage outputs")->capture_default_str();
  app.add_option("--config", o.config, "Ensemble config file (default: SIFT Fisher vectors only)");
  app.add_option("--gmm-size", o.gmm_size, "Number of GMM components")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--subset", o.subset, "Images per class, 0 for the whole split")->capture_default_str();
  app.add_option("--seed", o.seed, "Random seed")->capture_default_str();
  app.add_option("--threads", o.threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--upscale", o.upscale, "Upsampling factor before SIFT")->capture_default_str()->check(CLI::IsMember({1, 2, 4}));
  app.add_option("--em-iter", o.em_iter, "Maximum EM iterations")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--gmm-samples", o.gmm_samples, "Descriptors sampled for GMM training")->capture_default_str();
  app.add_option("--svm-epochs", o.svm_epochs, "Maximum SVM epochs")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_flag("--resume", o.resume, "Reuse cached stage outputs in run");

  auto *extract  = app.add_subcommand("extract-sift", "Extract SIFT descriptors");
  auto *gmm      = app.add_subcommand("train-gmm", "Train the GMM codebook on training descriptors");
  auto *encode   = app.add_subcommand("encode-fv", "Encode Fisher vectors");
  auto *pca      = app.add_subcommand("fit-pca", "Fit PCA for streams with a target dimension");
  auto *svm      = app.add_subcommand("train-svm", "Train one-vs-rest SVMs per stream");
  auto *ens      = app.add_subcommand("train-ensemble", "Assemble trained members into an ensemble");
  auto *eval     = app.add_subcommand("evaluate", "Classify the test split and write reports");
  auto *report   = app.add_subcommand("report", "Re-render report.txt from report.csv");
  auto *run      = app.add_subcommand("run", "Run every stage");
  auto *registry = app.add_subcommand("validate-registry", "Check feature files under the feature directory");

  for (auto *sub : {extract, encode})
  {
    sub->add_option("--split", o.split, "train or test (default both)")->check(CLI::IsMember({"train", "test"}));
  }
  for (auto *sub : {pca, svm})
  {
    sub->add_option("--stream", o.stream, "Only this stream");
  }

  CLI11_PARSE(app, argc, argv);

  std::string const data_dir = resolve(o.data_dir, "ENSVIS_DATA_DIR", "data/cifar-10-batches-bin");
  std::string const feat_dir = resolve(o.feat_dir, "ENSVIS_FEAT_DIR", "features");

  ensvis_run_config cfg;
  ensvis_run_config_init(&cfg);
  cfg.data_dir        = data_dir.c_str();
  cfg.feat_dir        = feat_dir.c_str();
  cfg.work_dir        = o.work_dir.c_str();
  cfg.ensemble_config = o.config.empty() ? nullptr : o.config.c_str();
  cfg.gmm_components  = o.gmm_size;
  cfg.subset          = o.subset;
  cfg.seed            = o.seed;
  cfg.threads         = o.threads;
  cfg.upscale         = o.upscale;
  cfg.em_max_iter     = o.em_iter;
  cfg.gmm_max_samples = o.gmm_samples;
  cfg.svm_epochs      = o.svm_epochs;
  cfg.resume          = o.resume ? 1 : 0;

  char const *stream = o.stream.empty() ? nullptr : o.stream.c_str();
  char       *text   = nullptr;

  if (extract->parsed())
  {
    for (auto split : splits_of(o.split))
    {
      std::size_t images = 0, descriptors = 0, dense = 0;
      if (auto st = ensvis_extract_sift(&cfg, split, &images, &descriptors, &dense); st != ENSVIS_OK)
      {
        return report_failure("extract-sift", st);
      }
      std::printf("%s: %zu images, %zu descriptors, %zu dense fallbacks\n", split_name(split), images,
                  descriptors, dense);
    }
  }
  else if (gmm->parsed())
  {
    int    iterations = 0;
    double ll         = 0.0;
    if (auto st = ensvis_train_gmm(&cfg, &iterations, &ll); st != ENSVIS_OK)
    {
      return report_failure("train-gmm", st);
    }
    std::printf("EM iterations: %d, mean log-likelihood: %.6f\n", iterations, ll);
  }
  else if (encode->parsed())
  {
    for (auto split : splits_of(o.split))
    {
      std::size_t count = 0;
      if (auto st = ensvis_encode_fv(&cfg, split, &count); st != ENSVIS_OK)
      {
        return report_failure("encode-fv", st);
      }
      std::printf("%s: %zu Fisher vectors\n", split_name(split), count);
    }
  }
  else if (pca->parsed())
  {
    if (auto st = ensvis_fit_pca(&cfg, stream); st != ENSVIS_OK)
    {
      return report_failure("fit-pca", st);
    }
  }
  else if (svm->parsed())
  {
    if (auto st = ensvis_train_svm(&cfg, stream); st != ENSVIS_OK)
    {
      return report_failure("train-svm", st);
    }
  }
  else if (ens->parsed())
  {
    if (auto st = ensvis_train_ensemble(&cfg); st != ENSVIS_OK)
    {
      return report_failure("train-ensemble", st);
    }
  }
  else if (eval->parsed())
  {
    if (auto st = ensvis_evaluate(&cfg, &text); st != ENSVIS_OK)
    {
      return report_failure("evaluate", st);
    }
    print_and_free(text);
  }
  else if (report->parsed())
  {
    if (auto st = ensvis_report(&cfg, &text); st != ENSVIS_OK)
    {
      return report_failure("report", st);
    }
    print_and_free(text);
  }
  else if (run->parsed())
  {
    if (auto st = ensvis_run_pipeline(&cfg, &text); st != ENSVIS_OK)
    {
      return report_failure("run", st);
    }
    print_and_free(text);
  }
  else if (registry->parsed())
  {
    int ok = 0;
    if (auto st = ensvis_validate_registry(feat_dir.c_str(), &ok, &text); st != ENSVIS_OK)
    {
      return report_failure("validate-registry", st);
    }
    print_and_free(text);
    return ok ? 0 : 1;
  }
  return 0;
}
