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

#include "oracles.hpp"
#include "synthetic.hpp"

#include "ensvis/ensvis.h"

#include "ensvis/codebook.hpp"
#include "ensvis/ensemble.hpp"
#include "ensvis/error.hpp"
#include "ensvis/featstore.hpp"
#include "ensvis/fisher.hpp"

#include "gtest/gtest.h"

#include <fstream>
#include <sstream>
#include <string>

extern "C" int ensvis_c_header_check(void);

namespace {

using namespace ensvis;

TEST(CApiTest, HeaderCompilesAsC)
{
  EXPECT_EQ(ensvis_c_header_check(), 1);
}

TEST(CApiTest, StatusNamesAndErrors)
{
  EXPECT_STREQ(ensvis_version(), "0.1.0");
  EXPECT_STREQ(ensvis_status_name(ENSVIS_ERR_TRUNCATED), "truncation");
  EXPECT_EQ(static_cast<int>(ENSVIS_ERR_INTERNAL), static_cast<int>(ErrorCode::Internal));

  ensvis_gmm *gmm = nullptr;
  EXPECT_EQ(ensvis_gmm_load(nullptr, &gmm), ENSVIS_ERR_INVALID_ARGUMENT);
  EXPECT_NE(std::string(ensvis_last_error()), "");
  EXPECT_EQ(ensvis_gmm_load("/nonexistent/gmm.bin", &gmm), ENSVIS_ERR_IO);
  EXPECT_NE(std::string(ensvis_last_error()).find("/nonexistent/gmm.bin"), std::string::npos);
  EXPECT_EQ(gmm, nullptr);
  EXPECT_EQ(ensvis_status_name(ENSVIS_OK), std::string("ok"));
  int ok = 0;
  EXPECT_EQ(ensvis_validate_registry("/nonexistent", &ok, nullptr), ENSVIS_OK);
  EXPECT_EQ(ok, 1);
  EXPECT_STREQ(ensvis_last_error(), "");
}

TEST(CApiTest, CodebookHandle)
{
  std::mt19937_64 rng(5);
  auto const      params = fixtures::random_gmm(3, 4, rng);
  auto const      data   = fixtures::sample_gmm(params, 10, rng);
  auto const      dir    = fixtures::temp_dir("capi-gmm");
  codebook::save_gmm(params, dir / "gmm.bin");

  ensvis_gmm *gmm = nullptr;
  ASSERT_EQ(ensvis_gmm_load((dir / "gmm.bin").c_str(), &gmm), ENSVIS_OK);
  std::size_t k = 0, d = 0;
  ASSERT_EQ(ensvis_gmm_shape(gmm, &k, &d), ENSVIS_OK);
  EXPECT_EQ(k, 3u);
  EXPECT_EQ(d, 4u);

  double ll = 0.0;
  ASSERT_EQ(ensvis_gmm_log_likelihood(gmm, data.data().data(), 10, 4, &ll), ENSVIS_OK);
  EXPECT_EQ(ll, codebook::log_likelihood(params, data));
  EXPECT_EQ(ensvis_gmm_log_likelihood(gmm, data.data().data(), 10, 3, &ll), ENSVIS_ERR_INVALID_ARGUMENT);

  std::vector<double> fv(24);
  ASSERT_EQ(ensvis_fisher_encode(gmm, data.data().data(), 10, 4, fv.data(), fv.size()), ENSVIS_OK);
  EXPECT_EQ(fv, fisher::encode_normalized(params, data).values);
  EXPECT_EQ(ensvis_fisher_encode(gmm, data.data().data(), 10, 4, fv.data(), 23), ENSVIS_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(ensvis_fisher_encode(gmm, data.data().data(), 0, 4, fv.data(), 24), ENSVIS_ERR_EMPTY_SAMPLE);
  EXPECT_EQ(ensvis_fisher_encode(gmm, data.data().data(), 5, 8, fv.data(), 24), ENSVIS_ERR_DIMENSION);
  ensvis_gmm_free(gmm);
  std::filesystem::remove_all(dir);
}

TEST(CApiTest, FeatureFiles)
{
  std::mt19937_64 rng(6);
  auto const      dir = fixtures::temp_dir("capi-dfv");
  auto const      ff  = fixtures::random_feature_file(rng, "vgg16", 6, 4096, 3);
  featstore::write_features(ff, dir / "vgg16_6_train.dfv");
  ensvis_feature_info info;
  ASSERT_EQ(ensvis_features_info((dir / "vgg16_6_train.dfv").c_str(), &info), ENSVIS_OK);
  EXPECT_STREQ(info.model, "vgg16");
  EXPECT_EQ(info.layer, 6u);
  EXPECT_EQ(info.dim, 4096u);
  EXPECT_EQ(info.count, 3u);

  int   ok     = -1;
  char *report = nullptr;
  ASSERT_EQ(ensvis_validate_registry(dir.c_str(), &ok, &report), ENSVIS_OK);
  EXPECT_EQ(ok, 1);
  EXPECT_NE(std::string(report).find("no test split"), std::string::npos);
  ensvis_string_free(report);

  featstore::write_features(fixtures::random_feature_file(rng, "vgg16", 6, 4000, 3), dir / "vgg16_6_test.dfv");
  ASSERT_EQ(ensvis_validate_registry(dir.c_str(), &ok, nullptr), ENSVIS_OK);
  EXPECT_EQ(ok, 0);

  std::ofstream(dir / "junk_1_train.dfv") << "DFV1";
  EXPECT_EQ(ensvis_features_info((dir / "junk_1_train.dfv").c_str(), &info), ENSVIS_ERR_TRUNCATED);
  std::filesystem::remove_all(dir);
}

TEST(CApiTest, MajorityVote)
{
  std::size_t const votes[]       = {1, 2, 2, 1, 0};
  double const      confidences[] = {0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0};
  std::size_t       out           = 99;
  ASSERT_EQ(ensvis_majority_vote(votes, confidences, 5, 3, ENSVIS_TIE_MAX_CONFIDENCE_SUM, &out), ENSVIS_OK);
  EXPECT_EQ(out, 2u);
  ASSERT_EQ(ensvis_majority_vote(votes, nullptr, 5, 3, ENSVIS_TIE_LOWEST_INDEX, &out), ENSVIS_OK);
  EXPECT_EQ(out, 1u);
  EXPECT_EQ(ensvis_majority_vote(votes, nullptr, 0, 3, ENSVIS_TIE_LOWEST_INDEX, &out),
            ENSVIS_ERR_DEGENERATE_ENSEMBLE);
  EXPECT_NE(ensvis_majority_vote(votes, nullptr, 5, 3, ENSVIS_TIE_MAX_CONFIDENCE_SUM, &out), ENSVIS_OK);
}

TEST(CApiTest, StagedPipelineAndEnsembleHandle)
{
  auto const root = fixtures::temp_dir("capi-run");
  fixtures::write_two_class_corpus(root / "data", 20, 10, 3);
  auto const data = (root / "data").string();
  auto const work = (root / "work").string();

  ensvis_run_config cfg;
  ensvis_run_config_init(&cfg);
  cfg.data_dir       = data.c_str();
  cfg.work_dir       = work.c_str();
  cfg.feat_dir       = data.c_str();
  cfg.gmm_components = 4;
  cfg.em_max_iter    = 5;

  std::size_t images = 0, descriptors = 0, dense = 0;
  ASSERT_EQ(ensvis_extract_sift(&cfg, ENSVIS_SPLIT_TRAIN, &images, &descriptors, &dense), ENSVIS_OK)
      << ensvis_last_error();
  EXPECT_EQ(images, 40u);
  ASSERT_EQ(ensvis_extract_sift(&cfg, ENSVIS_SPLIT_TEST, &images, &descriptors, &dense), ENSVIS_OK);
  int    iterations = 0;
  double mean_ll    = 0.0;
  ASSERT_EQ(ensvis_train_gmm(&cfg, &iterations, &mean_ll), ENSVIS_OK);
  EXPECT_GE(iterations, 1);
  std::size_t count = 0;
  ASSERT_EQ(ensvis_encode_fv(&cfg, ENSVIS_SPLIT_TRAIN, &count), ENSVIS_OK);
  EXPECT_EQ(count, 40u);
  ASSERT_EQ(ensvis_encode_fv(&cfg, ENSVIS_SPLIT_TEST, &count), ENSVIS_OK);
  ASSERT_EQ(ensvis_fit_pca(&cfg, nullptr), ENSVIS_OK);
  ASSERT_EQ(ensvis_train_svm(&cfg, nullptr), ENSVIS_OK);
  EXPECT_EQ(ensvis_train_svm(&cfg, "nope"), ENSVIS_ERR_INVALID_ARGUMENT);
  ASSERT_EQ(ensvis_train_ensemble(&cfg), ENSVIS_OK) << ensvis_last_error();
  char *report = nullptr;
  ASSERT_EQ(ensvis_evaluate(&cfg, &report), ENSVIS_OK) << ensvis_last_error();
  std::string const text = report;
  ensvis_string_free(report);
  EXPECT_NE(text.find("SIFT (FV)"), std::string::npos);
  ASSERT_EQ(ensvis_report(&cfg, &report), ENSVIS_OK);
  EXPECT_EQ(std::string(report), text);
  ensvis_string_free(report);

  ensvis_ensemble *ens = nullptr;
  ASSERT_EQ(ensvis_ensemble_load((root / "work" / "ensemble").c_str(), &ens), ENSVIS_OK) << ensvis_last_error();
  ASSERT_EQ(ensvis_ensemble_members(ens), 1u);
  EXPECT_STREQ(ensvis_ensemble_member_name(ens, 0), "sift");
  EXPECT_EQ(ensvis_ensemble_member_dim(ens, 0), 2u * 4u * 128u);
  EXPECT_EQ(ensvis_ensemble_member_name(ens, 1), nullptr);

  // Predictions through the handle match the predicted column of votes.csv.
  auto const    fv = featstore::read_features(root / "work" / "sift-fv_0_test.dfv");
  std::ifstream votes(root / "work" / "votes.csv");
  std::string   line;
  std::getline(votes, line);
  for (std::size_t i = 0; i < fv.count(); ++i)
  {
    ASSERT_TRUE(std::getline(votes, line));
    std::stringstream ss(line);
    std::string       id, truth, predicted;
    std::getline(ss, id, ',');
    std::getline(ss, truth, ',');
    std::getline(ss, predicted, ',');
    EXPECT_EQ(std::stoull(id), fv.ids[i]);
    std::vector<double> row(fv.row(i).begin(), fv.row(i).end());
    double const       *inputs[] = {row.data()};
    std::size_t const   dims[]   = {row.size()};
    std::uint32_t       label    = 99;
    ASSERT_EQ(ensvis_ensemble_predict(ens, inputs, dims, &label), ENSVIS_OK);
    EXPECT_EQ(label, std::stoul(predicted));
  }
  std::size_t const short_dims[] = {3};
  double const      zero[3]      = {0, 0, 0};
  double const     *short_in[]   = {zero};
  std::uint32_t     label        = 0;
  EXPECT_EQ(ensvis_ensemble_predict(ens, short_in, short_dims, &label), ENSVIS_ERR_CONSISTENCY);
  ensvis_ensemble_free(ens);

  // A full run into a fresh work dir reproduces the staged report.
  auto const work2 = (root / "work2").string();
  cfg.work_dir     = work2.c_str();
  ASSERT_EQ(ensvis_run_pipeline(&cfg, &report), ENSVIS_OK);
  EXPECT_EQ(std::string(report), text);
  ensvis_string_free(report);

  auto const work3 = (root / "work3").string();
  cfg.subset       = 11;
  cfg.work_dir     = work3.c_str();
  EXPECT_EQ(ensvis_run_pipeline(&cfg, nullptr), ENSVIS_ERR_INVALID_ARGUMENT);
  std::filesystem::remove_all(root);
}

}  // namespace
