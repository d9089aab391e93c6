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

#include "ensvis/dataset.hpp"
#include "ensvis/featstore.hpp"
#include "ensvis/matrix.hpp"

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

namespace ensvis::fixtures {

/// Two-class CIFAR-format images: label 0 holds a few large smooth blobs,
/// label 1 a fine high-contrast texture. Labels alternate; ids count from
/// `first_id`.
std::vector<Image> two_class_images(std::size_t per_class, std::uint64_t seed, std::uint32_t first_id = 0);

/// Writes data_batch_1.bin and test_batch.bin for two_class_images.
void write_two_class_corpus(std::filesystem::path const &dir, std::size_t train_per_class,
                            std::size_t test_per_class, std::uint64_t seed);

/// Ten-class corpus of random pixels, for loader and shape tests.
std::vector<Image> random_images(std::size_t count, std::uint64_t seed);

/// Sum of random Gaussian blobs on a flat background, intensities in [0,1].
GrayImage textured_fixture(int side, std::uint64_t seed);

/// Quarter turn: out(x', y') = in(x, y) with x' = y, y' = side - 1 - x.
GrayImage rotate90(GrayImage const &img);

/// Rows drawn from N(mean, sd^2) independently per coordinate.
Matrix gaussian_rows(std::size_t rows, std::vector<double> const &mean, double sd, std::mt19937_64 &rng);

/// Random valid feature file with strictly increasing ids.
featstore::FeatureFile random_feature_file(std::mt19937_64 &rng, std::string const &model, std::uint32_t layer,
                                           std::uint32_t dim, std::size_t count);

/// Fresh empty directory under the system temp dir.
std::filesystem::path temp_dir(std::string const &tag);

}  // namespace ensvis::fixtures
