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

#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace ensvis {

/// Dense row-major matrix of doubles. Rows are the sample axis throughout the
/// library (one descriptor, feature vector or data point per row).
class Matrix
{
public:
  Matrix() = default;

  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
    : rows_(rows)
    , cols_(cols)
    , data_(rows * cols, fill)
  {}

  std::size_t rows() const noexcept
  {
    return rows_;
  }

  std::size_t cols() const noexcept
  {
    return cols_;
  }

  bool empty() const noexcept
  {
    return rows_ == 0;
  }

  double &operator()(std::size_t r, std::size_t c) noexcept
  {
    assert(r < rows_ && c < cols_);
    return data_[r * cols_ + c];
  }

  double operator()(std::size_t r, std::size_t c) const noexcept
  {
    assert(r < rows_ && c < cols_);
    return data_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) noexcept
  {
    assert(r < rows_);
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double const> row(std::size_t r) const noexcept
  {
    assert(r < rows_);
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> data() noexcept
  {
    return data_;
  }

  std::span<double const> data() const noexcept
  {
    return data_;
  }

  // Appending to an empty 0x0 matrix fixes the column count.
  void append_row(std::span<double const> values)
  {
    if (rows_ == 0 && cols_ == 0)
    {
      cols_ = values.size();
    }
    assert(values.size() == cols_);
    data_.insert(data_.end(), values.begin(), values.end());
    ++rows_;
  }

  void reserve_rows(std::size_t n)
  {
    data_.reserve(n * cols_);
  }

  friend bool operator==(Matrix const &, Matrix const &) = default;

private:
  std::size_t         rows_ = 0;
  std::size_t         cols_ = 0;
  std::vector<double> data_;
};

}  // namespace ensvis
