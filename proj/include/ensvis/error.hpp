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

#include <stdexcept>
#include <string>

namespace ensvis {

// Values are part of the C API (ensvis_status) and must stay stable.
enum class ErrorCode : int
{
  InvalidArgument        = 1,
  Io                     = 2,
  Format                 = 3,
  Truncated              = 4,
  CorruptIndex           = 5,
  Dimension              = 6,
  Numerical              = 7,
  DegenerateLabels       = 8,
  IncompleteInput        = 9,
  Registry               = 10,
  Consistency            = 11,
  InsufficientResolution = 12,
  EmptySample            = 13,
  MalformedCorpus        = 14,
  CorruptRecord          = 15,
  DegenerateEnsemble     = 16,
  Internal               = 17,
};

char const *to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error
{
public:
  Error(ErrorCode code, std::string const &message);

  ErrorCode code() const noexcept
  {
    return code_;
  }

  /// The message without the code prefix.
  std::string const &detail() const noexcept
  {
    return detail_;
  }

  /// Same code, message prefixed with `context: `.
  Error within(std::string const &context) const
  {
    return Error(code_, context + ": " + detail_);
  }

private:
  ErrorCode   code_;
  std::string detail_;
};

[[noreturn]] void fail(ErrorCode code, std::string const &message);

}  // namespace ensvis
