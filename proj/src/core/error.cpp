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

#include "ensvis/error.hpp"

namespace ensvis {

char const *to_string(ErrorCode code) noexcept
{
  switch (code)
  {
  case ErrorCode::InvalidArgument:
    return "invalid-argument";
  case ErrorCode::Io:
    return "io";
  case ErrorCode::Format:
    return "format";
  case ErrorCode::Truncated:
    return "truncation";
  case ErrorCode::CorruptIndex:
    return "corrupt-index";
  case ErrorCode::Dimension:
    return "dimension";
  case ErrorCode::Numerical:
    return "numerical-failure";
  case ErrorCode::DegenerateLabels:
    return "degenerate-labels";
  case ErrorCode::IncompleteInput:
    return "incomplete-input";
  case ErrorCode::Registry:
    return "registry";
  case ErrorCode::Consistency:
    return "consistency";
  case ErrorCode::InsufficientResolution:
    return "insufficient-resolution";
  case ErrorCode::EmptySample:
    return "empty-sample";
  case ErrorCode::MalformedCorpus:
    return "malformed-corpus";
  case ErrorCode::CorruptRecord:
    return "corrupt-record";
  case ErrorCode::DegenerateEnsemble:
    return "degenerate-ensemble";
  case ErrorCode::Internal:
    return "internal";
  }
  return "unknown";
}

Error::Error(ErrorCode code, std::string const &message)
  : std::runtime_error(std::string(to_string(code)) + ": " + message)
  , code_(code)
  , detail_(message)
{}

void fail(ErrorCode code, std::string const &message)
{
  throw Error(code, message);
}

}  // namespace ensvis
