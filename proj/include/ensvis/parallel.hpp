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

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace ensvis {

/// Runs fn(begin, end) over contiguous chunks of [0, n). Each index is visited
/// by exactly one worker, so callers that write only to per-index slots get
/// results independent of the thread count. The first exception is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn &&fn)
{
  std::size_t const workers = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(n, 1));
  if (workers == 1)
  {
    fn(std::size_t{0}, n);
    return;
  }
  std::size_t const              chunk = (n + workers - 1) / workers;
  std::vector<std::thread>       pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w)
  {
    std::size_t const begin = w * chunk;
    std::size_t const end   = std::min(n, begin + chunk);
    if (begin >= end)
    {
      break;
    }
    pool.emplace_back([&, w, begin, end] {
      try
      {
        fn(begin, end);
      }
      catch (...)
      {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto &t : pool)
  {
    t.join();
  }
  for (auto const &e : errors)
  {
    if (e)
    {
      std::rethrow_exception(e);
    }
  }
}

}  // namespace ensvis
