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

#include "synthetic.hpp"

#include <cstdio>
#include <cstdlib>

// make_corpus <dir> <train_per_class> <test_per_class> [seed]
int main(int argc, char **argv)
{
  if (argc < 4)
  {
    std::fprintf(stderr, "usage: make_corpus <dir> <train_per_class> <test_per_class> [seed]\n");
    return 2;
  }
  std::uint64_t const seed = argc > 4 ? std::strtoull(argv[4], nullptr, 10) : 7;
  ensvis::fixtures::write_two_class_corpus(argv[1], std::strtoull(argv[2], nullptr, 10),
                                          std::strtoull(argv[3], nullptr, 10), seed);
  return 0;
}
