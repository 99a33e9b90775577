// Copyright (c) the ARIW Project Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ARIW_COMMON_HPP_
#define ARIW_COMMON_HPP_

#include <fmt/format.h>

#include <stdexcept>
#include <string>

namespace ariw {

// Default scalar type of the shipped pipeline. Math headers are templated so
// tests can instantiate them with double where tolerances demand it.
using real = float;

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

template <typename... Args>
[[noreturn]] void fail(fmt::format_string<Args...> f, Args&&... args) {
  throw Error(fmt::format(f, std::forward<Args>(args)...));
}

}  // namespace ariw

#define ARIW_CHECK(cond, ...)         \
  do {                                \
    if (!(cond)) ::ariw::fail(__VA_ARGS__); \
  } while (0)

#endif  // ARIW_COMMON_HPP_
