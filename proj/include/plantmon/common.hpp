// Copyright 2026 The plantmon Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PLANTMON_COMMON_HPP_
#define PLANTMON_COMMON_HPP_

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace plantmon {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or violated input contract (CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Readable input that contains no usable data (CLI exit code 1).
class DataError : public Error {
 public:
  using Error::Error;
};

enum class Treatment { T1 = 0, T2 = 1, T3 = 2 };

inline constexpr std::array<Treatment, 3> kTreatments = {
    Treatment::T1, Treatment::T2, Treatment::T3};

std::string_view to_string(Treatment t);
Treatment parse_treatment(std::string_view s);

// Response variables estimated per plant, in report column order.
enum class Response { fw = 0, dm, n, p, k, ca, mg, s };

inline constexpr std::size_t kResponseCount = 8;
inline constexpr std::array<Response, kResponseCount> kResponses = {
    Response::fw, Response::dm, Response::n,  Response::p,
    Response::k,  Response::ca, Response::mg, Response::s};

std::string_view to_string(Response r);
Response parse_response(std::string_view s);

inline constexpr std::size_t index_of(Treatment t) {
  return static_cast<std::size_t>(t);
}
inline constexpr std::size_t index_of(Response r) {
  return static_cast<std::size_t>(r);
}

}  // namespace plantmon

#endif  // PLANTMON_COMMON_HPP_
