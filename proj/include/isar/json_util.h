// Copyright 2026 The ISAR Authors.
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

#ifndef ISAR_JSON_UTIL_H_
#define ISAR_JSON_UTIL_H_

#include <string>
#include <string_view>

#include "json.hpp"

namespace isar {

// Exact, locale-independent encoding of a double as a C99 hex-float string
// ("0x1.8p+1"). Non-finite values are rejected.
std::string EncodeHexDouble(double value);
double DecodeHexDouble(std::string_view text);

// Reads a double stored either as a hex-float string or a JSON number.
double ReadDouble(const nlohmann::json& value);

// Lower-case hex SHA-256 digest.
std::string Sha256Hex(std::string_view bytes);

}  // namespace isar

#endif  // ISAR_JSON_UTIL_H_
