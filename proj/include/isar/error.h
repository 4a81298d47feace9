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

#ifndef ISAR_ERROR_H_
#define ISAR_ERROR_H_

#include <stdexcept>
#include <string>

namespace isar {

// Broad failure classes. The CLI maps these onto exit codes and the service
// maps them onto HTTP status codes.
enum class ErrorKind {
  kConfig,          // bad configuration or arguments
  kSchema,          // input table does not match the feature schema
  kValidation,      // values out of range, unknown categories
  kData,            // degenerate data (single class, too few rows)
  kMetric,          // metric undefined on the input
  kTraining,        // model fitting failed
  kModelIntegrity,  // malformed model (zero covers, bad child ids)
  kNumeric,         // ill-conditioned system, non-convergence
  kNotFound,        // unknown model or resource
};

const char* ErrorKindName(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string message, std::string field = {});

  ErrorKind kind() const { return kind_; }
  // Offending column / request field, empty when not applicable.
  const std::string& field() const { return field_; }

 private:
  ErrorKind kind_;
  std::string field_;
};

}  // namespace isar

#endif  // ISAR_ERROR_H_
