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

#include "isar/error.h"

#include <utility>

namespace isar {

const char* ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig:
      return "config_error";
    case ErrorKind::kSchema:
      return "schema_error";
    case ErrorKind::kValidation:
      return "validation_error";
    case ErrorKind::kData:
      return "data_error";
    case ErrorKind::kMetric:
      return "undefined_metric";
    case ErrorKind::kTraining:
      return "training_error";
    case ErrorKind::kModelIntegrity:
      return "model_integrity_error";
    case ErrorKind::kNumeric:
      return "numeric_error";
    case ErrorKind::kNotFound:
      return "not_found";
  }
  return "error";
}

Error::Error(ErrorKind kind, std::string message, std::string field)
    : std::runtime_error(std::move(message)),
      kind_(kind),
      field_(std::move(field)) {}

}  // namespace isar
