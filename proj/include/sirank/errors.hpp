/* Copyright 2026 The sirank Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <stdexcept>
#include <string>

namespace sirank {

/// Base of every exception thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The three categories below map 1:1 onto the CLI exit codes
// (config = 1, data = 2, numeric = 3).

struct ConfigError : Error {
  using Error::Error;
};

struct DataError : Error {
  using Error::Error;
};

struct NumericError : Error {
  using Error::Error;
};

struct InvalidConfig : ConfigError {
  using ConfigError::ConfigError;
};

struct DimensionMismatch : DataError {
  using DataError::DataError;
};

struct ShapeMismatch : DataError {
  using DataError::DataError;
};

/// A value routed into a log() transform was <= 0.
struct NonPositiveFeature : DataError {
  using DataError::DataError;
};

struct InconsistentQueryFeatures : DataError {
  using DataError::DataError;
};

struct AllZeroLabels : DataError {
  using DataError::DataError;
};

struct ParseError : DataError {
  using DataError::DataError;
};

struct MissingColumn : DataError {
  using DataError::DataError;
};

struct EmptyDataset : DataError {
  using DataError::DataError;
};

struct TooFewQueries : DataError {
  using DataError::DataError;
};

/// Model and dataset disagree on feature count or column partition.
struct PartitionMismatch : DataError {
  using DataError::DataError;
};

struct NonFiniteLoss : NumericError {
  using NumericError::NumericError;
};

}  // namespace sirank
