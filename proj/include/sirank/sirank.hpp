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

// Umbrella header for the scale-invariant learning-to-rank toolkit.

#include "sirank/data.hpp"
#include "sirank/errors.hpp"
#include "sirank/experiment.hpp"
#include "sirank/features.hpp"
#include "sirank/losses.hpp"
#include "sirank/metrics.hpp"
#include "sirank/model_io.hpp"
#include "sirank/numerics.hpp"
#include "sirank/rng.hpp"
#include "sirank/scorer.hpp"
#include "sirank/training.hpp"
