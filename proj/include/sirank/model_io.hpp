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

#include <fstream>
#include <string>

#include <json.hpp>

#include "sirank/errors.hpp"
#include "sirank/scorer.hpp"

namespace sirank {

// Self-describing, human-readable model document. Weights are stored
// row-major at full precision (the JSON writer emits round-trip-exact
// decimals), so save -> load -> score is bit-exact.

inline constexpr int kModelFormatVersion = 1;

inline nlohmann::json model_to_json(const Scorer& s) {
  s.validate();
  nlohmann::json j;
  j["format"] = "sirank-model";
  j["format_version"] = kModelFormatVersion;
  j["variant"] = to_string(s.variant);
  j["feature_count"] = s.feature_count();
  j["partition"] = {
      {"query_idx", s.partition.query_idx},
      {"stable_idx", s.partition.stable_idx},
      {"scaled_idx", s.partition.scaled_idx},
  };
  j["standardizer"] = {
      {"mean", s.deep_standardizer.mean},
      {"stddev", s.deep_standardizer.stddev},
  };
  nlohmann::json layers = nlohmann::json::array();
  for (const DenseLayer& l : s.deep.layers) {
    ensure_finite(l.weight.data, "model weights");
    ensure_finite(l.bias, "model biases");
    layers.push_back({
        {"out", l.weight.rows},
        {"in", l.weight.cols},
        {"weight_row_major", l.weight.data},
        {"bias", l.bias},
    });
  }
  j["deep_layers"] = layers;
  if (s.has_wide_path()) {
    ensure_finite(s.wide.proj_weight.data, "model weights");
    ensure_finite(s.wide.w, "model weights");
    j["wide"] = {
        {"projection_dims", s.wide.projection_dims()},
        {"proj_weight_row_major", s.wide.proj_weight.data},
        {"proj_bias", s.wide.proj_bias},
        {"w", s.wide.w},
    };
  }
  return j;
}

inline Scorer model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "sirank-model") {
      throw DataError("not a sirank model document");
    }
    if (j.at("format_version").get<int>() != kModelFormatVersion) {
      throw DataError("unsupported model format version");
    }
    Scorer s;
    const std::string variant = j.at("variant").get<std::string>();
    if (variant == "sir") {
      s.variant = ScorerVariant::scale_invariant;
    } else if (variant == "deep_baseline") {
      s.variant = ScorerVariant::deep_baseline;
    } else {
      throw DataError("unknown model variant '" + variant + "'");
    }
    const auto& part = j.at("partition");
    s.partition.query_idx = part.at("query_idx").get<std::vector<std::size_t>>();
    s.partition.stable_idx = part.at("stable_idx").get<std::vector<std::size_t>>();
    s.partition.scaled_idx = part.at("scaled_idx").get<std::vector<std::size_t>>();
    s.deep_standardizer.mean = j.at("standardizer").at("mean").get<Vec>();
    s.deep_standardizer.stddev = j.at("standardizer").at("stddev").get<Vec>();
    for (const auto& lj : j.at("deep_layers")) {
      DenseLayer l;
      l.weight.rows = lj.at("out").get<std::size_t>();
      l.weight.cols = lj.at("in").get<std::size_t>();
      l.weight.data = lj.at("weight_row_major").get<Vec>();
      l.bias = lj.at("bias").get<Vec>();
      if (l.weight.data.size() != l.weight.rows * l.weight.cols) {
        throw DataError("deep layer weight length does not match its dimensions");
      }
      s.deep.layers.push_back(std::move(l));
    }
    if (s.has_wide_path()) {
      const auto& wj = j.at("wide");
      const auto l_dims = wj.at("projection_dims").get<std::size_t>();
      s.wide.proj_weight.rows = l_dims;
      s.wide.proj_weight.cols = s.partition.query_dims();
      s.wide.proj_weight.data = wj.at("proj_weight_row_major").get<Vec>();
      s.wide.proj_bias = wj.at("proj_bias").get<Vec>();
      s.wide.w = wj.at("w").get<Vec>();
      if (s.wide.proj_weight.data.size() != l_dims * s.partition.query_dims()) {
        throw DataError("wide projection weight length does not match its dimensions");
      }
    }
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model document: ") + e.what());
  }
}

inline void save_model(const Scorer& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw DataError("cannot write model file: " + path);
  }
  out << model_to_json(s).dump(2) << '\n';
  if (!out.good()) {
    throw DataError("error while writing " + path);
  }
}

inline Scorer load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open model file: " + path);
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed model file " + path + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace sirank
