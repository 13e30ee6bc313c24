#pragma once

#include <cstdint>
#include <string>

#include "odcast/model.hpp"
#include "odcast/synth.hpp"
#include "odcast/train.hpp"

namespace odcast {

// Fully resolved run configuration: one JSON file plus flag overrides.
// The scenario block inherits grid, granularity and seed from the top level.
struct RunConfig {
    std::uint64_t seed = 0;
    GridSpec grid;
    int granularity_min = 15;
    ModelConfig model;
    TrainConfig train;
    int ar_lag = 8;
    ScenarioSpec scenario;

    void validate() const;
    std::string to_json() const;      // stable key order
    std::string fingerprint() const;  // 16 hex chars over to_json()

    static RunConfig from_file(const std::string& path);
    static RunConfig from_json_text(const std::string& text);
};

void write_text_file(const std::string& path, const std::string& content);

}  // namespace odcast
