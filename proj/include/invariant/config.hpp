#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "invariant/eval.hpp"

namespace invariant::config {

// Full run configuration. Defaults reproduce the simulation battery: 50 s at
// 250/15 Hz, per-step discrete IMU noise 0.0012 rad / 0.0025 m/s^2 expressed
// as PSDs, receiver covariances from the reference hardware, 1.8 m baseline,
// pi/3 initial attitude offset, 100 trials.
struct RunConfig {
    models::TrajectoryConfig trajectory;
    models::GravityModel gravity;
    models::NoiseModel noise;
    models::ReceiverGeometry geometry;
    eval::InitialError initial_error;
    int trials = 100;
    std::uint64_t seed = 1;
    std::vector<filters::FilterKind> filters = {filters::FilterKind::Iekf2,
                                                filters::FilterKind::Iekf1,
                                                filters::FilterKind::Mekf2};
    int threads = 0;
    std::string out_dir = "out";
    std::vector<double> spacings = {0.1, 0.5, 1.0, 1.8};

    void validate() const;  // throws ConfigError naming the offending field
    eval::BatchConfig batch() const;
};

RunConfig default_config();

// Strict parse: unknown keys are rejected, every field is validated, and all
// defaulted values are visible in the manifest echo.
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& cfg);

RunConfig load_config(const std::string& path);

// Effective-parameter echo written alongside every run.
nlohmann::json manifest(const RunConfig& cfg);

}  // namespace invariant::config
