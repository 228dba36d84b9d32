#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "invariant/config.hpp"
#include "invariant/eval.hpp"

namespace invariant::io {

using models::ImuSample;
using models::PositionFix;
using models::TruthSample;

inline constexpr int kDatasetFormatVersion = 1;

// On-disk dataset bundle: imu.csv, fixes.csv, optional truth.csv and a
// manifest.json recording rates, geometry, noise, seed and format version.
struct DatasetBundle {
    std::string dir;
    std::vector<ImuSample> imu;
    std::vector<PositionFix> fixes;
    std::vector<TruthSample> truth;  // empty when the bundle has no ground truth
    double imu_rate = 0.0;
    double fix_rate = 0.0;
    models::ReceiverGeometry geometry;
    models::NoiseModel noise;
    models::GravityModel gravity;
    std::uint64_t seed = 0;
    double duration = 0.0;
};

// Simulates the configured trajectory and writes a dataset bundle.
DatasetBundle generate_dataset(const config::RunConfig& cfg, const std::string& out_dir);

// Loads and validates a bundle (format version, timestamp order, manifest
// rates against the streams).
DatasetBundle load_dataset(const std::string& dir);

struct ReplayOptions {
    std::vector<filters::FilterKind> filters = {filters::FilterKind::Iekf2};
    // When ground truth is present the estimate starts at the true initial
    // state composed with this offset; otherwise it starts at the first
    // receiver-1 fix with identity attitude.
    eval::InitialError init = zero_offset_init();
    bool apply_attitude_offset = false;

    static eval::InitialError zero_offset_init() {
        eval::InitialError e;
        e.attitude_offset.setZero();
        return e;
    }
};

struct ReplayTracePoint {
    double t = 0.0;
    lie::ExtendedPose pose;
};

struct ReplayFilterResult {
    std::string name;
    std::vector<ReplayTracePoint> trace;
    std::vector<double> nis;
    std::vector<double> epoch_times;
    // Present when the bundle carries ground truth.
    std::optional<double> rmse_att, rmse_vel, rmse_pos;
    std::vector<double> att_err, vel_err, pos_err;
};

struct ReplayResult {
    std::vector<ReplayFilterResult> filters;
};

ReplayResult replay(const DatasetBundle& bundle, const ReplayOptions& options);

void write_replay_report(const ReplayResult& result, const DatasetBundle& bundle,
                         const std::string& out_dir);

// summary.json + rmse.csv + anis.csv.
void emit_report(const eval::BatchSummary& summary, const nlohmann::json& run_manifest,
                 const std::string& out_dir);

// spacing.csv with per-spacing RMSE stats and percent difference vs iekf2.
void write_spacing_report(const std::vector<eval::SpacingResult>& sweep,
                          const std::string& out_dir);

// Single-trial outputs: estimate trace, per-step errors and per-epoch NIS.
void write_trial_report(const std::vector<eval::TrialResult>& trial,
                        const std::vector<filters::FilterKind>& kinds,
                        const eval::BatchInputs& inputs, const std::string& out_dir);

}  // namespace invariant::io
