#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "invariant/filters.hpp"
#include "invariant/models.hpp"

namespace invariant::eval {

using filters::FilterKind;
using lie::Mat3;
using lie::Mat9;
using lie::Vec3;
using models::GravityModel;
using models::NoiseModel;
using models::ReceiverGeometry;
using models::TrajectoryConfig;

// Rotation error vector log(C_true^T C_est); norm is the attitude error angle.
Vec3 attitude_error(const Mat3& c_true, const Mat3& c_est);

// sqrt(mean over time of squared error-vector norm).
double rmse(const std::vector<double>& error_norms);

// Linear interpolation on the sorted copy of values; fraction in [0, 1].
double percentile(std::vector<double> values, double fraction);

// Inverse chi-square CDF via bracketed root-finding on the regularized lower
// incomplete gamma function. Relative error <= 1e-8.
double chi2_quantile(int dof, double p);

double regularized_gamma_p(double a, double x);

// How the per-trial estimate is initialized relative to the truth: a draw
// from N(0, P0) in left-invariant coordinates plus a constant attitude offset.
struct InitialError {
    double attitude_std = 1.0471975511965976;  // pi/3 rad
    double velocity_std = 0.1;                 // m/s
    double position_std = 0.1;                 // m
    Vec3 attitude_offset = {1.0471975511965976, 1.0471975511965976, 1.0471975511965976};

    Mat9 p0() const;
};

struct BatchConfig {
    TrajectoryConfig trajectory;
    GravityModel gravity;
    NoiseModel noise;
    ReceiverGeometry geometry;
    InitialError init;
    std::vector<FilterKind> filters = {FilterKind::Iekf2, FilterKind::Iekf1, FilterKind::Mekf2};
    int trials = 100;
    std::uint64_t seed = 1;
    int threads = 0;  // 0 = all hardware threads (parallel runner only)
};

struct TrialResult {
    std::vector<double> att_err;  // per IMU step, rad
    std::vector<double> vel_err;  // m/s
    std::vector<double> pos_err;  // m
    std::vector<double> nis;      // per correction epoch
    int nis_dof = 0;
    double rmse_att = 0.0;
    double rmse_vel = 0.0;
    double rmse_pos = 0.0;
};

// Truth shared by every trial of a batch (the batch uses one trajectory).
struct BatchInputs {
    models::SimulatedTruth sim;
    std::vector<int> fix_steps;  // IMU-grid indices of correction epochs
    std::vector<double> epoch_times;
};

BatchInputs prepare_inputs(const BatchConfig& cfg);

// One Monte Carlo trial: returns one TrialResult per configured filter, in
// configuration order. Deterministic given (cfg.seed, trial_index).
std::vector<TrialResult> run_trial(const BatchInputs& inputs, const BatchConfig& cfg,
                                   int trial_index, bool keep_series = false);

// Reference runner: a plain loop over trials.
std::vector<std::vector<TrialResult>> run_trials_serial(const BatchInputs& inputs,
                                                        const BatchConfig& cfg);

// OpenMP runner; trials are independent and results are stored by index, so
// the output is identical to the serial runner for any thread count.
std::vector<std::vector<TrialResult>> run_trials_parallel(const BatchInputs& inputs,
                                                          const BatchConfig& cfg);

struct MetricStats {
    double mean = 0.0;
    double p2_5 = 0.0;
    double p97_5 = 0.0;
};

struct AnisSeries {
    std::vector<double> value;  // average NIS divided by nis_dof
    double band_lo = 0.0;       // chi2 band, same normalization
    double band_hi = 0.0;
    std::vector<bool> in_band;
    // First epoch time after which >= 90% of the remaining epochs are in
    // band; negative when no such epoch exists.
    double entry_time = -1.0;
};

struct FilterSummary {
    std::string name;
    MetricStats att, vel, pos;
    std::vector<double> rmse_att, rmse_vel, rmse_pos;  // per trial
    AnisSeries anis;
    int nis_dof = 0;
};

struct BatchSummary {
    std::vector<FilterSummary> filters;
    std::vector<double> epoch_times;
    int trials = 0;
    std::uint64_t seed = 0;
};

// eps_bar_k = mean over trials of eps_k, normalized by dof, with the
// two-sided 95% chi2(N*dof) band (bounds divided by N*dof).
AnisSeries average_nis(const std::vector<std::vector<double>>& per_trial_nis, int dof,
                       const std::vector<double>& epoch_times);

BatchSummary summarize(const std::vector<std::vector<TrialResult>>& trials,
                       const BatchConfig& cfg, const BatchInputs& inputs);

// prepare + run (serial when cfg.threads == 1) + summarize.
BatchSummary run_batch(const BatchConfig& cfg);

struct SpacingResult {
    double spacing = 0.0;
    BatchSummary summary;
};

// Re-runs the battery with the receivers spread `spacing` metres apart along
// the body x-axis (levers at +/- spacing/2). Same seeds for every spacing.
std::vector<SpacingResult> spacing_sweep(const std::vector<double>& spacings,
                                         const BatchConfig& cfg);

}  // namespace invariant::eval
