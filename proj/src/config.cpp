#include "invariant/config.hpp"

#include <fstream>
#include <set>

#include "invariant/errors.hpp"

namespace invariant::config {

namespace {

using nlohmann::json;
using lie::Mat3;
using lie::Vec3;

Vec3 vec3_from(const json& j, const std::string& field) {
    if (!j.is_array() || j.size() != 3) {
        throw ConfigError(field + " must be an array of 3 numbers");
    }
    Vec3 v;
    for (int i = 0; i < 3; ++i) {
        if (!j[i].is_number()) throw ConfigError(field + " must be an array of 3 numbers");
        v(i) = j[i].get<double>();
    }
    return v;
}

json vec3_to(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

// Noise blocks are stored as diagonals in the file format.
Mat3 diag_from(const json& j, const std::string& field) {
    return vec3_from(j, field).asDiagonal();
}

json diag_to(const Mat3& m) { return vec3_to(m.diagonal()); }

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
    for (const auto& [key, _] : j.items()) {
        if (!known.contains(key)) {
            throw ConfigError("unknown key '" + key + "' in " + where);
        }
    }
}

template <typename T>
void read_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).template get<T>();
}

void read_vec3_if(const json& j, const char* key, Vec3& out, const std::string& where) {
    if (j.contains(key)) out = vec3_from(j.at(key), where + "." + key);
}

void read_diag_if(const json& j, const char* key, Mat3& out, const std::string& where) {
    if (j.contains(key)) out = diag_from(j.at(key), where + "." + key);
}

}  // namespace

RunConfig default_config() { return {}; }

void RunConfig::validate() const {
    trajectory.validate();
    noise.validate();
    if (trials < 1) throw ConfigError("trials must be >= 1");
    if (threads < 0) throw ConfigError("threads must be >= 0");
    if (filters.empty()) throw ConfigError("filters must not be empty");
    const bool needs_baseline = std::any_of(filters.begin(), filters.end(), [](auto k) {
        return filters::receivers_of(k) == 2;
    });
    if (needs_baseline && geometry.baseline().norm() <= 0.0) {
        throw ConfigError("geometry baseline must be nonzero for two-receiver filters");
    }
    if (initial_error.attitude_std < 0.0 || initial_error.velocity_std < 0.0 ||
        initial_error.position_std < 0.0) {
        throw ConfigError("initial_error standard deviations must be nonnegative");
    }
    for (double s : spacings) {
        if (s <= 0.0) throw ConfigError("spacings must be positive");
    }
}

eval::BatchConfig RunConfig::batch() const {
    eval::BatchConfig b;
    b.trajectory = trajectory;
    b.gravity = gravity;
    b.noise = noise;
    b.geometry = geometry;
    b.init = initial_error;
    b.filters = filters;
    b.trials = trials;
    b.seed = seed;
    b.threads = threads;
    return b;
}

RunConfig config_from_json(const nlohmann::json& j) {
    RunConfig cfg;
    reject_unknown(j, {"trajectory", "gravity", "noise", "geometry", "initial_error", "run",
                       "spacings"},
                   "config");

    if (j.contains("trajectory")) {
        const json& t = j.at("trajectory");
        reject_unknown(t,
                       {"duration", "imu_rate", "fix_rate", "position_amplitude",
                        "position_frequency", "euler_amplitude", "euler_frequency",
                        "initial_position", "initial_euler", "seed"},
                       "trajectory");
        read_if(t, "duration", cfg.trajectory.duration);
        read_if(t, "imu_rate", cfg.trajectory.imu_rate);
        read_if(t, "fix_rate", cfg.trajectory.fix_rate);
        read_vec3_if(t, "position_amplitude", cfg.trajectory.position_amplitude, "trajectory");
        read_vec3_if(t, "position_frequency", cfg.trajectory.position_frequency, "trajectory");
        read_vec3_if(t, "euler_amplitude", cfg.trajectory.euler_amplitude, "trajectory");
        read_vec3_if(t, "euler_frequency", cfg.trajectory.euler_frequency, "trajectory");
        read_vec3_if(t, "initial_position", cfg.trajectory.initial_position, "trajectory");
        read_vec3_if(t, "initial_euler", cfg.trajectory.initial_euler, "trajectory");
        read_if(t, "seed", cfg.trajectory.seed);
    }
    if (j.contains("gravity")) {
        cfg.gravity.g = vec3_from(j.at("gravity"), "gravity");
    }
    if (j.contains("noise")) {
        const json& n = j.at("noise");
        reject_unknown(n, {"gyro_psd", "accel_psd", "r1", "r2"}, "noise");
        read_diag_if(n, "gyro_psd", cfg.noise.gyro_psd, "noise");
        read_diag_if(n, "accel_psd", cfg.noise.accel_psd, "noise");
        read_diag_if(n, "r1", cfg.noise.r1, "noise");
        read_diag_if(n, "r2", cfg.noise.r2, "noise");
    }
    if (j.contains("geometry")) {
        const json& g = j.at("geometry");
        reject_unknown(g, {"lever1", "lever2"}, "geometry");
        read_vec3_if(g, "lever1", cfg.geometry.lever1, "geometry");
        read_vec3_if(g, "lever2", cfg.geometry.lever2, "geometry");
    }
    if (j.contains("initial_error")) {
        const json& e = j.at("initial_error");
        reject_unknown(e, {"attitude_std", "velocity_std", "position_std", "attitude_offset"},
                       "initial_error");
        read_if(e, "attitude_std", cfg.initial_error.attitude_std);
        read_if(e, "velocity_std", cfg.initial_error.velocity_std);
        read_if(e, "position_std", cfg.initial_error.position_std);
        read_vec3_if(e, "attitude_offset", cfg.initial_error.attitude_offset, "initial_error");
    }
    if (j.contains("run")) {
        const json& r = j.at("run");
        reject_unknown(r, {"trials", "seed", "filters", "threads", "out_dir"}, "run");
        read_if(r, "trials", cfg.trials);
        read_if(r, "seed", cfg.seed);
        read_if(r, "threads", cfg.threads);
        read_if(r, "out_dir", cfg.out_dir);
        if (r.contains("filters")) {
            cfg.filters.clear();
            for (const auto& name : r.at("filters")) {
                cfg.filters.push_back(filters::kind_from_name(name.get<std::string>()));
            }
        }
    }
    if (j.contains("spacings")) {
        cfg.spacings = j.at("spacings").get<std::vector<double>>();
    }
    cfg.validate();
    return cfg;
}

nlohmann::json config_to_json(const RunConfig& cfg) {
    json j;
    j["trajectory"] = {
        {"duration", cfg.trajectory.duration},
        {"imu_rate", cfg.trajectory.imu_rate},
        {"fix_rate", cfg.trajectory.fix_rate},
        {"position_amplitude", vec3_to(cfg.trajectory.position_amplitude)},
        {"position_frequency", vec3_to(cfg.trajectory.position_frequency)},
        {"euler_amplitude", vec3_to(cfg.trajectory.euler_amplitude)},
        {"euler_frequency", vec3_to(cfg.trajectory.euler_frequency)},
        {"initial_position", vec3_to(cfg.trajectory.initial_position)},
        {"initial_euler", vec3_to(cfg.trajectory.initial_euler)},
        {"seed", cfg.trajectory.seed},
    };
    j["gravity"] = vec3_to(cfg.gravity.g);
    j["noise"] = {
        {"gyro_psd", diag_to(cfg.noise.gyro_psd)},
        {"accel_psd", diag_to(cfg.noise.accel_psd)},
        {"r1", diag_to(cfg.noise.r1)},
        {"r2", diag_to(cfg.noise.r2)},
    };
    j["geometry"] = {
        {"lever1", vec3_to(cfg.geometry.lever1)},
        {"lever2", vec3_to(cfg.geometry.lever2)},
    };
    j["initial_error"] = {
        {"attitude_std", cfg.initial_error.attitude_std},
        {"velocity_std", cfg.initial_error.velocity_std},
        {"position_std", cfg.initial_error.position_std},
        {"attitude_offset", vec3_to(cfg.initial_error.attitude_offset)},
    };
    json names = json::array();
    for (auto k : cfg.filters) names.push_back(filters::name_of(k));
    j["run"] = {
        {"trials", cfg.trials},    {"seed", cfg.seed},       {"filters", names},
        {"threads", cfg.threads},  {"out_dir", cfg.out_dir},
    };
    j["spacings"] = cfg.spacings;
    return j;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    return config_from_json(j);
}

nlohmann::json manifest(const RunConfig& cfg) {
    json m;
    m["config"] = config_to_json(cfg);
    m["conventions"] = {
        {"attitude_offset", "exp-coordinate components, right-composed onto the true attitude"},
        {"rmse", "sqrt(mean over time of squared error-vector norm)"},
        {"percentiles", "linear interpolation on sorted per-trial RMSEs"},
        {"imu_noise", "per-sample reading noise with covariance PSD/dt"},
        {"relative_fix", "receiver2 minus receiver1; joint covariance [[R1,-R1],[-R1,R1+R2]]"},
        {"trial_seeds", "split_seed(master, trial_index)"},
    };
    return m;
}

}  // namespace invariant::config
