#include "invariant/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "invariant/errors.hpp"
#include "invariant/rng.hpp"

namespace invariant::io {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using lie::ExtendedPose;
using lie::Mat3;
using lie::Vec3;

// Fixes closer than this are one correction epoch.
constexpr double kPairToleranceSec = 1e-3;

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    return out;
}

std::vector<std::vector<double>> read_csv(const fs::path& path, std::size_t columns,
                                          const std::string& expected_header) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty file: " + path.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != expected_header) {
        throw DataError(path.string() + ": unexpected header '" + line + "'");
    }
    std::vector<std::vector<double>> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
                if (used != cell.size()) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw DataError(path.string() + ":" + std::to_string(line_no) +
                                ": bad number '" + cell + "'");
            }
        }
        if (row.size() != columns) {
            throw DataError(path.string() + ":" + std::to_string(line_no) +
                            ": expected " + std::to_string(columns) + " columns");
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

json geometry_to_json(const models::ReceiverGeometry& g) {
    return {{"lever1", {g.lever1.x(), g.lever1.y(), g.lever1.z()}},
            {"lever2", {g.lever2.x(), g.lever2.y(), g.lever2.z()}}};
}

json noise_to_json(const models::NoiseModel& n) {
    const auto diag = [](const Mat3& m) {
        return json::array({m(0, 0), m(1, 1), m(2, 2)});
    };
    return {{"gyro_psd", diag(n.gyro_psd)},
            {"accel_psd", diag(n.accel_psd)},
            {"r1", diag(n.r1)},
            {"r2", diag(n.r2)}};
}

Vec3 vec3_of(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

}  // namespace

DatasetBundle generate_dataset(const config::RunConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    fs::create_directories(out_dir);

    const models::TrajectoryEvaluator eval(cfg.trajectory, cfg.gravity);
    const double dt = 1.0 / cfg.trajectory.imu_rate;
    const int n_steps = static_cast<int>(std::llround(cfg.trajectory.duration * cfg.trajectory.imu_rate));
    const int n_fixes = static_cast<int>(std::floor(cfg.trajectory.duration * cfg.trajectory.fix_rate));

    Rng rng(split_seed(cfg.trajectory.seed, 0));
    const Mat3 gyro_chol = cholesky_lower<3>(Mat3(cfg.noise.gyro_psd / dt));
    const Mat3 accel_chol = cholesky_lower<3>(Mat3(cfg.noise.accel_psd / dt));

    DatasetBundle bundle;
    bundle.dir = out_dir;
    bundle.imu_rate = cfg.trajectory.imu_rate;
    bundle.fix_rate = cfg.trajectory.fix_rate;
    bundle.geometry = cfg.geometry;
    bundle.noise = cfg.noise;
    bundle.gravity = cfg.gravity;
    bundle.seed = cfg.trajectory.seed;
    bundle.duration = cfg.trajectory.duration;

    for (int k = 0; k <= n_steps; ++k) {
        bundle.truth.push_back(eval.at(k * dt));
        if (k < n_steps) {
            ImuSample u = eval.imu_for_step(k * dt, dt);
            u.gyro += rng.gaussian_vec<3>(gyro_chol);
            u.accel += rng.gaussian_vec<3>(accel_chol);
            bundle.imu.push_back(u);
        }
    }
    for (int j = 1; j <= n_fixes; ++j) {
        const double t = j / cfg.trajectory.fix_rate;
        const auto truth = eval.at(t);
        const auto fx = models::synthesize_fixes(truth.pose, cfg.geometry, cfg.noise, rng);
        bundle.fixes.push_back({t, 1, fx.y1});
        bundle.fixes.push_back({t, 2, fx.y2});
    }

    auto imu_csv = open_out(fs::path(out_dir) / "imu.csv");
    imu_csv << "t,gx,gy,gz,ax,ay,az\n";
    for (const auto& u : bundle.imu) {
        imu_csv << fmt(u.t) << ',' << fmt(u.gyro.x()) << ',' << fmt(u.gyro.y()) << ','
                << fmt(u.gyro.z()) << ',' << fmt(u.accel.x()) << ',' << fmt(u.accel.y()) << ','
                << fmt(u.accel.z()) << '\n';
    }

    auto fix_csv = open_out(fs::path(out_dir) / "fixes.csv");
    fix_csv << "t,receiver_id,x,y,z\n";
    for (const auto& f : bundle.fixes) {
        fix_csv << fmt(f.t) << ',' << f.receiver_id << ',' << fmt(f.y.x()) << ','
                << fmt(f.y.y()) << ',' << fmt(f.y.z()) << '\n';
    }

    auto truth_csv = open_out(fs::path(out_dir) / "truth.csv");
    truth_csv << "t,c00,c01,c02,c10,c11,c12,c20,c21,c22,vx,vy,vz,x,y,z\n";
    for (const auto& s : bundle.truth) {
        truth_csv << fmt(s.t);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) truth_csv << ',' << fmt(s.pose.rotation(r, c));
        for (int i = 0; i < 3; ++i) truth_csv << ',' << fmt(s.pose.velocity(i));
        for (int i = 0; i < 3; ++i) truth_csv << ',' << fmt(s.pose.position(i));
        truth_csv << '\n';
    }

    json m;
    m["format_version"] = kDatasetFormatVersion;
    m["imu_rate"] = bundle.imu_rate;
    m["fix_rate"] = bundle.fix_rate;
    m["duration"] = bundle.duration;
    m["seed"] = bundle.seed;
    m["geometry"] = geometry_to_json(bundle.geometry);
    m["noise"] = noise_to_json(bundle.noise);
    m["gravity"] = {bundle.gravity.g.x(), bundle.gravity.g.y(), bundle.gravity.g.z()};
    m["has_ground_truth"] = true;
    m["files"] = {{"imu", "imu.csv"}, {"fixes", "fixes.csv"}, {"truth", "truth.csv"}};
    open_out(fs::path(out_dir) / "manifest.json") << m.dump(2) << '\n';
    return bundle;
}

DatasetBundle load_dataset(const std::string& dir) {
    const fs::path root(dir);
    std::ifstream mf(root / "manifest.json");
    if (!mf) throw IoError("cannot open: " + (root / "manifest.json").string());
    json m;
    try {
        m = json::parse(mf);
    } catch (const json::parse_error& e) {
        throw DataError(std::string("manifest parse error: ") + e.what());
    }
    if (!m.contains("format_version") || m.at("format_version").get<int>() != kDatasetFormatVersion) {
        throw DataError("unrecognized dataset format version");
    }

    DatasetBundle b;
    b.dir = dir;
    b.imu_rate = m.at("imu_rate").get<double>();
    b.fix_rate = m.at("fix_rate").get<double>();
    b.duration = m.at("duration").get<double>();
    b.seed = m.at("seed").get<std::uint64_t>();
    b.geometry.lever1 = vec3_of(m.at("geometry").at("lever1"));
    b.geometry.lever2 = vec3_of(m.at("geometry").at("lever2"));
    const auto& n = m.at("noise");
    b.noise.gyro_psd = vec3_of(n.at("gyro_psd")).asDiagonal();
    b.noise.accel_psd = vec3_of(n.at("accel_psd")).asDiagonal();
    b.noise.r1 = vec3_of(n.at("r1")).asDiagonal();
    b.noise.r2 = vec3_of(n.at("r2")).asDiagonal();
    b.gravity.g = vec3_of(m.at("gravity"));

    for (const auto& row : read_csv(root / "imu.csv", 7, "t,gx,gy,gz,ax,ay,az")) {
        ImuSample u;
        u.t = row[0];
        u.gyro = {row[1], row[2], row[3]};
        u.accel = {row[4], row[5], row[6]};
        if (!b.imu.empty() && u.t <= b.imu.back().t) {
            throw DataError("imu.csv: timestamps must be strictly increasing");
        }
        b.imu.push_back(u);
    }
    if (b.imu.size() < 2) throw DataError("imu.csv: need at least two samples");

    for (const auto& row : read_csv(root / "fixes.csv", 5, "t,receiver_id,x,y,z")) {
        PositionFix f;
        f.t = row[0];
        f.receiver_id = static_cast<int>(row[1]);
        if (f.receiver_id != 1 && f.receiver_id != 2) {
            throw DataError("fixes.csv: receiver_id must be 1 or 2");
        }
        f.y = {row[2], row[3], row[4]};
        if (!b.fixes.empty() && f.t < b.fixes.back().t) {
            throw DataError("fixes.csv: timestamps must be nondecreasing");
        }
        b.fixes.push_back(f);
    }

    if (fs::exists(root / "truth.csv")) {
        for (const auto& row :
             read_csv(root / "truth.csv", 16, "t,c00,c01,c02,c10,c11,c12,c20,c21,c22,vx,vy,vz,x,y,z")) {
            TruthSample s;
            s.t = row[0];
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c) s.pose.rotation(r, c) = row[1 + 3 * r + c];
            s.pose.velocity = {row[10], row[11], row[12]};
            s.pose.position = {row[13], row[14], row[15]};
            b.truth.push_back(s);
        }
    }

    // Manifest rates must match the streams within 1%.
    const double imu_dt = (b.imu.back().t - b.imu.front().t) / static_cast<double>(b.imu.size() - 1);
    if (std::abs(imu_dt * b.imu_rate - 1.0) > 0.01) {
        throw DataError("manifest imu_rate disagrees with imu.csv timestamps by more than 1%");
    }
    std::vector<double> epoch_ts;
    for (const auto& f : b.fixes) {
        if (epoch_ts.empty() || f.t - epoch_ts.back() > kPairToleranceSec) epoch_ts.push_back(f.t);
    }
    if (epoch_ts.size() >= 2) {
        const double fix_dt = (epoch_ts.back() - epoch_ts.front()) / static_cast<double>(epoch_ts.size() - 1);
        if (std::abs(fix_dt * b.fix_rate - 1.0) > 0.01) {
            throw DataError("manifest fix_rate disagrees with fixes.csv timestamps by more than 1%");
        }
    }
    return b;
}

namespace {

struct Epoch {
    double t = 0.0;
    std::optional<Vec3> y1, y2;
};

std::vector<Epoch> pair_fixes(const std::vector<PositionFix>& fixes) {
    std::vector<Epoch> epochs;
    for (const auto& f : fixes) {
        if (epochs.empty() || f.t - epochs.back().t > kPairToleranceSec) {
            epochs.push_back({f.t, {}, {}});
        }
        auto& e = epochs.back();
        if (f.receiver_id == 1) {
            if (e.y1) throw DataError("duplicate receiver-1 fix at t=" + fmt(f.t));
            e.y1 = f.y;
        } else {
            if (e.y2) throw DataError("duplicate receiver-2 fix at t=" + fmt(f.t));
            e.y2 = f.y;
        }
    }
    return epochs;
}

ReplayFilterResult replay_one(const DatasetBundle& bundle, const std::vector<Epoch>& epochs,
                              filters::FilterKind kind, const ReplayOptions& options) {
    const auto variant = filters::variant_of(kind);
    const int receivers = filters::receivers_of(kind);
    const double nominal_dt = 1.0 / bundle.imu_rate;

    ReplayFilterResult out;
    out.name = filters::name_of(kind);

    filters::FilterState state;
    state.cov = options.init.p0();
    state.t = bundle.imu.front().t;
    const TruthSample* truth0 = bundle.truth.empty() ? nullptr : &bundle.truth.front();
    if (truth0) {
        state.mean = truth0->pose;
        if (options.apply_attitude_offset) {
            state.mean.rotation =
                state.mean.rotation * lie::exp_so3(options.init.attitude_offset);
        }
    } else {
        // Cold start: first receiver-1 fix as position, identity attitude.
        const auto it = std::find_if(epochs.begin(), epochs.end(),
                                     [](const Epoch& e) { return e.y1.has_value(); });
        if (it == epochs.end()) throw DataError("no receiver-1 fixes; cannot initialize");
        state.mean.position = *it->y1 - bundle.geometry.lever1;
    }

    std::size_t next_epoch = 0;
    const auto correct_at = [&](const Epoch& e) {
        if (!e.y1) {
            if (receivers == 2) throw DataError("missing receiver-1 fix at t=" + fmt(e.t));
            return;  // single-receiver filters ignore receiver-2-only epochs
        }
        if (receivers == 2 && !e.y2) {
            throw DataError("missing paired receiver-2 fix at t=" + fmt(e.t));
        }
        const Vec3 rel = receivers == 2 ? Vec3(*e.y2 - *e.y1) : Vec3::Zero();
        const Eigen::VectorXd z =
            variant == filters::FilterVariant::Iekf
                ? filters::iekf_innovation(state.mean, *e.y1, rel, bundle.geometry, receivers)
                : filters::mekf_innovation(state.mean, *e.y1, rel, bundle.geometry, receivers);
        const auto lin =
            variant == filters::FilterVariant::Iekf
                ? filters::iekf_meas_jacobians(bundle.geometry, bundle.noise, state.mean, receivers)
                : filters::mekf_meas_jacobians(bundle.geometry, bundle.noise,
                                               state.mean.rotation, receivers);
        const auto cr = filters::correct(state, lin, z, variant);
        state = cr.state;
        out.nis.push_back(cr.nis);
        out.epoch_times.push_back(e.t);
    };

    for (std::size_t k = 0; k < bundle.imu.size(); ++k) {
        const auto& u = bundle.imu[k];
        const double t_end =
            k + 1 < bundle.imu.size() ? bundle.imu[k + 1].t : bundle.imu[k].t + nominal_dt;
        while (next_epoch < epochs.size() && epochs[next_epoch].t <= t_end) {
            const Epoch& e = epochs[next_epoch];
            if (e.t < state.t - kPairToleranceSec) {
                throw DataError("fix timestamp regression at t=" + fmt(e.t));
            }
            const double dt1 = e.t - state.t;
            if (dt1 > 0.0) {
                state = filters::predict(state, u, bundle.noise, bundle.gravity, dt1, variant);
            }
            correct_at(e);
            ++next_epoch;
        }
        if (t_end > state.t) {
            state = filters::predict(state, u, bundle.noise, bundle.gravity, t_end - state.t, variant);
        }
        out.trace.push_back({state.t, state.mean});
    }

    if (!bundle.truth.empty()) {
        // Match truth rows to trace points by timestamp.
        std::size_t ti = 0;
        for (const auto& p : out.trace) {
            while (ti < bundle.truth.size() && bundle.truth[ti].t < p.t - 1e-9) ++ti;
            if (ti >= bundle.truth.size()) break;
            if (std::abs(bundle.truth[ti].t - p.t) > 1e-6) continue;
            const auto& truth = bundle.truth[ti].pose;
            out.att_err.push_back(eval::attitude_error(truth.rotation, p.pose.rotation).norm());
            out.vel_err.push_back((p.pose.velocity - truth.velocity).norm());
            out.pos_err.push_back((p.pose.position - truth.position).norm());
        }
        if (!out.att_err.empty()) {
            out.rmse_att = eval::rmse(out.att_err);
            out.rmse_vel = eval::rmse(out.vel_err);
            out.rmse_pos = eval::rmse(out.pos_err);
        }
    }
    return out;
}

}  // namespace

ReplayResult replay(const DatasetBundle& bundle, const ReplayOptions& options) {
    if (options.filters.empty()) throw ConfigError("replay needs at least one filter");
    const auto epochs = pair_fixes(bundle.fixes);
    ReplayResult result;
    for (auto kind : options.filters) {
        result.filters.push_back(replay_one(bundle, epochs, kind, options));
    }
    return result;
}

void write_replay_report(const ReplayResult& result, const DatasetBundle& bundle,
                         const std::string& out_dir) {
    fs::create_directories(out_dir);
    json report;
    report["dataset"] = bundle.dir;
    report["filters"] = json::array();
    for (const auto& f : result.filters) {
        json jf;
        jf["name"] = f.name;
        jf["epochs"] = f.nis.size();
        if (f.rmse_att) {
            jf["rmse"] = {{"attitude", *f.rmse_att},
                          {"velocity", *f.rmse_vel},
                          {"position", *f.rmse_pos}};
        }
        report["filters"].push_back(jf);

        auto trace = open_out(fs::path(out_dir) / ("trace_" + f.name + ".csv"));
        trace << "t,c00,c01,c02,c10,c11,c12,c20,c21,c22,vx,vy,vz,x,y,z\n";
        for (const auto& p : f.trace) {
            trace << fmt(p.t);
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c) trace << ',' << fmt(p.pose.rotation(r, c));
            for (int i = 0; i < 3; ++i) trace << ',' << fmt(p.pose.velocity(i));
            for (int i = 0; i < 3; ++i) trace << ',' << fmt(p.pose.position(i));
            trace << '\n';
        }

        auto nis = open_out(fs::path(out_dir) / ("nis_" + f.name + ".csv"));
        nis << "t,nis\n";
        for (std::size_t i = 0; i < f.nis.size(); ++i) {
            nis << fmt(f.epoch_times[i]) << ',' << fmt(f.nis[i]) << '\n';
        }
    }
    open_out(fs::path(out_dir) / "replay_report.json") << report.dump(2) << '\n';
}

void emit_report(const eval::BatchSummary& summary, const nlohmann::json& run_manifest,
                 const std::string& out_dir) {
    if (summary.filters.empty() || summary.trials == 0) {
        throw DataError("refusing to write a report for an empty batch");
    }
    fs::create_directories(out_dir);

    json js;
    js["manifest"] = run_manifest;
    js["trials"] = summary.trials;
    js["seed"] = summary.seed;
    js["epoch_times"] = summary.epoch_times;
    js["filters"] = json::array();
    for (const auto& f : summary.filters) {
        const auto stats = [](const eval::MetricStats& s, const std::vector<double>& per_trial) {
            return json{{"mean", s.mean}, {"p2_5", s.p2_5}, {"p97_5", s.p97_5},
                        {"per_trial", per_trial}};
        };
        js["filters"].push_back({
            {"name", f.name},
            {"nis_dof", f.nis_dof},
            {"rmse",
             {{"attitude", stats(f.att, f.rmse_att)},
              {"velocity", stats(f.vel, f.rmse_vel)},
              {"position", stats(f.pos, f.rmse_pos)}}},
            {"anis",
             {{"value", f.anis.value},
              {"band_lo", f.anis.band_lo},
              {"band_hi", f.anis.band_hi},
              {"entry_time", f.anis.entry_time}}},
        });
    }
    open_out(fs::path(out_dir) / "summary.json") << js.dump(2) << '\n';

    auto rmse_csv = open_out(fs::path(out_dir) / "rmse.csv");
    rmse_csv << "filter,metric,mean,p2_5,p97_5\n";
    for (const auto& f : summary.filters) {
        const auto row = [&](const char* metric, const eval::MetricStats& s) {
            rmse_csv << f.name << ',' << metric << ',' << fmt(s.mean) << ',' << fmt(s.p2_5)
                     << ',' << fmt(s.p97_5) << '\n';
        };
        row("attitude", f.att);
        row("velocity", f.vel);
        row("position", f.pos);
    }

    auto anis_csv = open_out(fs::path(out_dir) / "anis.csv");
    anis_csv << "epoch,t,filter,anis,band_lo,band_hi,in_band\n";
    for (const auto& f : summary.filters) {
        for (std::size_t k = 0; k < f.anis.value.size(); ++k) {
            anis_csv << k << ',' << fmt(summary.epoch_times[k]) << ',' << f.name << ','
                     << fmt(f.anis.value[k]) << ',' << fmt(f.anis.band_lo) << ','
                     << fmt(f.anis.band_hi) << ',' << (f.anis.in_band[k] ? 1 : 0) << '\n';
        }
    }
}

void write_spacing_report(const std::vector<eval::SpacingResult>& sweep,
                          const std::string& out_dir) {
    if (sweep.empty()) throw DataError("refusing to write a report for an empty sweep");
    fs::create_directories(out_dir);
    auto csv = open_out(fs::path(out_dir) / "spacing.csv");
    csv << "spacing,filter,metric,mean,p2_5,p97_5,pct_diff_vs_iekf2\n";
    for (const auto& sr : sweep) {
        const eval::FilterSummary* ref = nullptr;
        for (const auto& f : sr.summary.filters) {
            if (f.name == "iekf2") ref = &f;
        }
        for (const auto& f : sr.summary.filters) {
            const auto row = [&](const char* metric, const eval::MetricStats& s,
                                 const eval::MetricStats* ref_s) {
                csv << fmt(sr.spacing) << ',' << f.name << ',' << metric << ',' << fmt(s.mean)
                    << ',' << fmt(s.p2_5) << ',' << fmt(s.p97_5) << ',';
                if (ref_s && ref_s->mean > 0.0) {
                    csv << fmt(100.0 * (s.mean - ref_s->mean) / ref_s->mean);
                }
                csv << '\n';
            };
            row("attitude", f.att, ref ? &ref->att : nullptr);
            row("velocity", f.vel, ref ? &ref->vel : nullptr);
            row("position", f.pos, ref ? &ref->pos : nullptr);
        }
    }
}

void write_trial_report(const std::vector<eval::TrialResult>& trial,
                        const std::vector<filters::FilterKind>& kinds,
                        const eval::BatchInputs& inputs, const std::string& out_dir) {
    if (trial.size() != kinds.size()) throw DataError("trial/filter list size mismatch");
    fs::create_directories(out_dir);
    for (std::size_t f = 0; f < trial.size(); ++f) {
        const auto& tr = trial[f];
        const std::string name = filters::name_of(kinds[f]);
        auto err = open_out(fs::path(out_dir) / ("errors_" + name + ".csv"));
        err << "t,att_err,vel_err,pos_err\n";
        for (std::size_t k = 0; k < tr.att_err.size(); ++k) {
            err << fmt((k + 1) * inputs.sim.dt) << ',' << fmt(tr.att_err[k]) << ','
                << fmt(tr.vel_err[k]) << ',' << fmt(tr.pos_err[k]) << '\n';
        }
        auto nis = open_out(fs::path(out_dir) / ("nis_" + name + ".csv"));
        nis << "t,nis\n";
        for (std::size_t k = 0; k < tr.nis.size(); ++k) {
            nis << fmt(inputs.epoch_times[k]) << ',' << fmt(tr.nis[k]) << '\n';
        }
    }
}

}  // namespace invariant::io
