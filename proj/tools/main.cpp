#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "invariant/config.hpp"
#include "invariant/errors.hpp"
#include "invariant/eval.hpp"
#include "invariant/io.hpp"

namespace {

using invariant::config::RunConfig;

struct CommonArgs {
    std::string config_path;
    std::string out;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::vector<std::string> filter_names;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "JSON config file");
    cmd->add_option("--out", args.out, "output directory");
    cmd->add_option("--seed", args.seed, "master seed (overrides config)")
        ->each([&args](const std::string&) { args.seed_set = true; });
    cmd->add_option("--filters", args.filter_names, "filters to run (iekf2, iekf1, mekf2)")
        ->delimiter(',');
}

RunConfig resolve_config(const CommonArgs& args) {
    RunConfig cfg = args.config_path.empty() ? invariant::config::default_config()
                                             : invariant::config::load_config(args.config_path);
    if (args.seed_set) {
        cfg.seed = args.seed;
        cfg.trajectory.seed = args.seed;
    }
    if (!args.out.empty()) cfg.out_dir = args.out;
    if (!args.filter_names.empty()) {
        cfg.filters.clear();
        for (const auto& name : args.filter_names) {
            cfg.filters.push_back(invariant::filters::kind_from_name(name));
        }
    }
    cfg.validate();
    return cfg;
}

int run_simulate(const CommonArgs& args) {
    const RunConfig cfg = resolve_config(args);
    const auto batch = cfg.batch();
    const auto inputs = invariant::eval::prepare_inputs(batch);
    const auto trial = invariant::eval::run_trial(inputs, batch, 0, /*keep_series=*/true);
    invariant::io::write_trial_report(trial, batch.filters, inputs, cfg.out_dir);
    for (std::size_t f = 0; f < trial.size(); ++f) {
        std::printf("%s: rmse att %.6g rad, vel %.6g m/s, pos %.6g m\n",
                    invariant::filters::name_of(batch.filters[f]).c_str(), trial[f].rmse_att,
                    trial[f].rmse_vel, trial[f].rmse_pos);
    }
    std::printf("wrote %s\n", cfg.out_dir.c_str());
    return 0;
}

int run_montecarlo(const CommonArgs& args) {
    const RunConfig cfg = resolve_config(args);
    const auto summary = invariant::eval::run_batch(cfg.batch());
    invariant::io::emit_report(summary, invariant::config::manifest(cfg), cfg.out_dir);
    for (const auto& f : summary.filters) {
        std::printf("%s: mean rmse att %.6g rad, vel %.6g m/s, pos %.6g m; anis entry %.3g s\n",
                    f.name.c_str(), f.att.mean, f.vel.mean, f.pos.mean, f.anis.entry_time);
    }
    std::printf("wrote %s\n", cfg.out_dir.c_str());
    return 0;
}

int run_spacing(const CommonArgs& args) {
    const RunConfig cfg = resolve_config(args);
    const auto sweep = invariant::eval::spacing_sweep(cfg.spacings, cfg.batch());
    invariant::io::write_spacing_report(sweep, cfg.out_dir);
    for (const auto& sr : sweep) {
        std::printf("spacing %.3g m:\n", sr.spacing);
        for (const auto& f : sr.summary.filters) {
            std::printf("  %s: mean rmse att %.6g, vel %.6g, pos %.6g\n", f.name.c_str(),
                        f.att.mean, f.vel.mean, f.pos.mean);
        }
    }
    std::printf("wrote %s\n", cfg.out_dir.c_str());
    return 0;
}

int run_generate(const CommonArgs& args) {
    const RunConfig cfg = resolve_config(args);
    const auto bundle = invariant::io::generate_dataset(cfg, cfg.out_dir);
    std::printf("wrote %s (%zu imu rows, %zu fix rows)\n", cfg.out_dir.c_str(),
                bundle.imu.size(), bundle.fixes.size());
    return 0;
}

int run_replay(const CommonArgs& args, const std::string& dataset_dir, bool attitude_offset) {
    const auto bundle = invariant::io::load_dataset(dataset_dir);
    invariant::io::ReplayOptions options;
    options.filters.clear();
    if (args.filter_names.empty()) {
        options.filters = {invariant::filters::FilterKind::Iekf2};
    } else {
        for (const auto& name : args.filter_names) {
            options.filters.push_back(invariant::filters::kind_from_name(name));
        }
    }
    options.apply_attitude_offset = attitude_offset;
    if (attitude_offset) {
        options.init = invariant::eval::InitialError{};
    }
    const auto result = invariant::io::replay(bundle, options);
    const std::string out = args.out.empty() ? "replay_out" : args.out;
    invariant::io::write_replay_report(result, bundle, out);
    for (const auto& f : result.filters) {
        if (f.rmse_att) {
            std::printf("%s: rmse att %.6g rad, vel %.6g m/s, pos %.6g m (%zu epochs)\n",
                        f.name.c_str(), *f.rmse_att, *f.rmse_vel, *f.rmse_pos, f.nis.size());
        } else {
            std::printf("%s: %zu epochs (no ground truth in bundle)\n", f.name.c_str(),
                        f.nis.size());
        }
    }
    std::printf("wrote %s\n", out.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Extended-pose estimation from an IMU and two position receivers"};
    app.require_subcommand(1);

    CommonArgs sim_args, mc_args, sp_args, gen_args, rep_args;
    std::string dataset_dir;
    bool replay_attitude_offset = false;

    add_common(app.add_subcommand("simulate", "run a single simulated trial"), sim_args);
    add_common(app.add_subcommand("montecarlo", "run the Monte Carlo battery"), mc_args);
    add_common(app.add_subcommand("spacing", "receiver-spacing sweep"), sp_args);
    add_common(app.add_subcommand("generate-dataset", "write a synthetic dataset bundle"),
               gen_args);
    auto* rep = app.add_subcommand("replay", "run filters over a dataset bundle");
    add_common(rep, rep_args);
    rep->add_option("dataset", dataset_dir, "dataset directory")->required();
    rep->add_flag("--attitude-offset", replay_attitude_offset,
                  "start with the configured initial attitude offset");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand("simulate")) return run_simulate(sim_args);
        if (app.got_subcommand("montecarlo")) return run_montecarlo(mc_args);
        if (app.got_subcommand("spacing")) return run_spacing(sp_args);
        if (app.got_subcommand("generate-dataset")) return run_generate(gen_args);
        if (app.got_subcommand("replay")) return run_replay(rep_args, dataset_dir, replay_attitude_offset);
    } catch (const invariant::ConfigError& e) {
        std::fprintf(stderr, "error [config]: %s\n", e.what());
        return 2;
    } catch (const invariant::DataError& e) {
        std::fprintf(stderr, "error [data]: %s\n", e.what());
        return 3;
    } catch (const invariant::NumericError& e) {
        std::fprintf(stderr, "error [numeric]: %s\n", e.what());
        return 4;
    } catch (const invariant::IoError& e) {
        std::fprintf(stderr, "error [io]: %s\n", e.what());
        return 5;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
