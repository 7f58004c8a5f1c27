#include "qscope/scenario.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "qscope/svg.hpp"

namespace qscope {

namespace {

using nlohmann::ordered_json;

/// Config-level problems exit with code 2; I/O problems with code 1.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::filesystem::path resolve_out_dir(const ScenarioConfig& cfg, const CliOverrides& ov) {
    std::filesystem::path dir = ov.out_dir ? *ov.out_dir : cfg.output_dir;
    if (dir.is_relative()) {
        if (const char* base = std::getenv("QSCOPE_OUT")) dir = std::filesystem::path(base) / dir;
    }
    std::filesystem::create_directories(dir);
    return dir;
}

void apply_overrides(ScenarioConfig& cfg, const CliOverrides& ov) {
    if (ov.seed) {
        cfg.seed = *ov.seed;
        cfg.sweep.seed = *ov.seed;
    }
    if (ov.jobs) {
        cfg.jobs = *ov.jobs;
        cfg.sweep.jobs = *ov.jobs;
    }
    if (ov.backend) cfg.sweep.backend = *ov.backend;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

void write_metadata(const std::filesystem::path& path, const ScenarioConfig& cfg,
                    ordered_json extra) {
    ordered_json md;
    md["config_hash"] = cfg.config_hash;
    md["config"] = cfg.raw;
    md["outputs"] = std::move(extra);
    write_text(path, md.dump(2) + "\n");
}

PlotSeries series_from(const SweepResult& rec, bool field) {
    PlotSeries s;
    for (const auto& pt : rec.points) {
        s.x.push_back(pt.t_s * 1e9);
        s.y.push_back(field ? pt.b_est_t * 1e6 : pt.p_mean);
    }
    return s;
}

void plot_record(const std::filesystem::path& path, const SweepResult& rec,
                 const std::string& title) {
    bool field = std::isfinite(rec.points.front().b_est_t);
    PlotSpec spec;
    spec.title = title;
    spec.xlabel = "t (ns)";
    spec.ylabel = field ? "B_est (uT)" : "p";
    spec.series.push_back(series_from(rec, field));
    if (field) {
        PlotSeries truth;
        for (const auto& pt : rec.points) {
            truth.x.push_back(pt.t_s * 1e9);
            truth.y.push_back(pt.b_true_t * 1e6);
        }
        truth.color = "#555555";
        spec.series.push_back(truth);
    }
    write_svg_plot(path, spec);
}

int run_guarded(const std::filesystem::path& config_path,
                const std::function<int(ScenarioConfig&)>& body) {
    try {
        ScenarioConfig cfg = ScenarioConfig::load(config_path);
        return body(cfg);
    } catch (const ConfigError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

std::vector<Diagnostic> sweep_diagnostics(const ScenarioConfig& cfg, const TriggeredSignal& sig,
                                          double probe_t) {
    PulseSequence seq;
    const SweepConfig& sc = cfg.sweep;
    switch (sc.protocol) {
        case Protocol::integrative_ramsey:
            seq = build_integrative_ramsey(probe_t, cfg.sensor);
            break;
        case Protocol::small_interval_ramsey:
            seq = build_small_interval_ramsey(probe_t, sc.tint_s, cfg.sensor);
            break;
        case Protocol::differential_echo:
            seq = build_differential_echo(probe_t, sc.tint_s, sc.k, sc.trep_s, cfg.sensor);
            break;
    }
    ValidateOptions vopts;
    vopts.hard_budget = sc.hard_budget;
    vopts.waveform_bpp_t = sig.waveform.peak_to_peak(sig.trep_s);
    return validate(seq, cfg.sensor, vopts);
}

}  // namespace

ScenarioConfig ScenarioConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open config: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    std::string bytes = ss.str();

    ordered_json j;
    try {
        j = ordered_json::parse(bytes);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }

    ScenarioConfig cfg;
    cfg.raw = j;
    cfg.config_hash = fnv1a_hex(bytes);

    if (j.contains("sensor")) {
        const auto& s = j["sensor"];
        cfg.sensor.gamma_rad_per_s_per_t =
            s.value("gamma_rad_per_s_per_t", cfg.sensor.gamma_rad_per_s_per_t);
        cfg.sensor.t2_s = s.value("t2_s", cfg.sensor.t2_s);
        cfg.sensor.rabi_hz = s.value("rabi_hz", cfg.sensor.rabi_hz);
        cfg.sensor.tm_s = s.value("tm_s", cfg.sensor.tm_s);
        cfg.sensor.readout_c = s.value("readout_c", cfg.sensor.readout_c);
        if (s.contains("tpi_override_s") && !s["tpi_override_s"].is_null())
            cfg.sensor.tpi_override_s = s["tpi_override_s"].get<double>();
    }
    cfg.sensor.validate();

    if (j.contains("signal")) {
        const auto& s = j["signal"];
        int sources = 0;
        if (s.contains("builtin")) { cfg.waveform_builtin = s["builtin"]; ++sources; }
        if (s.contains("expr")) { cfg.waveform_expr = s["expr"]; ++sources; }
        if (s.contains("file")) { cfg.waveform_file = s["file"].get<std::string>(); ++sources; }
        if (sources != 1)
            throw ConfigError("signal block needs exactly one of builtin/expr/file");
        cfg.trep_s = s.value("trep_s", 0.0);
        if (cfg.trep_s <= 0.0) throw ConfigError("signal.trep_s must be positive");
        cfg.n_passages = s.value("n_passages", 0);
        if (s.contains("lowpass_rise_10_90_s") && !s["lowpass_rise_10_90_s"].is_null())
            cfg.lowpass_rise_10_90_s = s["lowpass_rise_10_90_s"].get<double>();
    }

    if (j.contains("sweep")) {
        const auto& s = j["sweep"];
        cfg.sweep.protocol = protocol_from_name(s.value("protocol", "differential_echo"));
        cfg.sweep.t_start_s = s.value("t_start_s", 0.0);
        cfg.sweep.t_stop_s = s.value("t_stop_s", 0.0);
        cfg.sweep.ts_s = s.value("ts_s", 4e-9);
        cfg.sweep.tint_s = s.value("tint_s", 20e-9);
        cfg.sweep.k = s.value("k", 1);
        cfg.sweep.trep_s = s.value("trep_s", cfg.trep_s);
        cfg.sweep.n_shots = s.value("n_shots", 1e4);
        cfg.sweep.noiseless = s.value("noiseless", false);
        cfg.sweep.hard_budget = s.value("hard_budget", false);
        std::string inv = s.value("inversion", "linear");
        if (inv == "linear") cfg.sweep.inversion = FieldInversion::linear;
        else if (inv == "arcsine") cfg.sweep.inversion = FieldInversion::arcsine;
        else throw ConfigError("sweep.inversion must be 'linear' or 'arcsine'");
        cfg.sweep.backend = backend_from_name(s.value("backend", "filter"));
        if (cfg.sweep.k < 1) throw ConfigError("sweep.k must be >= 1");
        if (cfg.sweep.ts_s <= 0) throw ConfigError("sweep.ts_s must be positive");
    }

    if (j.contains("analysis")) cfg.analysis = j["analysis"].get<std::vector<std::string>>();
    if (j.contains("quiet_masks_s"))
        for (const auto& m : j["quiet_masks_s"])
            cfg.quiet_masks_s.emplace_back(m[0].get<double>(), m[1].get<double>());

    if (j.contains("bode")) {
        const auto& b = j["bode"];
        cfg.bode.tint_s = b.value("tint_s", cfg.bode.tint_s);
        cfg.bode.fmax_hz = b.value("fmax_hz", cfg.bode.fmax_hz);
        cfg.bode.df_hz = b.value("df_hz", cfg.bode.df_hz);
        cfg.bode.impulse_sigma_s = b.value("impulse_sigma_s", cfg.bode.impulse_sigma_s);
    }
    if (j.contains("sensitivity")) {
        const auto& b = j["sensitivity"];
        cfg.sensitivity.tint_s = b.value("tint_s", cfg.sensitivity.tint_s);
        cfg.sensitivity.tw_s = b.value("tw_s", cfg.sensitivity.tw_s);
        cfg.sensitivity.k_min = b.value("k_min", 1);
        cfg.sensitivity.k_max = b.value("k_max", 64);
        if (cfg.sensitivity.k_min < 1 || cfg.sensitivity.k_max < cfg.sensitivity.k_min)
            throw ConfigError("sensitivity k range must satisfy 1 <= k_min <= k_max");
    }
    if (j.contains("compare")) {
        const auto& b = j["compare"];
        cfg.compare.differential_only = b.value("differential_only", false);
        cfg.compare.k = b.value("k", 2);
    }

    cfg.output_dir = j.value("output_dir", std::string("out"));
    cfg.seed = j.value("seed", 1ull);
    cfg.jobs = j.value("jobs", 1);
    cfg.sweep.seed = cfg.seed;
    cfg.sweep.jobs = cfg.jobs;
    return cfg;
}

TriggeredSignal ScenarioConfig::make_signal() const {
    Waveform w;
    if (!waveform_builtin.empty()) w = Waveform::builtin(waveform_builtin);
    else if (!waveform_expr.empty()) w = Waveform::expression(waveform_expr);
    else if (!waveform_file.empty()) w = Waveform::from_file(waveform_file);
    else throw ConfigError("no waveform source configured");
    return TriggeredSignal(w, trep_s, n_passages, lowpass_rise_10_90_s);
}

// --- subcommands -----------------------------------------------------------------

int cmd_simulate(const std::filesystem::path& config_path, const CliOverrides& ov) {
    return run_guarded(config_path, [&](ScenarioConfig& cfg) {
        apply_overrides(cfg, ov);
        TriggeredSignal sig = cfg.make_signal();

        auto diags = sweep_diagnostics(cfg, sig, cfg.sweep.t_stop_s);
        for (const auto& d : diags)
            if (d.code != DiagCode::ok) std::cerr << "diagnostic: " << d.message << "\n";
        if (has_hard_diagnostic(diags)) return 2;

        SweepResult rec = run_sweep(cfg.sweep, sig, cfg.sensor);
        auto dir = resolve_out_dir(cfg, ov);
        write_text(dir / "record.csv", rec.csv());
        plot_record(dir / "record.svg", rec, "sweep record");

        ordered_json outputs;
        outputs["record_csv"] = "record.csv";
        outputs["sweep_metadata"] = rec.metadata;

        for (const std::string& a : cfg.analysis) {
            if (a == "power_spectrum") {
                PowerSpectrum ps = power_spectrum(rec);
                std::ostringstream csv;
                csv << "f_hz,power_norm\n";
                for (std::size_t i = 0; i < ps.freq_hz.size(); ++i)
                    csv << ps.freq_hz[i] << ',' << ps.power[i] << '\n';
                write_text(dir / "spectrum.csv", csv.str());
                outputs["spectrum_csv"] = "spectrum.csv";
            } else if (a == "baseline_noise") {
                double rms = baseline_noise_rms(rec, cfg.quiet_masks_s);
                outputs["baseline_noise_rms_t"] = rms;
            } else if (a == "rise_time") {
                RiseTimeResult rt = rise_time_10_90(rec);
                outputs["rise_time_10_90_s"] = rt.rise_10_90_s;
                outputs["rise_time_model_s"] = rt.model_max_tpi_tint_s;
            } else if (a == "inverse_filter") {
                TfConfig tfc;
                tfc.method = TfMethod::analytic_hann;
                tfc.tint_s = cfg.sweep.tint_s;
                tfc.fmax_hz = 0.5 / cfg.sweep.ts_s;
                TransferFunction tf = transfer_function(tfc, cfg.sensor);
                SweepResult comp = inverse_filter(rec, tf, 1e-4);
                write_text(dir / "record_compensated.csv", comp.csv());
                outputs["record_compensated_csv"] = "record_compensated.csv";
            } else {
                throw ConfigError("unknown analysis '" + a + "'");
            }
        }
        write_metadata(dir / "record_metadata.json", cfg, outputs);
        std::cout << "wrote " << (dir / "record.csv").string() << " (" << rec.points.size()
                  << " points)\n";
        return 0;
    });
}

int cmd_bode(const std::filesystem::path& config_path, const CliOverrides& ov) {
    return run_guarded(config_path, [&](ScenarioConfig& cfg) {
        apply_overrides(cfg, ov);
        auto dir = resolve_out_dir(cfg, ov);

        TfConfig analytic{TfMethod::analytic_hann, cfg.bode.tint_s, cfg.bode.fmax_hz,
                          cfg.bode.df_hz, cfg.bode.impulse_sigma_s,
                          ov.backend.value_or(Backend::filter)};
        TfConfig sim = analytic;
        sim.method = TfMethod::sim_impulse;

        TransferFunction tfa = transfer_function(analytic, cfg.sensor);
        TransferFunction tfs = transfer_function(sim, cfg.sensor);

        std::ostringstream csv;
        tfs.write_csv(csv);
        write_text(dir / "bode.csv", csv.str());

        PlotSpec spec;
        spec.title = "sensor transfer function";
        spec.xlabel = "f (Hz)";
        spec.ylabel = "|G|";
        spec.series.push_back({tfs.freqs_hz, tfs.magnitude, "#1f77b4"});
        spec.series.push_back({tfa.freqs_hz, tfa.magnitude, "#555555"});
        write_svg_plot(dir / "bode.svg", spec);

        ordered_json outputs;
        outputs["bode_csv"] = "bode.csv";
        outputs["analytic_minus3db_hz"] = minus3db_frequency_hz(tfa);
        outputs["sim_minus3db_hz"] = minus3db_frequency_hz(tfs);
        outputs["note"] =
            "half-amplitude point of the Hann model sits at f = 1/(tint+tpi); the "
            "half-power (-3 dB) point is lower";
        write_metadata(dir / "bode_metadata.json", cfg, outputs);
        std::cout << "analytic -3dB: " << minus3db_frequency_hz(tfa) / 1e6
                  << " MHz, simulated -3dB: " << minus3db_frequency_hz(tfs) / 1e6 << " MHz\n";
        return 0;
    });
}

int cmd_sensitivity(const std::filesystem::path& config_path, const CliOverrides& ov) {
    return run_guarded(config_path, [&](ScenarioConfig& cfg) {
        apply_overrides(cfg, ov);
        auto dir = resolve_out_dir(cfg, ov);

        std::vector<double> ks;
        for (int k = cfg.sensitivity.k_min; k <= cfg.sensitivity.k_max; ++k)
            ks.push_back(static_cast<double>(k));
        SensitivityCurve curve =
            bmin_curve(cfg.sensor, cfg.sensitivity.tint_s, cfg.sensitivity.tw_s, ks);

        std::ostringstream csv;
        curve.write_csv(csv);
        write_text(dir / "sensitivity.csv", csv.str());

        PlotSpec spec;
        spec.title = "minimum detectable field vs k";
        spec.xlabel = "k";
        spec.ylabel = "Bmin (T/sqrt(Hz))";
        spec.logx = spec.logy = true;
        spec.series.push_back({curve.k, curve.bmin, "#000000"});
        spec.series.push_back({curve.k, curve.branch_k1, "#2ca02c"});
        spec.series.push_back({curve.k, curve.branch_khalf, "#1f77b4"});
        spec.series.push_back({curve.k, curve.branch_decoh, "#d62728"});
        write_svg_plot(dir / "sensitivity.svg", spec);

        auto it = std::min_element(curve.bmin.begin(), curve.bmin.end());
        ordered_json outputs;
        outputs["sensitivity_csv"] = "sensitivity.csv";
        outputs["bmin_min_t_per_sqrthz"] = *it;
        outputs["bmin_argmin_k"] = curve.k[static_cast<std::size_t>(it - curve.bmin.begin())];
        write_metadata(dir / "sensitivity_metadata.json", cfg, outputs);
        std::cout << "Bmin minimum " << *it * 1e6 << " uT/sqrt(Hz) at k = "
                  << curve.k[static_cast<std::size_t>(it - curve.bmin.begin())] << "\n";
        return 0;
    });
}

int cmd_compare(const std::filesystem::path& config_path, const CliOverrides& ov) {
    return run_guarded(config_path, [&](ScenarioConfig& cfg) {
        apply_overrides(cfg, ov);
        TriggeredSignal sig = cfg.make_signal();
        auto dir = resolve_out_dir(cfg, ov);

        SweepConfig diff_cfg = cfg.sweep;
        diff_cfg.protocol = Protocol::differential_echo;
        diff_cfg.k = cfg.compare.k;
        SweepResult diff = run_sweep(diff_cfg, sig, cfg.sensor);
        write_text(dir / "differential.csv", diff.csv());

        ordered_json outputs;
        outputs["differential_csv"] = "differential.csv";

        if (!cfg.compare.differential_only) {
            SweepConfig ram_cfg = cfg.sweep;
            ram_cfg.protocol = Protocol::integrative_ramsey;
            ram_cfg.seed = cfg.seed + 0x9e37;
            SweepResult raw = run_sweep(ram_cfg, sig, cfg.sensor);
            SweepResult rec = reconstruct_ramsey(raw, cfg.sensor);
            write_text(dir / "ramsey_raw.csv", raw.csv());
            write_text(dir / "ramsey_reconstructed.csv", rec.csv());
            outputs["ramsey_raw_csv"] = "ramsey_raw.csv";
            outputs["ramsey_reconstructed_csv"] = "ramsey_reconstructed.csv";
            if (!cfg.quiet_masks_s.empty()) {
                double rms_r = baseline_noise_rms(rec, cfg.quiet_masks_s);
                double rms_d = baseline_noise_rms(diff, cfg.quiet_masks_s);
                outputs["ramsey_baseline_rms_t"] = rms_r;
                outputs["differential_baseline_rms_t"] = rms_d;
                outputs["noise_ratio"] = rms_r / rms_d;
                std::cout << "baseline noise ratio (ramsey/differential): " << rms_r / rms_d
                          << "\n";
            }
        }
        write_metadata(dir / "compare_summary.json", cfg, outputs);
        return 0;
    });
}

int cmd_reconstruct(const std::filesystem::path& config_path, const CliOverrides& ov) {
    return run_guarded(config_path, [&](ScenarioConfig& cfg) {
        apply_overrides(cfg, ov);
        cfg.sweep.protocol = Protocol::integrative_ramsey;
        TriggeredSignal sig = cfg.make_signal();
        auto dir = resolve_out_dir(cfg, ov);

        SweepResult raw = run_sweep(cfg.sweep, sig, cfg.sensor);
        SweepResult rec = reconstruct_ramsey(raw, cfg.sensor);
        write_text(dir / "ramsey_raw.csv", raw.csv());
        write_text(dir / "ramsey_reconstructed.csv", rec.csv());
        plot_record(dir / "ramsey_reconstructed.svg", rec, "Ramsey reconstruction");

        ordered_json outputs;
        outputs["ramsey_raw_csv"] = "ramsey_raw.csv";
        outputs["ramsey_reconstructed_csv"] = "ramsey_reconstructed.csv";
        write_metadata(dir / "reconstruct_metadata.json", cfg, outputs);
        return 0;
    });
}

int cmd_validate(const std::filesystem::path& config_path, const CliOverrides& ov) {
    return run_guarded(config_path, [&](ScenarioConfig& cfg) {
        apply_overrides(cfg, ov);
        TriggeredSignal sig = cfg.make_signal();
        auto diags = sweep_diagnostics(cfg, sig, cfg.sweep.t_stop_s);
        bool hard = false;
        for (const auto& d : diags) {
            std::cout << (d.hard ? "error: " : "note: ") << d.message << "\n";
            hard |= d.hard;
        }
        if (ov.out_dir) {
            // diagnostic dump of the modulation function at the first delay
            auto dir = resolve_out_dir(cfg, ov);
            PulseSequence seq;
            const SweepConfig& sc = cfg.sweep;
            switch (sc.protocol) {
                case Protocol::integrative_ramsey:
                    seq = build_integrative_ramsey(sc.t_start_s, cfg.sensor);
                    break;
                case Protocol::small_interval_ramsey:
                    seq = build_small_interval_ramsey(sc.t_start_s, sc.tint_s, cfg.sensor);
                    break;
                case Protocol::differential_echo:
                    seq = build_differential_echo(sc.t_start_s, sc.tint_s, sc.k, sc.trep_s,
                                                  cfg.sensor);
                    break;
            }
            std::ofstream mod(dir / "modulation.csv");
            build_modulation(seq).dump_csv(mod);
        }
        return hard ? 2 : 0;
    });
}

}  // namespace qscope
