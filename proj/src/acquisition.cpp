#include "qscope/acquisition.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <functional>
#include <initializer_list>
#include <limits>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

namespace qscope {

namespace {
constexpr double kPi = std::numbers::pi;

void append_csv_row(std::string& out, std::initializer_list<double> vals) {
    char buf[64];
    bool first = true;
    for (double v : vals) {
        if (!first) out += ',';
        std::snprintf(buf, sizeof buf, "%.12g", v);
        out += buf;
        first = false;
    }
    out += '\n';
}

PulseSequence build_for(Protocol proto, double t, const SweepConfig& cfg,
                        const SensorParams& p, double readout_offset = 0.0) {
    PulseSequence seq;
    switch (proto) {
        case Protocol::integrative_ramsey:
            seq = build_integrative_ramsey(t, p);
            break;
        case Protocol::small_interval_ramsey:
            seq = build_small_interval_ramsey(t, cfg.tint_s, p);
            break;
        case Protocol::differential_echo:
            seq = build_differential_echo(t, cfg.tint_s, cfg.k, cfg.trep_s, p);
            break;
    }
    if (readout_offset != 0.0) {
        seq.readout_phase_rad += readout_offset;
        seq.pulses.back().phase_rad += readout_offset;
    }
    return seq;
}

int passages_needed(const SweepConfig& cfg) {
    return cfg.protocol == Protocol::differential_echo ? 2 * cfg.k : 1;
}

/// Resolve the burst length: auto signals (n_passages == 0) get exactly the
/// passages the sequence spans, so there is no field before the first trigger
/// or after the last passage.
TriggeredSignal resolve_burst(const TriggeredSignal& sig, const SweepConfig& cfg) {
    if (sig.n_passages != 0) return sig;
    return TriggeredSignal(sig.waveform, sig.trep_s, passages_needed(cfg),
                           sig.lowpass_rise_10_90_s);
}

double window_centroid_offset(const SweepConfig& cfg, const SensorParams& p) {
    switch (cfg.protocol) {
        case Protocol::integrative_ramsey: return 0.0;
        case Protocol::small_interval_ramsey: return cfg.tint_s / 2.0;
        case Protocol::differential_echo: return (cfg.tint_s + p.tpi_s()) / 2.0;
    }
    return 0.0;
}

struct PointEval {
    double alpha = 0.0;    // raw modulation integral (filter backend)
    double p_ideal = 0.5;
};

PointEval eval_point(const PulseSequence& seq, const TriggeredSignal& sig,
                     const SweepConfig& cfg, const SensorParams& p) {
    PointEval ev;
    if (cfg.backend == Backend::filter) {
        ev.alpha = modulation_phase_integral(seq, sig, p, cfg.quadrature_step_s);
        ev.p_ideal = population_from_phase(ev.alpha, seq.readout_phase_rad);
    } else {
        SensorOutput out = bloch_evolve(seq, sig, p, cfg.bloch_dt_s);
        ev.p_ideal = out.p_ideal;
        ev.alpha = out.phase_rad;
    }
    return ev;
}

std::size_t sweep_point_count(const SweepConfig& cfg) {
    if (cfg.ts_s <= 0.0) throw std::invalid_argument("ts must be positive");
    if (cfg.t_stop_s < cfg.t_start_s) throw std::invalid_argument("t_stop must be >= t_start");
    return static_cast<std::size_t>(
               std::floor((cfg.t_stop_s - cfg.t_start_s) / cfg.ts_s + 1e-9)) + 1;
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
    if (jobs <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            fn(i);
        }
    };
    int nthreads = std::min<int>(jobs, static_cast<int>(n));
    pool.reserve(nthreads);
    for (int w = 0; w < nthreads; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
}

nlohmann::ordered_json sweep_metadata(const SweepConfig& cfg, const TriggeredSignal& sig,
                                      const SensorParams& p) {
    nlohmann::ordered_json md;
    md["protocol"] = protocol_name(cfg.protocol);
    md["backend"] = backend_name(cfg.backend);
    md["t_start_s"] = cfg.t_start_s;
    md["t_stop_s"] = cfg.t_stop_s;
    md["ts_s"] = cfg.ts_s;
    md["tint_s"] = cfg.tint_s;
    md["k"] = cfg.k;
    md["trep_s"] = cfg.trep_s;
    md["n_shots"] = cfg.n_shots;
    md["seed"] = cfg.seed;
    md["noiseless"] = cfg.noiseless;
    md["inversion"] = cfg.inversion == FieldInversion::linear ? "linear" : "arcsine";
    md["contrast_correction"] = cfg.contrast_correction;
    md["waveform"] = sig.waveform.describe();
    md["signal_trep_s"] = sig.trep_s;
    md["signal_n_passages_auto"] = sig.n_passages == 0;
    if (sig.lowpass_rise_10_90_s) md["lowpass_rise_10_90_s"] = *sig.lowpass_rise_10_90_s;
    md["sensor"] = {{"gamma_rad_per_s_per_t", p.gamma_rad_per_s_per_t},
                    {"t2_s", p.t2_s},
                    {"rabi_hz", p.rabi_hz},
                    {"tm_s", p.tm_s},
                    {"readout_c", p.readout_c},
                    {"tpi_s", p.tpi_s()}};
    md["window_centroid_offset_s"] = window_centroid_offset(cfg, p);
    md["assumptions"] = {
        "circuit low-pass modeled first order with tau = rise_10_90 / ln 9",
        "burst semantics: zero field before the first trigger and after the last passage",
        "decoherence span: 2k*trep (differential), free-evolution window (Ramsey)",
        "readout noise model: sigma_p = 1/(2 C sqrt(N)); population inversion slope 2 k gamma tint"};
    return md;
}

}  // namespace

const char* backend_name(Backend b) { return b == Backend::filter ? "filter" : "bloch"; }

Backend backend_from_name(const std::string& name) {
    if (name == "filter") return Backend::filter;
    if (name == "bloch") return Backend::bloch;
    throw std::invalid_argument("unknown backend '" + name + "'");
}

void SweepResult::write_csv(std::ostream& out) const { out << csv(); }

std::string SweepResult::csv() const {
    std::string out = "t_ns,p_mean,p_sem,B_est_T,B_sem_T,B_true_T\n";
    for (const SweepPoint& pt : points)
        append_csv_row(out, {pt.t_s * 1e9, pt.p_mean, pt.p_sem, pt.b_est_t, pt.b_sem_t,
                             pt.b_true_t});
    return out;
}

double field_from_population(double p_val, int k, double tint_s, const SensorParams& p,
                             FieldInversion mode) {
    if (p_val < 0.0 || p_val > 1.0) throw std::invalid_argument("population outside [0, 1]");
    if (k < 1 || tint_s <= 0.0) throw std::invalid_argument("bad k or tint");
    double slope = 2.0 * k * p.gamma_rad_per_s_per_t * tint_s;
    double x = 2.0 * p_val - 1.0;
    if (mode == FieldInversion::arcsine) {
        if (std::abs(x) >= 1.0)
            throw SaturationError("population saturated: |2p-1| >= 1, phase exceeds the linear range");
        return std::asin(x) / slope;
    }
    return x / slope;
}

SweepResult run_sweep(const SweepConfig& cfg, const TriggeredSignal& sig,
                      const SensorParams& p) {
    p.validate();
    std::size_t n = sweep_point_count(cfg);
    TriggeredSignal burst = resolve_burst(sig, cfg);

    // surface hard validation problems before spending time on the sweep
    {
        PulseSequence probe = build_for(cfg.protocol, cfg.t_stop_s, cfg, p);
        ValidateOptions vopts;
        vopts.hard_budget = cfg.hard_budget;
        auto diags = validate(probe, p, vopts);
        if (has_hard_diagnostic(diags)) {
            std::string msg = "sweep aborted by sequence validation:";
            for (const auto& d : diags)
                if (d.hard) msg += " " + d.message;
            throw std::runtime_error(msg);
        }
    }

    SweepResult res;
    res.points.resize(n);
    double slope_den = 2.0 * cfg.k * p.gamma_rad_per_s_per_t * cfg.tint_s;
    double centroid = window_centroid_offset(cfg, p);
    ReadoutModel ro{cfg.n_shots, p.readout_c, cfg.seed};
    bool differential = cfg.protocol == Protocol::differential_echo;

    std::atomic<bool> failed{false};
    std::string fail_msg;
    std::mutex fail_mutex;

    parallel_for(n, cfg.jobs, [&](std::size_t i) {
        if (failed.load(std::memory_order_relaxed)) return;
        try {
            double t = cfg.t_start_s + static_cast<double>(i) * cfg.ts_s;
            PulseSequence seq = build_for(cfg.protocol, t, cfg, p);
            PointEval ev = eval_point(seq, burst, cfg, p);
            double p_dec = apply_decoherence(ev.p_ideal, seq.sensing_span_s(), p);

            SweepPoint pt;
            pt.t_s = t;
            if (cfg.noiseless) {
                pt.p_mean = p_dec;
                pt.p_sem = 0.0;
            } else {
                ReadoutSample rs = sample_readout(p_dec, ro, i);
                pt.p_mean = rs.p_sampled;
                pt.p_sem = rs.sem;
            }
            if (differential) {
                double gain = cfg.contrast_correction
                                  ? std::exp(seq.sensing_span_s() / p.t2_s)
                                  : 1.0;
                // same conversion as field_from_population, applied to the
                // contrast-corrected population
                double x = (2.0 * pt.p_mean - 1.0) * gain;
                bool arcsine = cfg.inversion == FieldInversion::arcsine;
                if (arcsine && std::abs(x) >= 1.0) {
                    pt.b_est_t = std::numeric_limits<double>::quiet_NaN();
                    pt.b_sem_t = std::numeric_limits<double>::quiet_NaN();
                } else {
                    pt.b_est_t = (arcsine ? std::asin(x) : x) / slope_den;
                    double deriv = 2.0 * gain / slope_den;
                    if (arcsine) deriv /= std::sqrt(std::max(1.0 - x * x, 1e-12));
                    pt.b_sem_t = pt.p_sem * deriv;
                }
            } else {
                pt.b_est_t = std::numeric_limits<double>::quiet_NaN();
                pt.b_sem_t = std::numeric_limits<double>::quiet_NaN();
            }
            pt.b_true_t = burst.field(t + centroid);
            res.points[i] = pt;
        } catch (const std::exception& e) {
            std::lock_guard<std::mutex> lock(fail_mutex);
            if (!failed.exchange(true)) fail_msg = e.what();
        }
    });

    if (failed) throw std::runtime_error("sweep point failed: " + fail_msg);
    res.metadata = sweep_metadata(cfg, sig, p);
    res.metadata["n_points"] = n;
    return res;
}

SweepResult reconstruct_ramsey(const SweepResult& raw, const SensorParams& p, int window) {
    p.validate();
    if (window < 2) throw std::invalid_argument("window must be >= 2");
    auto n = raw.points.size();
    if (n < static_cast<std::size_t>(window) + 2)
        throw std::invalid_argument("too few points for Ramsey reconstruction");
    double ts = raw.points[1].t_s - raw.points[0].t_s;
    double gamma = p.gamma_rad_per_s_per_t;

    // contrast-correct each raw point over its own free-evolution span before
    // smoothing (integrative Ramsey: span = t)
    std::vector<double> pc(n), sc(n);
    for (std::size_t i = 0; i < n; ++i) {
        double gain = std::exp(raw.points[i].t_s / p.t2_s);
        pc[i] = 0.5 + (raw.points[i].p_mean - 0.5) * gain;
        sc[i] = raw.points[i].p_sem * gain;
    }

    std::size_t m_count = n - static_cast<std::size_t>(window) + 1;
    std::vector<double> m(m_count), sm(m_count), phi(m_count), sphi(m_count), tm(m_count);
    for (std::size_t i = 0; i < m_count; ++i) {
        double acc = 0.0, var = 0.0;
        for (int j = 0; j < window; ++j) {
            acc += pc[i + j];
            var += sc[i + j] * sc[i + j];
        }
        m[i] = acc / window;
        sm[i] = std::sqrt(var) / window;
        double x = std::clamp(2.0 * m[i] - 1.0, -1.0, 1.0);
        phi[i] = std::asin(x);
        sphi[i] = 2.0 * sm[i] / std::sqrt(std::max(1.0 - x * x, 1e-12));
        tm[i] = raw.points[i].t_s + 0.5 * (window - 1) * ts;
    }

    SweepResult out;
    out.metadata = raw.metadata;
    out.metadata["reconstruction"] = {{"window", window},
                                      {"derivative", "central difference over 2*ts"},
                                      {"timestamps", "smoothing-window centroid"},
                                      {"endpoints", "trimmed"},
                                      {"contrast_correction", "exp(t/T2) per point"}};
    for (std::size_t j = 1; j + 1 < m_count; ++j) {
        SweepPoint pt;
        pt.t_s = tm[j];
        pt.p_mean = m[j];
        pt.p_sem = sm[j];
        pt.b_est_t = (phi[j + 1] - phi[j - 1]) / (2.0 * ts * gamma);
        pt.b_sem_t = std::sqrt(sphi[j + 1] * sphi[j + 1] + sphi[j - 1] * sphi[j - 1]) /
                     (2.0 * ts * gamma) / std::numbers::sqrt2;
        // linear interpolation of the true field at the shifted timestamp
        std::size_t i0 = j + (window - 1) / 2;
        std::size_t i1 = std::min(i0 + 1, n - 1);
        double frac = (tm[j] - raw.points[i0].t_s) / ts;
        pt.b_true_t = raw.points[i0].b_true_t * (1.0 - frac) + raw.points[i1].b_true_t * frac;
        out.points.push_back(pt);
    }
    return out;
}

void CycledResult::write_csv(std::ostream& out) const {
    std::string s = "t_ns,p_x,p_y,phase_rad,B_est_T\n";
    for (const CycledPoint& pt : points)
        append_csv_row(s, {pt.t_s * 1e9, pt.p_x, pt.p_y, pt.phase_rad, pt.b_est_t});
    out << s;
}

CycledResult phase_cycled_readout(const SweepConfig& cfg, const TriggeredSignal& sig,
                                  const SensorParams& p) {
    if (cfg.protocol != Protocol::differential_echo)
        throw std::invalid_argument("phase cycling requires the differential protocol");
    p.validate();
    std::size_t n = sweep_point_count(cfg);
    TriggeredSignal burst = resolve_burst(sig, cfg);
    double slope = 2.0 * cfg.k * p.gamma_rad_per_s_per_t * cfg.tint_s;
    ReadoutModel ro{cfg.n_shots, p.readout_c, cfg.seed};

    CycledResult res;
    res.points.resize(n);
    std::atomic<bool> failed{false};
    std::string fail_msg;
    std::mutex fail_mutex;

    parallel_for(n, cfg.jobs, [&](std::size_t i) {
        try {
            double t = cfg.t_start_s + static_cast<double>(i) * cfg.ts_s;
            PulseSequence seq_x = build_for(cfg.protocol, t, cfg, p, 0.0);
            PulseSequence seq_y = build_for(cfg.protocol, t, cfg, p, kPi / 2.0);
            double px, py;
            if (cfg.backend == Backend::filter) {
                double alpha = modulation_phase_integral(seq_x, burst, p, cfg.quadrature_step_s);
                px = population_from_phase(alpha, seq_x.readout_phase_rad);
                py = population_from_phase(alpha, seq_y.readout_phase_rad);
            } else {
                px = bloch_evolve(seq_x, burst, p, cfg.bloch_dt_s).p_ideal;
                py = bloch_evolve(seq_y, burst, p, cfg.bloch_dt_s).p_ideal;
            }
            double span = seq_x.sensing_span_s();
            px = apply_decoherence(px, span, p);
            py = apply_decoherence(py, span, p);
            if (!cfg.noiseless) {
                px = sample_readout(px, ro, i, 0).p_sampled;
                py = sample_readout(py, ro, i, 1).p_sampled;
            }
            CycledPoint pt;
            pt.t_s = t;
            pt.p_x = px;
            pt.p_y = py;
            // alpha - psi from the quadrature pair; signal phase via readout sign
            double rel = std::atan2(2.0 * py - 1.0, 2.0 * px - 1.0);
            double alpha_hat = seq_x.readout_phase_rad + rel;
            pt.phase_rad = seq_x.readout_sign * alpha_hat;
            pt.b_est_t = pt.phase_rad / slope;
            res.points[i] = pt;
        } catch (const std::exception& e) {
            std::lock_guard<std::mutex> lock(fail_mutex);
            if (!failed.exchange(true)) fail_msg = e.what();
        }
    });
    if (failed) throw std::runtime_error("cycled sweep point failed: " + fail_msg);
    res.metadata = sweep_metadata(cfg, sig, p);
    res.metadata["phase_cycling"] = "final pi/2 at psi and psi + pi/2";
    return res;
}

}  // namespace qscope
