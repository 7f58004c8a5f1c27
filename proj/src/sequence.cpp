#include "qscope/sequence.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

namespace qscope {

namespace {
constexpr double kPi = std::numbers::pi;
}

const char* protocol_name(Protocol p) {
    switch (p) {
        case Protocol::integrative_ramsey: return "integrative_ramsey";
        case Protocol::small_interval_ramsey: return "small_interval_ramsey";
        case Protocol::differential_echo: return "differential_echo";
    }
    return "?";
}

Protocol protocol_from_name(const std::string& name) {
    if (name == "integrative_ramsey") return Protocol::integrative_ramsey;
    if (name == "small_interval_ramsey") return Protocol::small_interval_ramsey;
    if (name == "differential_echo") return Protocol::differential_echo;
    throw std::invalid_argument("unknown protocol '" + name + "'");
}

double PulseSequence::sensing_span_s() const {
    switch (protocol) {
        case Protocol::integrative_ramsey: return t_s;
        case Protocol::small_interval_ramsey: return tint_s;
        case Protocol::differential_echo: return 2.0 * k * trep_s;
    }
    return 0.0;
}

std::string PulseSequence::dump() const {
    std::string out;
    char buf[128];
    for (const Pulse& p : pulses) {
        std::snprintf(buf, sizeof buf, "%.6g %.6g %.6g %.6g\n", p.start_s * 1e9,
                      p.duration_s * 1e9, p.angle_rad * 180.0 / kPi,
                      p.phase_rad * 180.0 / kPi);
        out += buf;
    }
    return out;
}

PulseSequence build_integrative_ramsey(double t_s, const SensorParams& p) {
    p.validate();
    if (t_s < 0.0) throw std::invalid_argument("sample delay t must be >= 0");
    double tpi = p.tpi_s();
    PulseSequence s;
    s.protocol = Protocol::integrative_ramsey;
    s.t_s = t_s;
    s.tint_s = 0.0;
    s.k = 1;
    s.readout_phase_rad = kPi / 2.0;
    s.readout_sign = +1;
    s.pulses.push_back({-tpi / 2.0, tpi / 2.0, kPi / 2.0, 0.0});
    s.pulses.push_back({t_s, tpi / 2.0, kPi / 2.0, s.readout_phase_rad});
    s.sense_begin_s = 0.0;
    s.sense_end_s = t_s;
    return s;
}

PulseSequence build_small_interval_ramsey(double t_s, double tint_s, const SensorParams& p) {
    p.validate();
    if (t_s < 0.0) throw std::invalid_argument("sample delay t must be >= 0");
    if (tint_s <= 0.0) throw std::invalid_argument("tint must be positive");
    double tpi = p.tpi_s();
    PulseSequence s;
    s.protocol = Protocol::small_interval_ramsey;
    s.t_s = t_s;
    s.tint_s = tint_s;
    s.k = 1;
    s.readout_phase_rad = kPi / 2.0;
    s.readout_sign = +1;
    s.pulses.push_back({t_s - tpi / 2.0, tpi / 2.0, kPi / 2.0, 0.0});
    s.pulses.push_back({t_s + tint_s, tpi / 2.0, kPi / 2.0, s.readout_phase_rad});
    s.sense_begin_s = t_s;
    s.sense_end_s = t_s + tint_s;
    return s;
}

PulseSequence build_differential_echo(double t_s, double tint_s, int k, double trep_s,
                                      const SensorParams& p) {
    p.validate();
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    if (t_s < 0.0) throw std::invalid_argument("sample delay t must be >= 0");
    if (tint_s <= 0.0) throw std::invalid_argument("tint must be positive");
    if (trep_s <= 0.0) throw std::invalid_argument("trep must be positive");
    double tpi = p.tpi_s();
    if (t_s + tint_s + tpi > trep_s * (1.0 + 1e-12))
        throw std::invalid_argument(
            "pulse collision: t + tint + tpi exceeds trep, pi pulses of adjacent "
            "passages overlap");

    PulseSequence s;
    s.protocol = Protocol::differential_echo;
    s.t_s = t_s;
    s.tint_s = tint_s;
    s.k = k;
    s.trep_s = trep_s;
    // Readout pi/2 is 90 deg behind the first pulse so that positive B maps to
    // p > 1/2 (p = (1 + sin(2k*gamma*B*tint))/2 for constant B).
    s.readout_phase_rad = -kPi / 2.0;
    s.readout_sign = -1;

    s.pulses.push_back({-tpi / 2.0, tpi / 2.0, kPi / 2.0, 0.0});
    for (int i = 0; i < 2 * k; ++i) {
        double start = static_cast<double>(i) * trep_s + t_s + (i % 2 ? tint_s : 0.0);
        s.pulses.push_back({start, tpi, kPi, 0.0});
    }
    double end = 2.0 * k * trep_s;
    s.pulses.push_back({end, tpi / 2.0, kPi / 2.0, s.readout_phase_rad});
    s.sense_begin_s = 0.0;
    s.sense_end_s = end;
    return s;
}

std::vector<Diagnostic> validate(const PulseSequence& seq, const SensorParams& p,
                                 const ValidateOptions& opts) {
    std::vector<Diagnostic> diags;
    char buf[256];

    for (std::size_t i = 0; i + 1 < seq.pulses.size(); ++i) {
        if (seq.pulses[i].end_s() > seq.pulses[i + 1].start_s + 1e-15) {
            std::snprintf(buf, sizeof buf,
                          "overlap: pulse %zu ends at %.6g ns after pulse %zu starts at %.6g ns",
                          i, seq.pulses[i].end_s() * 1e9, i + 1,
                          seq.pulses[i + 1].start_s * 1e9);
            diags.push_back({DiagCode::pulse_overlap, true, buf});
        }
    }

    double span = seq.sensing_span_s();
    if (span > opts.budget_factor * p.t2_s * (1.0 + 1e-12)) {
        std::snprintf(buf, sizeof buf,
                      "budget_exceeded: sensing span %.6g us exceeds %.3g x T2 = %.6g us",
                      span * 1e6, opts.budget_factor, opts.budget_factor * p.t2_s * 1e6);
        diags.push_back({DiagCode::budget_exceeded, opts.hard_budget, buf});
    }

    if (opts.waveform_bpp_t) {
        double limit = amplitude_limit_t(p);
        if (*opts.waveform_bpp_t > limit) {
            std::snprintf(buf, sizeof buf,
                          "amplitude_warning: waveform peak-to-peak %.6g mT exceeds the "
                          "pi-pulse bandwidth limit %.6g mT",
                          *opts.waveform_bpp_t * 1e3, limit * 1e3);
            diags.push_back({DiagCode::amplitude_warning, false, buf});
        }
    }

    if (diags.empty()) diags.push_back({DiagCode::ok, false, "ok"});
    return diags;
}

bool has_hard_diagnostic(const std::vector<Diagnostic>& diags) {
    for (const auto& d : diags)
        if (d.hard) return true;
    return false;
}

}  // namespace qscope
