#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qscope/sensor.hpp"

namespace qscope {

enum class Protocol { integrative_ramsey, small_interval_ramsey, differential_echo };

const char* protocol_name(Protocol p);
Protocol protocol_from_name(const std::string& name);

/// A control pulse.  `start_s` is global time relative to the first waveform
/// trigger; phase 0 = x axis, pi/2 = y axis.
struct Pulse {
    double start_s = 0.0;
    double duration_s = 0.0;
    double angle_rad = 0.0;
    double phase_rad = 0.0;
    double end_s() const { return start_s + duration_s; }
};

struct PulseSequence {
    std::vector<Pulse> pulses;  // time ordered, non-overlapping
    Protocol protocol = Protocol::integrative_ramsey;
    int k = 1;
    double trep_s = 0.0;  // differential protocol only
    double t_s = 0.0;     // sample delay
    double tint_s = 0.0;  // integration window (0 for integrative Ramsey)
    double readout_phase_rad = 0.0;
    int readout_sign = +1;  // +1: p = (1+sin a)/2, -1: p = (1-sin a)/2

    /// Modulation-function support [sense_begin, sense_end].
    double sense_begin_s = 0.0;
    double sense_end_s = 0.0;

    /// Total span including the pi/2 pulses.
    double span_s() const { return pulses.back().end_s() - pulses.front().start_s; }

    /// Span entering the decoherence exponent: 2k*trep for the differential
    /// protocol, the free-evolution window for the Ramsey protocols.
    double sensing_span_s() const;

    /// One pulse per line: "start_ns duration_ns angle_deg phase_deg".
    std::string dump() const;
};

PulseSequence build_integrative_ramsey(double t_s, const SensorParams& p);
PulseSequence build_small_interval_ramsey(double t_s, double tint_s, const SensorParams& p);
PulseSequence build_differential_echo(double t_s, double tint_s, int k, double trep_s,
                                      const SensorParams& p);

enum class DiagCode { ok, budget_exceeded, pulse_overlap, amplitude_warning };

struct Diagnostic {
    DiagCode code = DiagCode::ok;
    bool hard = false;  // hard diagnostics should abort a run
    std::string message;
};

struct ValidateOptions {
    bool hard_budget = false;     // treat the coherence budget as an error
    double budget_factor = 1.0;   // flag when sensing span > factor * T2
    std::optional<double> waveform_bpp_t;  // peak-to-peak field, if known
};

/// Returns diagnostics; never throws.  An empty-issue result contains one
/// `ok` entry.
std::vector<Diagnostic> validate(const PulseSequence& seq, const SensorParams& p,
                                 const ValidateOptions& opts = {});

bool has_hard_diagnostic(const std::vector<Diagnostic>& diags);

}  // namespace qscope
