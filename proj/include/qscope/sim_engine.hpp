#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "qscope/sensor.hpp"
#include "qscope/sequence.hpp"
#include "qscope/waveform.hpp"

namespace qscope {

/// Piecewise description of the sensor's signed phase-sensitivity weight
/// f(T) over the sequence span.  f = +1 right after the initial pi/2; every
/// pi pulse maps f -> -f through a cosine ramp of width tpi; f = 0 outside
/// the sensing window.
class ModulationFunction {
public:
    struct Segment {
        double t0_s = 0.0, t1_s = 0.0;
        bool ramp = false;
        double sign = 1.0;          // constant value, or the sign entering a ramp
        double pulse_start_s = 0.0; // ramp: f = sign * cos(pi (T - start) / tpi)
        double tpi_s = 0.0;
    };

    explicit ModulationFunction(std::vector<Segment> segs);

    double operator()(double T_s) const;
    double begin_s() const { return begin_; }
    double end_s() const { return end_; }
    const std::vector<Segment>& segments() const { return segs_; }

    /// CSV dump "T_ns,f" on a uniform grid.
    void dump_csv(std::ostream& out, double dt_s = 0.5e-9) const;

private:
    std::vector<Segment> segs_;
    double begin_ = 0.0, end_ = 0.0;
};

ModulationFunction build_modulation(const PulseSequence& seq);

/// Phase integral phi = integral of gamma * B(T) * f(T) dT, returned in the
/// readout convention of the sequence so that p_ideal = (1 + sin phi)/2.
/// Fixed-step midpoint quadrature, segment aligned.
double phase_filter(const PulseSequence& seq, const TriggeredSignal& sig,
                    const SensorParams& p, double step_s = 0.25e-9);

/// Raw modulation integral (f normalized to +1 after the initial pi/2),
/// before the readout sign convention is applied.
double modulation_phase_integral(const PulseSequence& seq, const TriggeredSignal& sig,
                                 const SensorParams& p, double step_s = 0.25e-9);

/// Ideal population for a given raw phase integral and readout phase:
/// p = (1 + cos(alpha - psi)) / 2.
double population_from_phase(double alpha_rad, double readout_phase_rad);

struct SensorOutput {
    double p_ideal = 0.5;
    double p_decohered = 0.5;
    double p_sampled = 0.5;
    double sem = 0.0;
    double phase_rad = 0.0;
    double norm_error = 0.0;  // |c0^2 + c1^2 - 1| at the end of the evolution
};

/// Exact two-level rotating-frame oracle.  Time-steps the state with the
/// closed-form 2x2 unitary of the piecewise-constant Hamiltonian
/// H = gamma B(T)/2 sigma_z + Omega/2 (cos(phase) sigma_x + sin(phase) sigma_y)
/// over each dt.  Fills p_ideal and phase only.
SensorOutput bloch_evolve(const PulseSequence& seq, const TriggeredSignal& sig,
                          const SensorParams& p, double dt_s = 0.25e-9);

/// Contrast decay about 1/2: p -> 1/2 + (p - 1/2) exp(-span / T2).
double apply_decoherence(double p_ideal, double span_s, const SensorParams& p);

struct ReadoutModel {
    double n_shots = 1;
    double readout_c = 0.02;
    std::uint64_t rng_seed = 0;
};

struct ReadoutSample {
    double p_sampled = 0.5;
    double sem = 0.0;
};

/// Photon-shot-noise standard deviation of the population estimate,
/// sigma_p = 1 / (2 C sqrt(N)).
double readout_sigma_p(const ReadoutModel& r);

/// Gaussian-model projective readout: p_dec + sigma_p * z, clipped to [0, 1].
/// Deterministic for a fixed (seed, point index, draw index).
ReadoutSample sample_readout(double p_dec, const ReadoutModel& r,
                             std::uint64_t point_index, std::uint64_t draw_index = 0);

}  // namespace qscope
