#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "qscope/sim_engine.hpp"

namespace qscope {

enum class Backend { filter, bloch };

const char* backend_name(Backend b);
Backend backend_from_name(const std::string& name);

/// Population -> field conversion mode.  `linear` inverts the linearized
/// response, `arcsine` inverts p = (1 + sin phi)/2 exactly within |phi| < pi/2.
enum class FieldInversion { linear, arcsine };

/// Raised by field_from_population in arcsine mode when |2p - 1| >= 1
/// (phase wrap / linear-range violation).
struct SaturationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SweepConfig {
    Protocol protocol = Protocol::differential_echo;
    double t_start_s = 0.0;
    double t_stop_s = 0.0;
    double ts_s = 4e-9;
    double tint_s = 20e-9;
    int k = 1;
    double trep_s = 0.0;
    double n_shots = 1e4;
    std::uint64_t seed = 0;
    Backend backend = Backend::filter;
    FieldInversion inversion = FieldInversion::linear;
    bool noiseless = false;
    bool hard_budget = false;
    /// Divide the known contrast decay exp(-span/T2) out of the population
    /// before converting to field, the way a calibrated slope would.  When
    /// false the conversion applies the linearized slope verbatim.
    bool contrast_correction = true;
    int jobs = 1;
    double quadrature_step_s = 0.25e-9;
    double bloch_dt_s = 0.25e-9;
};

struct SweepPoint {
    double t_s = 0.0;
    double p_mean = 0.5;
    double p_sem = 0.0;
    double b_est_t = 0.0;
    double b_sem_t = 0.0;
    double b_true_t = 0.0;
};

struct SweepResult {
    std::vector<SweepPoint> points;
    nlohmann::ordered_json metadata;

    /// Header: t_ns,p_mean,p_sem,B_est_T,B_sem_T,B_true_T
    void write_csv(std::ostream& out) const;
    std::string csv() const;
};

/// Equivalent-time sweep of the sample delay t.  Builds the protocol sequence
/// per point, evaluates the chosen backend, applies decoherence and readout
/// sampling.  B_est is filled for the differential protocol only.  Results are
/// bitwise independent of the worker count.
SweepResult run_sweep(const SweepConfig& cfg, const TriggeredSignal& sig,
                      const SensorParams& p);

/// Eq.-style conversion of a population value to field.  The linearized slope
/// is d(2p-1)/dB = 2 k gamma tint.
double field_from_population(double p_val, int k, double tint_s, const SensorParams& p,
                             FieldInversion mode = FieldInversion::linear);

/// Moving-average smoothing plus central-difference derivative of an
/// integrative-Ramsey record.  Points are reported at the smoothing-window
/// centroid; endpoints are trimmed.
SweepResult reconstruct_ramsey(const SweepResult& raw, const SensorParams& p,
                               int window = 4);

struct CycledPoint {
    double t_s = 0.0;
    double p_x = 0.5;
    double p_y = 0.5;
    double phase_rad = 0.0;
    double b_est_t = 0.0;
};

struct CycledResult {
    std::vector<CycledPoint> points;
    nlohmann::ordered_json metadata;
    void write_csv(std::ostream& out) const;  // t_ns,p_x,p_y,phase_rad,B_est_T
};

/// Runs each point twice with final-pi/2 phases psi and psi + pi/2 and forms
/// the atan2 phase estimate, extending the linear range beyond |phi| < pi/2.
CycledResult phase_cycled_readout(const SweepConfig& cfg, const TriggeredSignal& sig,
                                  const SensorParams& p);

}  // namespace qscope
