#pragma once

#include <optional>
#include <stdexcept>

namespace qscope {

/// Physical parameters of the two-level sensor.  gamma is the gyromagnetic
/// ratio in angular units (rad s^-1 T^-1); it appears inside phase integrals.
/// The amplitude limit divides by 2*pi explicitly.
struct SensorParams {
    double gamma_rad_per_s_per_t = 1.7608e11;  // gamma/2pi = 28.02 GHz/T
    double t2_s = 14e-6;
    double rabi_hz = 25e6;
    double tm_s = 3e-6;      // arm + readout overhead per sequence
    double readout_c = 0.02; // dimensionless readout efficiency
    std::optional<double> tpi_override_s;

    /// pi-pulse duration, derived from the Rabi frequency unless overridden.
    double tpi_s() const { return tpi_override_s ? *tpi_override_s : 1.0 / (2.0 * rabi_hz); }

    void validate() const {
        if (gamma_rad_per_s_per_t <= 0.0) throw std::invalid_argument("gamma must be positive");
        if (t2_s <= 0.0) throw std::invalid_argument("t2 must be positive");
        if (rabi_hz <= 0.0) throw std::invalid_argument("rabi frequency must be positive");
        if (tm_s <= 0.0) throw std::invalid_argument("tm must be positive");
        if (readout_c <= 0.0 || readout_c > 1.0)
            throw std::invalid_argument("readout_c must be in (0, 1]");
        if (tpi_override_s && *tpi_override_s <= 0.0)
            throw std::invalid_argument("tpi override must be positive");
    }
};

double pi_pulse_duration(const SensorParams& p);

/// Peak-to-peak field limit set by the pi-pulse excitation bandwidth:
/// (gamma/2pi * tpi)^-1.
double amplitude_limit_t(const SensorParams& p);

}  // namespace qscope
