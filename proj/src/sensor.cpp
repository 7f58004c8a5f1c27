#include "qscope/sensor.hpp"

#include <numbers>

namespace qscope {

double pi_pulse_duration(const SensorParams& p) {
    p.validate();
    return p.tpi_s();
}

double amplitude_limit_t(const SensorParams& p) {
    p.validate();
    double gamma_hz_per_t = p.gamma_rad_per_s_per_t / (2.0 * std::numbers::pi);
    return 1.0 / (gamma_hz_per_t * p.tpi_s());
}

}  // namespace qscope
