#include <doctest.h>

#include <numbers>

#include "qscope/sensor.hpp"

using namespace qscope;

TEST_CASE("pi pulse duration from the Rabi frequency") {
    SensorParams p;
    p.rabi_hz = 25e6;
    CHECK(pi_pulse_duration(p) * 1e9 == doctest::Approx(20.0).epsilon(1e-12));
    p.rabi_hz = 500e6;
    CHECK(pi_pulse_duration(p) * 1e9 == doctest::Approx(1.0).epsilon(1e-12));
    p.rabi_hz = 250e6;
    CHECK(pi_pulse_duration(p) * 1e9 == doctest::Approx(2.0).epsilon(1e-12));

    p.rabi_hz = 25e6;
    p.tpi_override_s = 15e-9;
    CHECK(pi_pulse_duration(p) * 1e9 == doctest::Approx(15.0));
}

TEST_CASE("amplitude limit") {
    SensorParams p;  // defaults: gamma/2pi = 28.02 GHz/T, tpi = 20 ns
    double limit = amplitude_limit_t(p);
    CHECK(limit * 1e3 == doctest::Approx(1.784).epsilon(1e-3));

    // identity: limit * (gamma/2pi) * tpi == 1 exactly
    double gamma_hz = p.gamma_rad_per_s_per_t / (2.0 * std::numbers::pi);
    CHECK(limit * gamma_hz * p.tpi_s() == doctest::Approx(1.0).epsilon(1e-14));

    // tpi halved -> limit doubled
    SensorParams fast = p;
    fast.rabi_hz = 2.0 * p.rabi_hz;
    CHECK(amplitude_limit_t(fast) / limit == doctest::Approx(2.0).epsilon(1e-12));

    // gamma doubled -> limit halved
    SensorParams heavy = p;
    heavy.gamma_rad_per_s_per_t = 2.0 * p.gamma_rad_per_s_per_t;
    CHECK(amplitude_limit_t(heavy) / limit == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("default parameters reproduce the reference sensor") {
    SensorParams p;
    CHECK(p.gamma_rad_per_s_per_t / (2.0 * std::numbers::pi) ==
          doctest::Approx(28.02e9).epsilon(1e-3));
    CHECK(p.t2_s * 1e6 == doctest::Approx(14.0));
    CHECK(p.tm_s * 1e6 == doctest::Approx(3.0));
    CHECK(p.readout_c == doctest::Approx(0.02));
    CHECK(p.rabi_hz == doctest::Approx(25e6));
    CHECK(p.tpi_s() * 1e9 == doctest::Approx(20.0));
}

TEST_CASE("parameter validation") {
    SensorParams p;
    p.readout_c = 0.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p.readout_c = 1.5;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = SensorParams{};
    p.t2_s = -1.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = SensorParams{};
    p.tpi_override_s = 0.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}
