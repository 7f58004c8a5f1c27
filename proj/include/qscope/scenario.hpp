#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qscope/acquisition.hpp"
#include "qscope/analysis.hpp"

namespace qscope {

/// A full scenario: sensor + signal + sweep + requested analyses, loaded from
/// a single structured config file (JSON with nested tables).
struct ScenarioConfig {
    SensorParams sensor;

    // signal block
    std::string waveform_builtin;  // one of: builtin | expr | file (exactly one set)
    std::string waveform_expr;
    std::filesystem::path waveform_file;
    double trep_s = 0.0;
    int n_passages = 0;
    std::optional<double> lowpass_rise_10_90_s;

    SweepConfig sweep;

    std::vector<std::string> analysis;
    std::vector<std::pair<double, double>> quiet_masks_s;

    struct BodeBlock {
        double tint_s = 20e-9;
        double fmax_hz = 60e6;
        double df_hz = 0.25e6;
        double impulse_sigma_s = 0.5e-9;
    } bode;

    struct SensitivityBlock {
        double tint_s = 20e-9;
        double tw_s = 344e-9;
        int k_min = 1;
        int k_max = 64;
    } sensitivity;

    struct CompareBlock {
        bool differential_only = false;
        int k = 2;
    } compare;

    std::filesystem::path output_dir = "out";
    std::uint64_t seed = 1;
    int jobs = 1;

    std::string config_hash;  // FNV-1a of the config file bytes
    nlohmann::ordered_json raw;

    static ScenarioConfig load(const std::filesystem::path& path);

    TriggeredSignal make_signal() const;
};

struct CliOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
    std::optional<Backend> backend;
    std::optional<std::filesystem::path> out_dir;
};

// Subcommand entry points.  Exit codes: 0 success, 1 I/O error,
// 2 validation diagnostics.
int cmd_simulate(const std::filesystem::path& config_path, const CliOverrides& ov = {});
int cmd_bode(const std::filesystem::path& config_path, const CliOverrides& ov = {});
int cmd_sensitivity(const std::filesystem::path& config_path, const CliOverrides& ov = {});
int cmd_compare(const std::filesystem::path& config_path, const CliOverrides& ov = {});
int cmd_reconstruct(const std::filesystem::path& config_path, const CliOverrides& ov = {});
int cmd_validate(const std::filesystem::path& config_path, const CliOverrides& ov = {});

}  // namespace qscope
