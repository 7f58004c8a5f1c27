#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

const char* kBin = QSCOPE_BIN;
const char* kScenarios = QSCOPE_SCENARIO_DIR;

fs::path work_dir() {
    static fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "qscope_cli_tests";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

int run(const std::string& args) {
    std::string cmd = std::string(kBin) + " " + args + " >" +
                      (work_dir() / "stdout.txt").string() + " 2>" +
                      (work_dir() / "stderr.txt").string();
    int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t line_count(const fs::path& p) {
    std::string s = slurp(p);
    return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

fs::path scenario(const char* name) { return fs::path(kScenarios) / name; }

}  // namespace

TEST_CASE("simulate: desk-scale fig4 scenario writes a 280-row record") {
    fs::path out = work_dir() / "fig4_desk";
    int rc = run("simulate " + scenario("fig4_desk.json").string() + " --out " + out.string());
    CHECK(rc == 0);
    CHECK(line_count(out / "record.csv") == 281);  // header + 280 points
    CHECK(fs::exists(out / "record_metadata.json"));
    CHECK(fs::exists(out / "record.svg"));
    CHECK(fs::exists(out / "spectrum.csv"));

    auto md = nlohmann::json::parse(slurp(out / "record_metadata.json"));
    CHECK(md.contains("config_hash"));
    CHECK(md["outputs"].contains("baseline_noise_rms_t"));
}

TEST_CASE("simulate: byte-identical across reruns and worker counts") {
    fs::path a = work_dir() / "det_a";
    fs::path b = work_dir() / "det_b";
    fs::path c = work_dir() / "det_c";
    CHECK(run("simulate " + scenario("fig4_desk.json").string() + " --jobs 1 --out " +
              a.string()) == 0);
    CHECK(run("simulate " + scenario("fig4_desk.json").string() + " --jobs 4 --out " +
              b.string()) == 0);
    CHECK(run("simulate " + scenario("fig4_desk.json").string() + " --jobs 1 --out " +
              c.string()) == 0);
    CHECK(slurp(a / "record.csv") == slurp(b / "record.csv"));
    CHECK(slurp(a / "record.csv") == slurp(c / "record.csv"));
}

TEST_CASE("simulate: hard coherence-budget violation exits 2") {
    fs::path out = work_dir() / "budget";
    int rc = run("simulate " + scenario("validate_budget.json").string() + " --out " +
                 out.string());
    CHECK(rc == 2);
    CHECK(slurp(work_dir() / "stderr.txt").find("budget") != std::string::npos);
}

TEST_CASE("simulate: missing waveform file exits 1") {
    fs::path cfg = work_dir() / "missing_wf.json";
    {
        std::ofstream out(cfg);
        out << R"({"signal": {"file": "/nonexistent/wf.txt", "trep_s": 5e-7},
                   "sweep": {"protocol": "differential_echo", "t_stop_s": 1e-7,
                             "ts_s": 4e-9, "tint_s": 2e-8, "k": 1},
                   "output_dir": ")" << (work_dir() / "missing_out").string() << R"("})";
    }
    CHECK(run("simulate " + cfg.string()) == 1);
}

TEST_CASE("simulate: unreadable config exits 1, malformed config exits 2") {
    CHECK(run("simulate /nonexistent/config.json") == 1);
    fs::path cfg = work_dir() / "broken.json";
    {
        std::ofstream out(cfg);
        out << "{ not json";
    }
    CHECK(run("simulate " + cfg.string()) == 2);
}

TEST_CASE("validate: diagnostics and exit codes") {
    CHECK(run("validate " + scenario("validate_budget.json").string()) == 2);
    CHECK(slurp(work_dir() / "stdout.txt").find("budget_exceeded") != std::string::npos);

    CHECK(run("validate " + scenario("validate_amplitude.json").string()) == 0);
    CHECK(slurp(work_dir() / "stdout.txt").find("amplitude_warning") != std::string::npos);

    CHECK(run("validate " + scenario("fig4_desk.json").string()) == 0);
    CHECK(slurp(work_dir() / "stdout.txt").find("ok") != std::string::npos);
}

TEST_CASE("bode: CSV with unity DC magnitude and both -3 dB estimates") {
    fs::path out = work_dir() / "bode";
    CHECK(run("bode " + scenario("fig2_bode.json").string() + " --out " + out.string()) == 0);
    std::string csv = slurp(out / "bode.csv");
    CHECK(csv.rfind("f_hz,mag,mag_db,model_mag\n", 0) == 0);
    // first data row is DC with magnitude 1
    std::istringstream ss(csv);
    std::string header, dc;
    std::getline(ss, header);
    std::getline(ss, dc);
    CHECK(dc.rfind("0,1,", 0) == 0);
    CHECK(fs::exists(out / "bode.svg"));

    auto md = nlohmann::json::parse(slurp(out / "bode_metadata.json"));
    double f3_analytic = md["outputs"]["analytic_minus3db_hz"].get<double>();
    double f3_sim = md["outputs"]["sim_minus3db_hz"].get<double>();
    CHECK(f3_analytic == doctest::Approx(18.0e6).epsilon(0.3 / 18.0));
    CHECK(f3_sim > 15e6);
    CHECK(f3_sim < 30e6);
}

TEST_CASE("sensitivity: curve written, bad k range rejected") {
    fs::path out = work_dir() / "sens";
    CHECK(run("sensitivity " + scenario("fig3_sensitivity.json").string() + " --out " +
              out.string()) == 0);
    CHECK(line_count(out / "sensitivity.csv") == 65);  // header + k = 1..64
    CHECK(fs::exists(out / "sensitivity.svg"));

    fs::path cfg = work_dir() / "neg_k.json";
    {
        std::ofstream o(cfg);
        o << R"({"sensitivity": {"k_min": -3, "k_max": 8}, "output_dir": ")"
          << (work_dir() / "neg_out").string() << R"("})";
    }
    CHECK(run("sensitivity " + cfg.string()) == 2);
}

TEST_CASE("compare: writes paired records and the noise ratio") {
    fs::path out = work_dir() / "compare";
    CHECK(run("compare " + scenario("compare_square.json").string() + " --out " +
              out.string()) == 0);
    CHECK(fs::exists(out / "differential.csv"));
    CHECK(fs::exists(out / "ramsey_raw.csv"));
    CHECK(fs::exists(out / "ramsey_reconstructed.csv"));
    auto md = nlohmann::json::parse(slurp(out / "compare_summary.json"));
    CHECK(md["outputs"]["noise_ratio"].get<double>() >= 1.5);
}

TEST_CASE("compare: differential-only request omits the ratio") {
    fs::path cfg = work_dir() / "diff_only.json";
    {
        std::ofstream o(cfg);
        o << R"({"signal": {"builtin": "square270", "trep_s": 5e-7},
                 "sweep": {"t_stop_s": 4.4e-7, "ts_s": 4e-9, "tint_s": 2e-8, "n_shots": 1e6},
                 "compare": {"k": 2, "differential_only": true},
                 "output_dir": ")" << (work_dir() / "diff_only_out").string() << R"(",
                 "seed": 3})";
    }
    fs::path out = work_dir() / "diff_only_out";
    CHECK(run("compare " + cfg.string()) == 0);
    CHECK(fs::exists(out / "differential.csv"));
    CHECK(!fs::exists(out / "ramsey_raw.csv"));
    auto md = nlohmann::json::parse(slurp(out / "compare_summary.json"));
    CHECK(!md["outputs"].contains("noise_ratio"));
}

TEST_CASE("validate with --out dumps the modulation function") {
    fs::path out = work_dir() / "modulation";
    CHECK(run("validate " + scenario("fig3_k8.json").string() + " --out " + out.string()) == 0);
    std::string csv = slurp(out / "modulation.csv");
    CHECK(csv.rfind("T_ns,f", 0) == 0);
    CHECK(line_count(out / "modulation.csv") > 100);
}

TEST_CASE("QSCOPE_OUT resolves relative output directories") {
    fs::path base = work_dir() / "envbase";
    fs::create_directories(base);
    std::string cmd = "QSCOPE_OUT=" + base.string() + " " + std::string(kBin) +
                      " sensitivity " + scenario("fig3_sensitivity.json").string() +
                      " --out rel_dir >/dev/null 2>&1";
    CHECK(WEXITSTATUS(std::system(cmd.c_str())) == 0);
    CHECK(fs::exists(base / "rel_dir" / "sensitivity.csv"));
}

TEST_CASE("simulate with the inverse_filter analysis writes a compensated record") {
    fs::path cfg = work_dir() / "invfilter.json";
    {
        std::ofstream o(cfg);
        o << R"({"signal": {"builtin": "fig4", "trep_s": 1.4e-6},
                 "sweep": {"t_stop_s": 1.116e-6, "ts_s": 4e-9, "tint_s": 2e-8, "k": 4,
                           "noiseless": true, "inversion": "arcsine"},
                 "analysis": ["inverse_filter"],
                 "output_dir": ")" << (work_dir() / "invfilter_out").string() << R"("})";
    }
    fs::path out = work_dir() / "invfilter_out";
    CHECK(run("simulate " + cfg.string()) == 0);
    CHECK(line_count(out / "record_compensated.csv") == 281);
}

TEST_CASE("reconstruct: raw and reconstructed records") {
    fs::path out = work_dir() / "reconstruct";
    CHECK(run("reconstruct " + scenario("fig2_ramsey.json").string() + " --out " +
              out.string()) == 0);
    CHECK(line_count(out / "ramsey_raw.csv") == 57);           // header + 56 points
    CHECK(line_count(out / "ramsey_reconstructed.csv") == 52); // trimmed by window + diff
}
