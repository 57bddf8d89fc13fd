#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "kslab/config.hpp"
#include "kslab/errors.hpp"

using namespace kslab;
using namespace kslab::config;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code = -1;
    std::string out, err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path fresh_dir(const std::string& name) {
    auto d = fs::temp_directory_path() / ("kslab_cli_test_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

Outcome run_cli(const std::string& args, const fs::path& dir) {
    auto o = dir / "stdout.txt", e = dir / "stderr.txt";
    std::string cmd = std::string(KSLAB_CLI_PATH) + " " + args + " > " + o.string() + " 2> " + e.string();
    int status = std::system(cmd.c_str());
    Outcome r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(o);
    r.err = slurp(e);
    return r;
}

}  // namespace

TEST_SUITE("cli") {
    TEST_CASE("every command has a complete default configuration") {
        for (auto c : {Command::spectrum, Command::modulate, Command::simulate, Command::verify, Command::tables}) {
            RunConfig cfg(c);
            for (const auto& s : parameter_specs(c)) CHECK(cfg.has(s.key));
            CHECK(cfg.has("seed"));
            CHECK(command_from_string(to_string(c)) == c);
        }
        RunConfig s(Command::spectrum);
        CHECK(s.reals("nu") == std::vector<double>{0.01, 0.001, 0.0001});
        CHECK(s.real("beta") == 0.5);
        CHECK(s.integer("n") == 4);
        CHECK_FALSE(s.boolean("refined"));
    }

    TEST_CASE("configuration text round trips exactly") {
        RunConfig a(Command::simulate);
        a.set("mass_factor", "0.9");
        a.set("preset", "Q_plus_bump");
        a.set("r_floor", "3.3333333333333335e-09");
        a.output_dir = "/tmp/x";
        auto text = a.to_text();
        CHECK(text.find("mass_factor = 0.9\n") != std::string::npos);
        auto b = RunConfig::from_text(text);
        CHECK(a == b);
        CHECK(b.to_text() == text);
        CHECK(b.real("r_floor") == 3.3333333333333335e-09);
    }

    TEST_CASE("bad configuration input is rejected") {
        RunConfig c(Command::modulate);
        CHECK_THROWS_AS(c.set("no_such_key", "1"), ParameterError);
        CHECK_THROWS_AS(c.set("mode", "sideways"), ParameterError);
        CHECK_THROWS_AS(c.set("modes", "2.5"), ParameterError);
        CHECK_THROWS_AS(c.set("tau0", ""), ParameterError);
        CHECK_THROWS_AS(c.apply_text("command = spectrum\n"), ParameterError);
        CHECK_THROWS_AS(c.apply_text("tau0 10\n"), ParameterError);
        CHECK_THROWS_AS(c.apply_pair("tau0"), ParameterError);
        c.apply_text("# comment\n tau0 = 20  # trailing\n\n");
        CHECK(c.real("tau0") == 20.0);
        CHECK_THROWS_AS(RunConfig::from_text("tau0 = 20\n"), ParameterError);
    }

    TEST_CASE("spectrum writes one report per nu") {
        auto d = fresh_dir("spectrum");
        auto r = run_cli("spectrum nu=0.01,0.001 n=2 ppd=32 refined=true --out " + d.string(), d);
        REQUIRE(r.code == 0);
        CHECK(fs::exists(d / "config.txt"));
        for (const char* tag : {"0.01", "0.001"}) {
            auto csv = slurp(d / (std::string("spectrum_nu_") + tag + ".csv"));
            std::istringstream in(csv);
            std::string line;
            std::getline(in, line);
            CHECK(line == "n,alpha_computed,alpha_leading,alpha_refined,residual_scaled,norm_sq");
            int rows = 0;
            while (std::getline(in, line)) {
                CHECK((line.find(",,") == std::string::npos) == (rows <= 1));
                ++rows;
            }
            CHECK(rows == 3);
            auto j = nlohmann::json::parse(slurp(d / (std::string("spectrum_nu_") + tag + ".json")));
            CHECK(j["eigenvalues"].size() == 3);
        }
        auto cfg = RunConfig::from_text(slurp(d / "config.txt"));
        CHECK(cfg.reals("nu") == std::vector<double>{0.01, 0.001});
    }

    TEST_CASE("parameter errors exit with code 2 and print the usage") {
        auto d = fresh_dir("param");
        auto r = run_cli("spectrum beta= --out " + d.string(), d);
        CHECK(r.code == 2);
        CHECK(r.err.find("beta") != std::string::npos);
        CHECK(r.err.find("Usage") != std::string::npos);
        CHECK(run_cli("spectrum colour=blue --out " + d.string(), d).code == 2);
        CHECK(run_cli("spectrum nu=1e-7 --out " + d.string(), d).code == 2);
        CHECK(run_cli("simulate --config " + (d / "missing.txt").string(), d).code == 2);
    }

    TEST_CASE("modulate is deterministic") {
        auto a = fresh_dir("mod_a"), b = fresh_dir("mod_b");
        std::string args = "modulate tau_end=10000 output_points=100 --out ";
        REQUIRE(run_cli(args + a.string(), a).code == 0);
        REQUIRE(run_cli(args + b.string(), b).code == 0);
        for (const char* f : {"trajectory.csv", "law.csv", "summary.json"}) {
            auto x = slurp(a / f);
            CHECK_FALSE(x.empty());
            CHECK(x == slurp(b / f));
        }
    }

    TEST_CASE("integrator failure exits with code 3 and names nu") {
        auto d = fresh_dir("conv");
        auto r = run_cli("modulate tolerance=1e-30 tau_end=100 --out " + d.string(), d);
        CHECK(r.code == 3);
        CHECK(r.err.find("nu=") != std::string::npos);
        CHECK(r.err.find("modulation system") != std::string::npos);
    }

    TEST_CASE("verify reports pass and fail through the exit code") {
        auto d = fresh_dir("verify");
        auto ok = run_cli("verify criteria=8", d);
        CHECK(ok.code == 0);
        CHECK(ok.out.find("[PASS] 8") != std::string::npos);
        auto bad = run_cli("verify criteria=2", d);
        CHECK(bad.code == 1);
        CHECK(bad.out.find("failed items: 2") != std::string::npos);
    }

    TEST_CASE("simulate reads a configuration file") {
        auto d = fresh_dir("simulate");
        {
            std::ofstream cfg(d / "run.txt");
            cfg << "command = simulate\nmass_factor = 0.9\nt_max = 1000\n";
        }
        auto r = run_cli("simulate --config " + (d / "run.txt").string() + " --out " + d.string(), d);
        REQUIRE(r.code == 0);
        auto j = nlohmann::json::parse(slurp(d / "summary.json"));
        CHECK(j["stop"] == "subcritical");
        CHECK(j["T_est"].is_null());
        for (const char* f : {"series.csv", "final.csv", "projections.csv", "config.txt"}) CHECK(fs::exists(d / f));
        CHECK(RunConfig::from_text(slurp(d / "config.txt")).real("mass_factor") == 0.9);
    }
}
