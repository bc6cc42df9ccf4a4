#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "slowfast/grid.hpp"
#include "slowfast/report.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Exit code of the tool for the given arguments, output silenced.
int run_cli(const std::string& args) {
    const std::string cmd =
        std::string(SLOWFAST_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    REQUIRE(rc != -1);
    REQUIRE(WIFEXITED(rc));
    return WEXITSTATUS(rc);
}

struct Workdir {
    fs::path root;
    Workdir() {
        root = fs::temp_directory_path() /
               ("slowfast_cli_" + std::to_string(::getpid()));
        fs::create_directories(root);
    }
    ~Workdir() { fs::remove_all(root); }

    std::string config(const std::string& name, const std::string& text) {
        fs::path p = root / name;
        std::ofstream out(p);
        out << text;
        return p.string();
    }
    std::string out(const std::string& name) {
        fs::path p = root / name;
        fs::create_directories(p);
        return p.string();
    }
};

json load(const fs::path& p) {
    REQUIRE(fs::exists(p));
    return slowfast::read_json(p.string());
}

} // namespace

TEST_CASE("help and argument errors") {
    CHECK(run_cli("--help") == 0);
    CHECK(run_cli("equilibrium --help") == 0);
    CHECK(run_cli("") == 2);            // missing subcommand
    CHECK(run_cli("equilibrium") == 2); // missing required --config
    CHECK(run_cli("no-such-command") == 2);
}

TEST_CASE("equilibrium run produces linked outputs") {
    Workdir wd;
    auto cfg = wd.config("vm.ini",
                         "[model]\npreset = von_mises\n\n[grid]\nm = 64\n");
    auto out = wd.out("vm");
    REQUIRE(run_cli("equilibrium --config " + cfg + " --out " + out) == 0);

    json manifest = load(fs::path(out) / "manifest.json");
    CHECK(manifest["kind"] == "manifest");
    CHECK(manifest["schema_version"] == 1);
    CHECK(manifest["subcommand"] == "equilibrium");
    CHECK(manifest["parameters"]["grid.m"] == "64");
    const std::string hash = manifest["config_hash"];
    // The hash is that of the file's raw text.
    std::ifstream in(cfg);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    CHECK(hash == slowfast::config_hash(text));

    auto outputs = manifest["outputs"];
    REQUIRE(outputs.size() == 2);
    CHECK(outputs[0] == "equilibrium.json");
    CHECK(outputs[1] == "equilibrium.csv");

    json rep = load(fs::path(out) / "equilibrium.json");
    CHECK(rep["kind"] == "equilibrium");
    CHECK(rep["manifest_hash"] == hash);
    CHECK(rep["residual"].get<double>() < 1e-9);

    std::ifstream csv(fs::path(out) / "equilibrium.csv");
    std::string line;
    std::getline(csv, line);
    CHECK(line == "# manifest " + hash);
    std::getline(csv, line);
    CHECK(line == "theta,G,H");
    // mass of the G column under the trapezoid weight 2 pi / M
    double mass = 0.0;
    int rows = 0;
    while (std::getline(csv, line)) {
        const auto a = line.find(','), b = line.rfind(',');
        mass += std::stod(line.substr(a + 1, b - a - 1));
        ++rows;
    }
    CHECK(rows == 64);
    CHECK(mass * slowfast::kTwoPi / 64 == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("config mistakes exit with code 2 and name the key") {
    Workdir wd;
    auto out = wd.out("bad");

    auto typo = wd.config("typo.ini", "[grid]\nmm = 64\n");
    CHECK(run_cli("equilibrium --config " + typo + " --out " + out) == 2);

    auto preset = wd.config("preset.ini", "[model]\npreset = vonmises\n");
    CHECK(run_cli("equilibrium --config " + preset + " --out " + out) == 2);

    auto missing = wd.config("missing.ini", "[model]\npreset = active_2d\n");
    CHECK(run_cli("equilibrium --config " + missing + " --out " + out) == 2);

    CHECK(run_cli("equilibrium --config " + wd.root.string() +
                  "/nowhere.ini --out " + out) == 2);

    // the stderr text names the offending key
    const std::string cmd = std::string(SLOWFAST_CLI_PATH) +
                            " equilibrium --config " + typo + " 2>" +
                            (wd.root / "err.txt").string() + " >/dev/null";
    std::system(cmd.c_str());
    std::ifstream err(wd.root / "err.txt");
    std::string text((std::istreambuf_iterator<char>(err)),
                     std::istreambuf_iterator<char>());
    CHECK(text.find("grid.mm") != std::string::npos);
}

TEST_CASE("non gradient model exits with the numerical failure code") {
    Workdir wd;
    auto cfg = wd.config(
        "tilt.ini", "[model]\npreset = von_mises\ntilt = 0.5\n");
    CHECK(run_cli("equilibrium --config " + cfg + " --out " + wd.out("t")) ==
          3);
}

TEST_CASE("coefficients of the free planar model") {
    Workdir wd;
    auto cfg = wd.config("free.ini",
                         "[model]\npreset = free_abp\ndim = 2\n\n[grid]\nm = "
                         "64\n");
    auto out = wd.out("free");
    REQUIRE(run_cli("coeffs --config " + cfg + " --out " + out) == 0);
    json rep = load(fs::path(out) / "coeffs.json");
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            const double want = i == j ? 0.5 : 0.0;
            CHECK(rep["diffusivity"][i][j].get<double>() ==
                  doctest::Approx(want).epsilon(1e-8));
            CHECK(rep["mobility"][i][j].get<double>() ==
                  doctest::Approx(want).epsilon(1e-8));
        }
    CHECK(rep["mean_velocity"][0].get<double>() ==
          doctest::Approx(0.0).epsilon(1e-12));
    CHECK(fs::exists(fs::path(out) / "coeffs.csv"));
}

TEST_CASE("custom model runs through the kinetic integrator") {
    Workdir wd;
    auto cfg = wd.config("custom.ini",
                         "[model]\n"
                         "preset = custom\n"
                         "dim = 1\n"
                         "epsilon = 0.2\n"
                         "u_cos = 0.4\n"
                         "loggamma_sin = 0.25\n"
                         "v1_cos = 1.0\n"
                         "\n[grid]\nm = 32\nk = 16\n"
                         "\n[kinetic]\nframe = moving\nt = 0.25\n");
    auto out = wd.out("kin");
    REQUIRE(run_cli("kinetic --config " + cfg + " --out " + out) == 0);
    json rep = load(fs::path(out) / "kinetic.json");
    CHECK(rep["kind"] == "kinetic");
    CHECK(std::abs(rep["mass_drift"].get<double>()) < 1e-8);
    std::ifstream csv(fs::path(out) / "kinetic.csv");
    std::string line;
    std::getline(csv, line);
    CHECK(line.rfind("# manifest ", 0) == 0);
    std::getline(csv, line);
    CHECK(line == "t,mode_abs,mode_re,mode_im,mass");
}

TEST_CASE("rate and sweep commands agree on the shared profile") {
    Workdir wd;
    auto cfg = wd.config("rate.ini",
                         "[model]\npreset = free_abp\ndim = 1\n\n"
                         "[grid]\nm = 32\nk = 16\n\n"
                         "[rate]\nepsilon = 0.1\nslices = 9\n\n"
                         "[sweep]\neps = 0.2, 0.1\nslices = 9\n");
    auto out = wd.out("rate");
    REQUIRE(run_cli("rate --config " + cfg + " --out " + out) == 0);
    json rate = load(fs::path(out) / "rate.json");
    CHECK(rate["epsilon"].get<double>() == 0.1);
    CHECK(rate["rate"].get<double>() >= 0.0);
    CHECK(rate["lower_bound"].get<double>() <=
          rate["rate"].get<double>() + 1e-9);

    auto out2 = wd.out("sweep");
    REQUIRE(run_cli("gamma-sweep --config " + cfg + " --out " + out2) == 0);
    json sweep = load(fs::path(out2) / "sweep.json");
    CHECK(sweep["limit"].get<double>() ==
          doctest::Approx(rate["limit"].get<double>()).epsilon(1e-12));
    std::ifstream csv(fs::path(out2) / "sweep.csv");
    std::string line;
    std::getline(csv, line);
    std::getline(csv, line);
    CHECK(line == "epsilon,rate,lower_bound");
    std::getline(csv, line);
    CHECK(line.rfind("0.2,", 0) == 0);
    // the eps = 0.1 sweep row reproduces the rate command's value
    std::getline(csv, line);
    const auto a = line.find(',');
    const auto b = line.find(',', a + 1);
    CHECK(std::stod(line.substr(a + 1, b - a - 1)) ==
          doctest::Approx(rate["rate"].get<double>()).epsilon(1e-12));
}

TEST_CASE("particle commands report their seed in the manifest") {
    Workdir wd;
    auto cfg = wd.config("sim.ini",
                         "[model]\npreset = free_abp\ndim = 1\nepsilon = "
                         "0.4\n\n"
                         "[particles]\nn = 300\ndt = 0.05\nt = 30\nburn_in = "
                         "2\nseed = 11\nsample_stride = 5\n");
    auto out = wd.out("sim");
    REQUIRE(run_cli("simulate --config " + cfg + " --out " + out) == 0);
    json manifest = load(fs::path(out) / "manifest.json");
    CHECK(manifest["seeds"] == json({11}));
    json rep = load(fs::path(out) / "simulate.json");
    CHECK(rep["kind"] == "transport");
    CHECK(rep["drift"].size() == 1);
    CHECK(rep["diffusivity"].size() == 1);
    CHECK(rep["samples"].get<long>() > 0);

    auto out2 = wd.out("fluct");
    REQUIRE(run_cli("fluctuations --config " + cfg + " --out " + out2) == 0);
    json fl = load(fs::path(out2) / "fluctuations.json");
    REQUIRE(fl["modes"].size() == 4);
    for (const auto& m : fl["modes"])
        CHECK(m["variance"].get<double>() > 0.0);
}
