#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "tensorlift/convnet.hpp"
#include "tensorlift/io.hpp"

using namespace tensorlift;
namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string output;
};

/// Runs the built binary with the given arguments, capturing combined output.
RunResult run_cli(const std::string& args, const fs::path& dir) {
    const fs::path log = dir / "last_output.txt";
    const std::string cmd =
        std::string(TENSORLIFT_CLI) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(log);
    std::ostringstream out;
    out << in.rdbuf();
    r.output = out.str();
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) lines.push_back(line);
    return lines;
}

/// Fixture files shared by every case, written once into a scratch directory.
const fs::path& fixture_dir() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() /
                     ("tensorlift-cli-" + std::to_string(::getpid()));
        fs::create_directories(d);

        save_text_file((d / "haar.json").string(),
                       topology_to_json(make_haar_topology(2, 8)).dump(2));

        std::vector<ConvEdge> chains = {
            {"a", "root", 1, {0, 2}},
            {"b", "root", 1, {1, 3}},
            {"la", "a", 2, {0, 4}},
            {"lb", "b", 2, {1, 5}},
        };
        ConvTopology two_chain(8, {"root", "a", "b", "la", "lb"}, "root", {"la", "lb"},
                               std::move(chains));
        save_text_file((d / "two_chain.json").string(), topology_to_json(two_chain).dump(2));

        std::vector<ConvEdge> doubled = {
            {"leaf", "root", 1, {0}},
            {"leaf", "root", 1, {0}},
        };
        ConvTopology double_dirac(4, {"root", "leaf"}, "root", {"leaf"}, std::move(doubled));
        save_text_file((d / "double_dirac.json").string(),
                       topology_to_json(double_dirac).dump(2));

        save_text_file((d / "malformed.json").string(), "{ \"signal_len\": 4");

        save_text_file((d / "identity.json").string(),
                       factors_to_json(identity_column_family(3)).dump(2));

        json cfg;
        cfg["topology"] = "haar.json";
        cfg["model"] = "full";
        cfg["delta"] = 0.01;
        cfg["p"] = 2;
        cfg["seeds"] = 6;
        cfg["seed"] = 42;
        cfg["gamma"] = "auto";
        cfg["rho"] = "auto";
        cfg["solver"] = {{"restarts", 2}, {"max_sweeps", 40}};
        cfg["out"] = "run.csv";
        save_text_file((d / "sim.json").string(), cfg.dump(2));

        cfg.erase("delta");
        save_text_file((d / "sim_missing.json").string(), cfg.dump(2));
        return d;
    }();
    return dir;
}

} // namespace

TEST_CASE("check-topology distinguishes pass, fail and parse errors") {
    const fs::path& d = fixture_dir();

    RunResult pass = run_cli("check-topology " + (d / "haar.json").string(), d);
    CHECK(pass.exit_code == 0);
    CHECK(pass.output.find("passes=true") != std::string::npos);
    CHECK(pass.output.find("kernel_dim=0") != std::string::npos);

    RunResult fail = run_cli("check-topology " + (d / "double_dirac.json").string(), d);
    CHECK(fail.exit_code == 2);
    CHECK(fail.output.find("passes=false") != std::string::npos);
    CHECK(fail.output.find("leaf=leaf position=0 count=2") != std::string::npos);

    RunResult bad = run_cli("check-topology " + (d / "malformed.json").string(), d);
    CHECK(bad.exit_code == 1);
}

TEST_CASE("rank probes and materializes small operators") {
    const fs::path& d = fixture_dir();

    RunResult r = run_cli("rank " + (d / "identity.json").string(), d);
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("probed_rank=3") != std::string::npos);
    CHECK(r.output.find("exact_rank=3") != std::string::npos);
    CHECK(r.output.find("agreement=true") != std::string::npos);

    // Probing succeeds with probability one regardless of the seed.
    RunResult other = run_cli("rank " + (d / "identity.json").string() + " --seed 99", d);
    CHECK(other.output.find("probed_rank=3") != std::string::npos);

    RunResult usage = run_cli("rank " + (d / "identity.json").string() + " --trials 0", d);
    CHECK(usage.exit_code == 1);
}

TEST_CASE("dnsp reports the optimal constant for a trivial kernel") {
    const fs::path& d = fixture_dir();
    RunResult r = run_cli("dnsp " + (d / "haar.json").string() + " --samples 40", d);
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("gamma_hat=1 ") != std::string::npos);
    CHECK(r.output.find("failed=false") != std::string::npos);
}

TEST_CASE("dnsp falsifies the property on a kernel-crossing network") {
    const fs::path& d = fixture_dir();
    const fs::path out = d / "dnsp.csv";
    RunResult r = run_cli("dnsp " + (d / "two_chain.json").string() +
                              " --samples 40 --out " + out.string(),
                          d);
    CHECK(r.exit_code == 3);
    CHECK(r.output.find("witness: class_dist=") != std::string::npos);
    CHECK(r.output.find("failed=true") != std::string::npos);

    const auto lines = lines_of(slurp(out));
    REQUIRE(lines.size() == 3);
    CHECK(lines[0].rfind("# manifest=", 0) == 0);
    CHECK(lines[1] == "gamma_hat,rho,n_samples,n_effective,n_discarded,failed");
    CHECK(lines[2].find("inf") != std::string::npos);
}

TEST_CASE("dnsp rejects a zero sample count") {
    const fs::path& d = fixture_dir();
    RunResult r = run_cli("dnsp " + (d / "haar.json").string() + " --samples 0", d);
    CHECK(r.exit_code == 1);
}

TEST_CASE("simulate writes an audited CSV with zero violations") {
    const fs::path& d = fixture_dir();
    RunResult r = run_cli("simulate " + (d / "sim.json").string(), d);
    REQUIRE(r.exit_code == 0);

    const auto lines = lines_of(slurp(d / "run.csv"));
    REQUIRE(lines.size() == 9);  // manifest + header + 6 rows + summary
    CHECK(lines[0].rfind("# manifest=", 0) == 0);
    CHECK(lines[1] == "seed,delta,eta,d_p,bound,precond_met,holds");
    CHECK(lines[2].rfind("42,0.01,", 0) == 0);
    CHECK(lines[8].find("rows=6") != std::string::npos);
    CHECK(lines[8].find("violations=0") != std::string::npos);
}

TEST_CASE("simulate output does not depend on the thread count") {
    const fs::path& d = fixture_dir();
    const std::string cfg = (d / "sim.json").string();
    for (int threads : {1, 4, 8}) {
        RunResult r = run_cli("simulate " + cfg + " --threads " + std::to_string(threads) +
                                  " --out " + (d / ("t" + std::to_string(threads) + ".csv")).string(),
                              d);
        REQUIRE(r.exit_code == 0);
    }
    const std::string t1 = slurp(d / "t1.csv");
    CHECK(t1 == slurp(d / "t4.csv"));
    CHECK(t1 == slurp(d / "t8.csv"));
    CHECK(t1.find("# manifest=") == 0);
}

TEST_CASE("one row is reproducible from its own seed") {
    const fs::path& d = fixture_dir();
    RunResult full = run_cli("simulate " + (d / "sim.json").string() + " --out " +
                                 (d / "full.csv").string(),
                             d);
    REQUIRE(full.exit_code == 0);
    RunResult one = run_cli("simulate " + (d / "sim.json").string() +
                                " --seed 44 --trials 1 --out " + (d / "one.csv").string(),
                            d);
    REQUIRE(one.exit_code == 0);
    CHECK(lines_of(slurp(d / "one.csv"))[2] == lines_of(slurp(d / "full.csv"))[4]);
}

TEST_CASE("simulate names the missing config key") {
    const fs::path& d = fixture_dir();
    RunResult r = run_cli("simulate " + (d / "sim_missing.json").string(), d);
    CHECK(r.exit_code == 1);
    CHECK(r.output.find("missing required key \"delta\"") != std::string::npos);
}
