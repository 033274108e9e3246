#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sfpe/cli_runner.hpp"

namespace fs = std::filesystem;
using namespace sfpe;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "sfpe");
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("sfpe_cli_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

const std::string kProblems = SFPE_PROBLEMS_DIR;

}  // namespace

TEST_CASE("fnv1a64 reference values") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ull);
}

TEST_CASE("verify integrals with defaults passes every row") {
    const auto dir = scratch("integrals");
    const auto r = run({"verify", "integrals", "--out", (dir / "i.csv").string()});
    CHECK(r.code == 0);
    std::istringstream csv(slurp(dir / "i.csv"));
    std::string line;
    std::getline(csv, line);
    CHECK(line.rfind("# config_hash=", 0) == 0);
    CHECK(line.find(",seed=0") != std::string::npos);
    std::getline(csv, line);
    CHECK(line == "a,b,lambda,value,bound,oracle,abs_err,pass");
    std::size_t rows = 0;
    while (std::getline(csv, line)) {
        ++rows;
        CHECK(line.substr(line.size() - 5) == ",true");
    }
    CHECK(rows >= 1000);
}

TEST_CASE("solve twice and across worker counts gives byte-identical grids") {
    const auto dir = scratch("solve");
    const std::string problem = kProblems + "/heat_linear.ini";
    auto solve = [&](const std::string& tag, const std::string& threads) {
        const auto grid = dir / (tag + ".bin");
        const auto r = run({"--threads", threads, "solve", "--problem", problem, "--paths", "200",
                            "--steps", "10", "--seed", "42", "--max-iters", "3", "--out-grid",
                            grid.string(), "--out-diag", (dir / (tag + ".csv")).string()});
        REQUIRE(r.code == 0);
        return std::make_pair(slurp(grid), slurp(dir / (tag + ".csv")));
    };
    const auto a = solve("a", "1");
    const auto b = solve("b", "1");
    const auto c = solve("c", "8");
    CHECK(a.first == b.first);
    CHECK(a.first == c.first);
    CHECK(a.second == b.second);
    CHECK(a.second == c.second);
    CHECK(a.first.substr(0, 8) == "SFPEGRID");
    CHECK(a.second.rfind("# config_hash=", 0) == 0);
}

TEST_CASE("malformed problem file exits 2 and names the field") {
    const auto dir = scratch("bad");
    std::ofstream(dir / "noL.ini") << "[coefficients]\nmodel = brownian\ndimension = 1\nc = 0.5\n"
                                      "[domain]\nT = 1\nlo = -1\nhi = 1\n[terminal]\ng = zero\n";
    const auto r = run({"solve", "--problem", (dir / "noL.ini").string(), "--out-grid",
                        (dir / "g.bin").string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("\"field\":\"nonlinearity.L\"") != std::string::npos);
    CHECK(r.err.find("\"exit_code\":2") != std::string::npos);
    CHECK(run({"solve"}).code == 2);
    CHECK(run({"frobnicate"}).code == 2);
    CHECK(run({"solve", "--problem", kProblems + "/heat_linear.ini", "--paths", "5", "--out-grid",
               (dir / "g.bin").string()})
              .code == 2);
}

TEST_CASE("diverging iteration exits 3 with a diagnostics file") {
    const auto dir = scratch("diverge");
    std::ofstream(dir / "blow.ini") << "[coefficients]\nmodel = brownian\ndimension = 1\nc = 0.5\n"
                                       "[domain]\nT = 1\nlo = -1\nhi = 1\nnodes = 5\ntime_nodes = 4\n"
                                       "[terminal]\ng = constant\nvalue = 1\n"
                                       "[nonlinearity]\ntype = linear\na0 = 20\nL = 20\n"
                                       "[lyapunov]\nform = constant\n";
    const auto r = run({"solve", "--problem", (dir / "blow.ini").string(), "--paths", "100",
                        "--steps", "10", "--lambda", "0", "--max-iters", "12", "--out-grid",
                        (dir / "g.bin").string()});
    CHECK(r.code == 3);
    CHECK(r.err.find("diverging-iteration") != std::string::npos);
    CHECK(fs::exists(dir / "g.bin.diag.csv"));
}

TEST_CASE("other subcommands write headed CSVs deterministically") {
    const auto dir = scratch("misc");
    const std::string ou = kProblems + "/ou_linear.ini";
    for (const std::string threads : {"1", "8"}) {
        CHECK(run({"--threads", threads, "simulate", "--problem", ou, "--paths", "20", "--steps", "10",
                   "--out", (dir / ("sim" + threads + ".csv")).string()})
                  .code == 0);
        CHECK(run({"--threads", threads, "verify", "moments", "--problem", ou, "--paths", "1000",
                   "--steps", "10", "--out", (dir / ("mom" + threads + ".csv")).string()})
                  .code == 0);
        CHECK(run({"--threads", threads, "probe", "contraction", "--problem", ou, "--paths", "100",
                   "--steps", "10", "--pairs", "2", "--out", (dir / ("pr" + threads + ".csv")).string()})
                  .code == 0);
    }
    for (const std::string name : {"sim", "mom", "pr"}) {
        const auto a = slurp(dir / (name + "1.csv"));
        CHECK(a.rfind("# config_hash=", 0) == 0);
        CHECK(a == slurp(dir / (name + "8.csv")));
    }
    const auto r = run({"bench", "--suite", "heat_quadratic", "--paths", "100", "--steps", "10",
                        "--max-iters", "2", "--out-md", (dir / "b.md").string(), "--out-csv",
                        (dir / "b.csv").string()});
    CHECK(r.code == 0);
    CHECK(slurp(dir / "b.md").find("| heat_quadratic |") != std::string::npos);
    CHECK(slurp(dir / "b.csv").rfind("# config_hash=", 0) == 0);
    CHECK(run({"bench", "--suite", "nope", "--out-md", (dir / "x.md").string(), "--out-csv",
               (dir / "x.csv").string()})
              .code == 2);
}

TEST_CASE("config hash ignores threads and output paths but tracks the seed") {
    const auto dir = scratch("hash");
    const std::string ou = kProblems + "/ou_linear.ini";
    auto header = [&](const std::string& file, const std::string& seed) {
        run({"simulate", "--problem", ou, "--paths", "2", "--steps", "2", "--seed", seed, "--out",
             (dir / file).string()});
        std::istringstream in(slurp(dir / file));
        std::string line;
        std::getline(in, line);
        return line.substr(0, line.find(','));
    };
    CHECK(header("a.csv", "1") == header("b.csv", "1"));
    CHECK(header("a.csv", "1") != header("c.csv", "2"));
}
