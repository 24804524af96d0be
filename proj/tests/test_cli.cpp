// Process-level checks of the clv binary (path supplied via CLV_BIN).
#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace {

std::string binary_path() {
    const char* path = std::getenv("CLV_BIN");
    REQUIRE_MESSAGE(path != nullptr, "CLV_BIN must point at the clv binary");
    return path;
}

int run(const std::string& args) {
    const std::string command = binary_path() + " " + args + " >/dev/null 2>&1";
    const int status = std::system(command.c_str());
    REQUIRE(status != -1);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

struct TempDir {
    std::string path;
    explicit TempDir(const char* name) {
        path = std::string("/tmp/clv_cli_") + name + "_" + std::to_string(::getpid());
        std::system(("rm -rf " + path + " && mkdir -p " + path).c_str());
    }
    ~TempDir() { std::system(("rm -rf " + path).c_str()); }
    std::string operator/(const std::string& p) const { return path + "/" + p; }
};

} // namespace

TEST_CASE("cli pipeline runs end to end with deterministic artifacts") {
    TempDir dir("pipeline");
    write_file(dir / "run.json",
               "{\"segments\": 12, \"transition_rounds\": 5, \"value_rounds\": 5,"
               " \"horizon\": 2, \"generator\": {\"n_customers\": 300, \"n_years\": 3,"
               " \"seed\": 11}}");

    const std::string common = " --config " + (dir / "run.json");
    REQUIRE(run("generate --out " + (dir / "a") + common) == 0);
    REQUIRE(run("generate --out " + (dir / "b") + common) == 0);
    CHECK(read_file(dir / "a/panel.csv") == read_file(dir / "b/panel.csv"));
    CHECK(read_file(dir / "a/manifest.json") == read_file(dir / "b/manifest.json"));

    const std::string data =
        " --panel " + (dir / "a/panel.csv") + " --schema " + (dir / "a/schema.json");
    REQUIRE(run("train --out " + (dir / "trained") + common + data) == 0);
    REQUIRE(run("simulate --bundle " + (dir / "trained/bundle.json") + " --out " +
                (dir / "sim") + common + data + " --from-year 0 --baseline") == 0);
    REQUIRE(run("evaluate --bundle " + (dir / "trained/bundle.json") + " --out " +
                (dir / "eval") + common + data) == 0);
    REQUIRE(run("propensity --bundle " + (dir / "trained/bundle.json") + " --out " +
                (dir / "prop") + common + data + " --from-year 0") == 0);

    // simulate covers every active customer (all 300 are present in year 0)
    const std::string sim_csv = read_file(dir / "sim/simulation.csv");
    const auto rows = std::count(sim_csv.begin(), sim_csv.end(), '\n') - 1;
    CHECK(rows == 300);
    CHECK(read_file(dir / "eval/metrics.json").find("accuracy_50") != std::string::npos);
    CHECK(read_file(dir / "prop/propensity.csv").rfind("customer_id,segment,propensity", 0) ==
          0);
}

TEST_CASE("cli reports usage, data and version errors distinctly") {
    TempDir dir("errors");
    // missing required option
    CHECK(run("train") == 2);
    // named missing artifact
    CHECK(run("train --panel " + (dir / "nope.csv") + " --schema " + (dir / "nope.json") +
              " --out " + (dir / "x")) == 2);
    // malformed panel data
    write_file(dir / "panel.csv", "not,a,panel\n1,2,3\n");
    write_file(dir / "schema.json", "{\"features\": []}");
    CHECK(run("train --panel " + (dir / "panel.csv") + " --schema " + (dir / "schema.json") +
              " --out " + (dir / "x")) == 3);
    // bundle tampering
    write_file(dir / "bundle.json", "{\"format_version\": 99}");
    CHECK(run("simulate --bundle " + (dir / "bundle.json") + " --panel " +
              (dir / "panel.csv") + " --schema " + (dir / "schema.json") + " --out " +
              (dir / "x")) == 4);
    // unknown flag
    CHECK(run("generate --definitely-not-a-flag") == 2);
}
