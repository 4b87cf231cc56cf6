#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "fedsub/config.hpp"
#include "fedsub/data.hpp"
#include "fedsub/errors.hpp"

using namespace fedsub;

namespace {

const char* kMinimalConfig =
    "algorithm = fedsub\n"
    "scenario = static\n"
    "fusion = overlapping\n"
    "depth = partial\n"
    "partial_layers = 2\n"
    "rounds = 1\n"
    "epochs = 1\n"
    "learning_rate = 0.05\n"
    "seed = 3\n"
    "data = synthetic\n"
    "output_dir = cli_out\n"
    "\n"
    "[synthetic]\n"
    "clients = 4\n"
    "classes = 3\n"
    "feature_dim = 4\n"
    "samples_per_client = 40\n"
    "concentration = 5\n"
    "seed = 11\n";

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(FEDSUB_CLI_PATH) + " " + args + " > cli_stdout.txt 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

int count_lines(const std::string& text) {
    int n = 0;
    for (char c : text)
        if (c == '\n') ++n;
    return n;
}

} // namespace

TEST_CASE("run: produces rounds.csv with one row per client per round") {
    write_file("cli_cfg.txt", kMinimalConfig);
    CHECK(run_cli("run cli_cfg.txt") == 0);
    const std::string csv = read_file("cli_out/rounds.csv");
    CHECK(count_lines(csv) == 1 + 4 * 1); // header + clients x rounds
    CHECK(csv.rfind("round,client_id,f1,loss\n", 0) == 0);
    const std::string summary = read_file("cli_out/summary.json");
    CHECK(summary.find("\"final\"") != std::string::npos);
    CHECK(summary.find("\"clusters_per_class\"") != std::string::npos);
}

TEST_CASE("run: unknown config key exits 2 and names the key") {
    write_file("cli_bad.txt", std::string(kMinimalConfig) + "bogus_key = 1\n");
    CHECK(run_cli("run cli_bad.txt") == 2);
    CHECK(read_file("cli_stdout.txt").find("bogus_key") != std::string::npos);
}

TEST_CASE("run: invalid value exits 2, missing file exits 2") {
    write_file("cli_bad2.txt", "algorithm = sgd\n");
    CHECK(run_cli("run cli_bad2.txt") == 2);
    CHECK(run_cli("run does_not_exist.txt") == 2);
}

TEST_CASE("run: repeated runs are byte-identical") {
    write_file("cli_cfg.txt", kMinimalConfig);
    REQUIRE(run_cli("run cli_cfg.txt") == 0);
    const std::string first = read_file("cli_out/rounds.csv");
    REQUIRE(run_cli("run cli_cfg.txt") == 0);
    CHECK(read_file("cli_out/rounds.csv") == first);
}

TEST_CASE("run: output is independent of the thread count") {
    write_file("cli_cfg.txt", kMinimalConfig);
    const std::string base = std::string(FEDSUB_CLI_PATH) + " run cli_cfg.txt > /dev/null 2>&1";
    REQUIRE(std::system(("FEDSUB_THREADS=1 " + base).c_str()) == 0);
    const std::string serial = read_file("cli_out/rounds.csv");
    REQUIRE(std::system(("FEDSUB_THREADS=4 " + base).c_str()) == 0);
    CHECK(read_file("cli_out/rounds.csv") == serial);
}

TEST_CASE("gen-data: written CSV loads back as the generated dataset") {
    write_file("cli_cfg.txt", kMinimalConfig);
    CHECK(run_cli("gen-data cli_cfg.txt --out cli_data.csv") == 0);
    const Dataset loaded = load_csv("cli_data.csv");
    const ExperimentConfig cfg = parse_config("cli_cfg.txt");
    const Dataset generated = generate_synthetic(cfg.synth);
    REQUIRE(loaded.clients.size() == generated.clients.size());
    for (std::size_t u = 0; u < loaded.clients.size(); ++u)
        for (std::size_t i = 0; i < loaded.clients[u].samples.size(); ++i)
            CHECK(loaded.clients[u].samples[i].features ==
                  generated.clients[u].samples[i].features);
    std::remove("cli_data.csv");
}

TEST_CASE("run: accepts a csv data source") {
    write_file("cli_cfg.txt", kMinimalConfig);
    REQUIRE(run_cli("gen-data cli_cfg.txt --out cli_data2.csv") == 0);
    std::string cfg(kMinimalConfig);
    cfg.replace(cfg.find("data = synthetic"), 16, "data = csv\ncsv_path = cli_data2.csv");
    cfg.replace(cfg.find("output_dir = cli_out"), 20, "output_dir = cli_out_csv");
    write_file("cli_cfg_csv.txt", cfg);
    CHECK(run_cli("run cli_cfg_csv.txt") == 0);
    CHECK(count_lines(read_file("cli_out_csv/rounds.csv")) == 5);
    std::remove("cli_data2.csv");
}

TEST_CASE("analyze: emits per-class Hopkins JSON") {
    write_file("cli_cfg.txt", kMinimalConfig);
    CHECK(run_cli("analyze cli_cfg.txt") == 0);
    const std::string out = read_file("cli_stdout.txt");
    CHECK(out.find("\"classes\"") != std::string::npos);
    CHECK(out.find("\"hopkins\"") != std::string::npos);
    CHECK(out.find("\"samples\"") != std::string::npos);
}

TEST_CASE("merge-test: self-merge leaves accuracies unchanged") {
    write_file("cli_cfg.txt", kMinimalConfig);
    CHECK(run_cli("merge-test cli_cfg.txt --a c0 --b c0") == 0);
    const std::string out = read_file("cli_stdout.txt");
    // with a == b the merged model equals the local one; every row repeats
    // the same accuracy in columns 1/3 and 2/4
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t");
        if (b == std::string::npos) return std::string();
        const auto e = s.find_last_not_of(" \t");
        return s.substr(b, e - b + 1);
    };
    std::istringstream lines(out);
    std::string line;
    std::getline(lines, line); // header
    int rows = 0;
    while (std::getline(lines, line)) {
        std::vector<std::string> cells;
        std::size_t pos = 0;
        while ((pos = line.find('|')) != std::string::npos) {
            cells.push_back(trim(line.substr(0, pos)));
            line = line.substr(pos + 1);
        }
        cells.push_back(trim(line));
        REQUIRE(cells.size() == 5);
        CHECK(cells[1] == cells[3]);
        CHECK(cells[2] == cells[4]);
        ++rows;
    }
    CHECK(rows >= 1);
}

TEST_CASE("merge-test: unknown client id exits 2") {
    write_file("cli_cfg.txt", kMinimalConfig);
    CHECK(run_cli("merge-test cli_cfg.txt --a nobody --b c0") == 2);
}

TEST_CASE("bad usage exits 2") {
    CHECK(run_cli("frobnicate") == 2);
    CHECK(run_cli("run") == 2);
}
