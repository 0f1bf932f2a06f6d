#include "doctest.h"

#include "magspec/cli.hpp"
#include "magspec/harness.hpp"
#include "magspec/io.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

using namespace magspec;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result run(const std::vector<std::string> &args) {
    std::ostringstream out, err;
    cli::Cli c(out, err);
    const int code = c.run(args);
    return {code, out.str(), err.str()};
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("magspec_cli_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string &name) const { return (path / name).string(); }
};

std::string slurp(const std::string &path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Arguments that satisfy the required options of each command.
const std::map<std::string, std::vector<std::string>> kRequired = {
    {"field", {}},
    {"dynamics", {}},
    {"spectrum", {"--h", "0.1"}},
    {"weyl", {"--h", "0.1"}},
    {"sweep", {"--config", "c.json"}},
    {"report", {"--records", "r.jsonl", "--out-dir", "out"}},
};

// Values accepted by the validated options.
const std::map<std::string, std::string> kSample = {
    {"--scenario", "ii"}, {"--method", "symplectic"}, {"--density", "plain"}, {"--convention", "model"},
    {"--mode", "necessity"}, {"--kind", "correction"}, {"--dos", "0.1,0.2"},
};

} // namespace

TEST_CASE("help lists every flag and every flag parses") {
    std::ostringstream sink;
    cli::Cli probe(sink, sink);
    const auto subs = probe.app().get_subcommands([](CLI::App *) { return true; });
    REQUIRE(subs.size() == 6);
    for (CLI::App *sub : subs) {
        const std::string name = sub->get_name();
        const Result help = run({name, "--help"});
        CHECK(help.code == 0);
        for (const CLI::Option *opt : sub->get_options()) {
            for (const std::string &l : opt->get_lnames()) {
                const std::string flag = "--" + l;
                INFO(name << " " << flag);
                CHECK(help.out.find(flag) != std::string::npos);
                if (flag == "--help")
                    continue;
                std::vector<std::string> args{name};
                for (const auto &a : kRequired.at(name))
                    args.push_back(a);
                if (std::find(args.begin(), args.end(), flag) == args.end()) {
                    args.push_back(flag);
                    if (opt->get_expected_min() > 0) {
                        const auto it = kSample.find(flag);
                        args.push_back(it != kSample.end() ? it->second : "1");
                    }
                }
                std::ostringstream o;
                cli::Cli c(o, o);
                std::vector<std::string> rev(args.rbegin(), args.rend());
                CHECK_NOTHROW(c.app().parse(rev));
            }
        }
    }
}

TEST_CASE("unknown flags and commands are rejected") {
    CHECK(run({"weyl", "--h", "0.1", "--bogus", "1"}).code == 2);
    CHECK(run({"nonsense"}).code == 2);
    CHECK(run({}).code == 2);
    CHECK(run({"--help"}).code == 0);
}

TEST_CASE("missing --h exits 2 and names h") {
    const Result r = run({"weyl", "--density", "magnetic", "--V", "1"});
    CHECK(r.code == 2);
    CHECK(r.err.find("--h") != std::string::npos);
    const Result s = run({"spectrum", "--validate-oscillator"});
    CHECK(s.code == 2);
    CHECK(s.err.find("--h") != std::string::npos);
}

TEST_CASE("validation errors exit 2 with the key") {
    const Result r = run({"spectrum", "--count", "--mu", "40", "--h", "0.1"});
    CHECK(r.code == 2);
    CHECK(r.err.find("mu") != std::string::npos);
    const Result m = run({"weyl", "--h", "0.1"});
    CHECK(m.code == 2);
    CHECK(m.err.find("mode") != std::string::npos);
}

TEST_CASE("weyl magnetic density") {
    const Result r = run({"weyl", "--density", "magnetic", "--V", "1", "--f1", "0.5", "--f2", "1", "--mu", "3", "--h", "0.1"});
    CHECK(r.code == 0);
    CHECK(r.out.rfind("22.797", 0) == 0);
}

TEST_CASE("oscillator validation") {
    const Result r = run({"spectrum", "--validate-oscillator", "--mu", "10", "--h", "0.05"});
    CHECK(r.code == 0);
    CHECK(!r.out.empty());
}

TEST_CASE("runtime errors exit 1") {
    TempDir dir;
    io::atomic_write(dir / "bad.jsonl", "not json\n");
    const Result r = run({"report", "--records", dir / "bad.jsonl", "--out-dir", dir / "out"});
    CHECK(r.code == 1);
    CHECK(r.err.find("line 1") != std::string::npos);
}

TEST_CASE("report on an empty record file") {
    TempDir dir;
    io::atomic_write(dir / "empty.jsonl", "");
    const Result r = run({"report", "--records", dir / "empty.jsonl", "--out-dir", dir / "out"});
    CHECK(r.code == 0);
    const auto lines = io::read_lines(dir / "out/summary.csv");
    REQUIRE(lines.size() == 1); // header only
}

TEST_CASE("report sorts six records and round-trips a sweep") {
    TempDir dir;
    const std::string cfg_path = dir / "sweep.json";
    io::atomic_write(cfg_path, R"({"h_list": [0.25, 0.125], "beta_list": [0.5, 0.3, 0.1],
                                  "output": {"records": ")" + (dir / "r.jsonl") + R"("}})");
    const Result s = run({"sweep", "--config", cfg_path});
    REQUIRE(s.code == 0);
    const auto recs = load_records(dir / "r.jsonl");
    REQUIRE(recs.size() == 6);
    CHECK(records_jsonl(recs) == slurp(dir / "r.jsonl"));

    // shuffle the record file; the summary still comes out sorted by (h, mu)
    std::vector<SweepRecord> shuffled = recs;
    std::reverse(shuffled.begin(), shuffled.end());
    io::atomic_write(dir / "shuffled.jsonl", records_jsonl(shuffled));
    const Result r = run({"report", "--records", dir / "shuffled.jsonl", "--out-dir", dir / "rep"});
    CHECK(r.code == 0);
    const auto lines = io::read_lines(dir / "rep/summary.csv");
    REQUIRE(lines.size() == 7);
    std::vector<std::pair<double, double>> keys;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        std::istringstream ls(lines[i]);
        std::string h, mu;
        std::getline(ls, h, ',');
        std::getline(ls, mu, ',');
        keys.emplace_back(std::stod(h), std::stod(mu));
    }
    CHECK(std::is_sorted(keys.begin(), keys.end()));
    CHECK(slurp(dir / "rep/summary.csv") == summary_csv(recs));
    CHECK(fs::exists(dir / "rep/ratios.csv"));
    CHECK(fs::exists(dir / "rep/remainder_vs_mu_h0.25.dat"));
    CHECK(fs::exists(dir / "rep/remainder_vs_mu_h0.125.dat"));
}

TEST_CASE("field and dynamics commands write their outputs") {
    TempDir dir;
    const Result f = run({"field", "--x1", "0.2", "--x3", "0.1", "--out", dir / "f.json"});
    CHECK(f.code == 0);
    const auto j = nlohmann::json::parse(slurp(dir / "f.json"));
    CHECK(j.contains("f1"));

    const Result k = run({"dynamics", "--k-star"});
    CHECK(k.code == 0);
    CHECK(k.out.find("0.6522") != std::string::npos);

    const Result t = run({"dynamics", "--x1", "0.1", "--x3", "0.3", "--p1", "0.5", "--mu", "50", "--T", "0.2", "--out",
                          dir / "t.csv"});
    CHECK(t.code == 0);
    CHECK(io::read_lines(dir / "t.csv").size() > 2);
}

TEST_CASE("spectrum fiber and weyl plain") {
    TempDir dir;
    const Result s = run({"spectrum", "--xi2", "0.5", "--mu", "4", "--h", "0.0625", "--out", dir / "fiber.csv"});
    CHECK(s.code == 0);
    CHECK(io::read_lines(dir / "fiber.csv").size() >= 2);
    const Result w = run({"weyl", "--density", "plain", "--V", "1", "--h", "1", "--coefficient"});
    CHECK(w.code == 0);
    CHECK(std::stod(w.out) > 0);
}
