#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "asyncfv/config.hpp"
#include "asyncfv/io.hpp"

using namespace asyncfv;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("asyncfv_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome cli(const std::string& args, const fs::path& dir) {
    const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
    const std::string cmd = std::string(ASYNCFV_CLI) + " " + args + " >" + out.string() + " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

fs::path write_config(const fs::path& dir, const std::string& text) {
    const auto p = dir / "run.ini";
    std::ofstream(p) << text;
    return p;
}

int expect_config_error(const std::string& text, const std::string& field) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        CHECK(e.field() == field);
        return e.line();
    }
    FAIL("no error for field " << field);
    return -1;
}

}  // namespace

TEST_CASE("named experiments with overrides") {
    const auto rc = parse_config(
        "# desk fracture\n[experiment]\nname = fracture\nscale = desk\nseed = 7\n\n[scheme]\nvariant = bast\n"
        "delta_m = 2.5e-6\n[output]\ndir = somewhere\n");
    CHECK(rc.experiment.name == "fracture");
    CHECK(rc.experiment.dims.nx == 50);
    CHECK(rc.experiment.seed == 7);
    CHECK(rc.variant == Variant::Bast);
    CHECK(rc.delta_m == 2.5e-6);
    CHECK(rc.out_dir == "somewhere");
    CHECK(rc.scheme().final_time == 2.4);
    CHECK(rc.scheme().variant == Variant::Bast);
}

TEST_CASE("custom grid") {
    const auto rc = parse_config(
        "[experiment]\nnx = 4\nny = 3\nlx = 2\nly = 1.5\ndiffusivity = 0.5\nvx = -1\ninitial = point\n"
        "source_x = 0.1\nsource_y = 0.1\nfinal_time = 0.3\nreaction = langmuir\n[scheme]\nladder = 1e-3, 1e-4\n"
        "schemes = bas, casc\n");
    const auto& ex = rc.experiment;
    CHECK(ex.dims.cells() == 12);
    CHECK(ex.fields.velocity.x == -1.0);
    CHECK(std::get<UniformDiffusivity>(ex.fields.diffusivity).value == 0.5);
    const auto& p = std::get<PointSource>(ex.fields.initial);
    CHECK(p.location.x == 0.1);
    CHECK(p.location.z == 0.5);
    CHECK(ex.reaction.has_value());
    CHECK(ex.ladder == std::vector<double>{1e-3, 1e-4});
    CHECK(ex.schemes == std::vector<Variant>{Variant::Bas, Variant::BasCasc});
}

TEST_CASE("config errors name the field and line") {
    CHECK(expect_config_error("[scheme]\ndelta_m = 0\n", "scheme.delta_m") == 2);
    CHECK(expect_config_error("[scheme]\ndelta_m = abc\n", "scheme.delta_m") == 2);
    CHECK(expect_config_error("[experiment]\n\ncolour = red\n", "experiment.colour") == 3);
    CHECK(expect_config_error("[nowhere]\n", "nowhere") == 1);
    CHECK(expect_config_error("[scheme]\nvariant = rk4\n", "scheme.variant") == 2);
    CHECK(expect_config_error("[scheme]\nladder = 1e-4, 1e-3\n", "scheme.ladder") == 2);
    CHECK(expect_config_error("[experiment]\nnx = 0\n", "experiment.nx") == 2);
    CHECK(expect_config_error("[experiment]\nname = mystery\n", "experiment.name") == 2);
    CHECK(expect_config_error("[scheme]\ndelta_m = 1\ndelta_m = 2\n", "scheme.delta_m") == 3);
    CHECK(expect_config_error("delta_m = 1\n", "") == 1);
}

TEST_CASE("hash follows the text") {
    const auto a = parse_config("[scheme]\ndelta_m = 1e-3\n");
    const auto b = parse_config("[scheme]\ndelta_m = 1e-4\n");
    CHECK(a.hash != b.hash);
    CHECK(a.hash == parse_config("[scheme]\ndelta_m = 1e-3\n").hash);
    CHECK(a.echo == "[scheme]\ndelta_m = 1e-3\n");
}

TEST_CASE("run writes three files with headers") {
    const auto dir = scratch("run");
    const auto cfg = write_config(dir,
                                  "[experiment]\nnx = 4\nny = 4\nlx = 4\nly = 4\ninitial = point\n"
                                  "final_time = 0.5\n[scheme]\ndelta_m = 1e-4\n");
    const auto r = cli("run --config " + cfg.string() + " --out " + (dir / "out").string(), dir);
    CHECK(r.code == 0);
    for (const char* f : {"concentration.csv", "event_map.csv", "metadata.json"}) {
        CHECK(fs::exists(dir / "out" / f));
    }
    const auto conc = slurp(dir / "out" / "concentration.csv");
    CHECK(conc.rfind("# asyncfv " + std::string(kToolVersion) + " config_hash=", 0) == 0);
    const auto meta = slurp(dir / "out" / "metadata.json");
    CHECK(meta.find("initial = point") != std::string::npos);
}

TEST_CASE("bad config exits 2 and names the field") {
    const auto dir = scratch("bad");
    const auto cfg = write_config(dir, "[scheme]\ndelta_m = 0\n");
    const auto r = cli("run --config " + cfg.string(), dir);
    CHECK(r.code == 2);
    CHECK(r.err.find("delta_m") != std::string::npos);
    CHECK(cli("run --config " + (dir / "missing.ini").string(), dir).code == 2);
    CHECK(cli("frobnicate", dir).code == 2);
}

TEST_CASE("runtime failure exits 1") {
    const auto dir = scratch("runaway");
    const auto cfg =
        write_config(dir, "[experiment]\nnx = 2\ninitial = point\nsource_x = 0.1\n[scheme]\ndelta_m = 1e-7\n"
                          "max_events = 100\n[output]\ndir = " + (dir / "out").string() + "\n");
    const auto r = cli("run --config " + cfg.string(), dir);
    CHECK(r.code == 1);
    CHECK(r.err.find("event budget") != std::string::npos);
}

TEST_CASE("fracture run reproduces the golden checksums") {
    const auto dir = scratch("golden");
    const auto cfg = write_config(dir,
                                  "[experiment]\nname = fracture\nscale = desk\nseed = 20\n[scheme]\n"
                                  "variant = bas\ndelta_m = 1e-6\n");
    REQUIRE(cli("run --config " + cfg.string() + " --out " + (dir / "a").string(), dir).code == 0);
    REQUIRE(cli("run --config " + cfg.string() + " --out " + (dir / "b").string(), dir).code == 0);
    std::map<std::string, std::string> golden;
    std::ifstream in(fs::path(ASYNCFV_GOLDEN_DIR) / "fracture_desk_bas_1e-6.txt");
    for (std::string name, hash; in >> name >> hash;) golden[name] = hash;
    REQUIRE(golden.size() == 2);
    for (const auto& [name, hash] : golden) {
        const auto a = slurp(dir / "a" / name);
        CHECK(a == slurp(dir / "b" / name));
        CHECK(hex64(Hasher{}.text(a).digest()) == hash);
    }
}

TEST_CASE("verify, export-grid and sweep") {
    const auto dir = scratch("subcommands");
    auto r = cli("verify --scale desk", dir);
    CHECK(r.code == 0);
    CHECK(r.out.find("FAIL") == std::string::npos);

    r = cli("export-grid --experiment fracture --scale desk --out " + (dir / "grid").string(), dir);
    CHECK(r.code == 0);
    for (const char* f : {"cells.csv", "faces.csv", "operator.csv", "diffusivity.csv", "fracture_cells.txt"}) {
        CHECK(fs::exists(dir / "grid" / f));
    }

    const auto cfg = write_config(dir,
                                  "[experiment]\nnx = 2\nlx = 2\ninitial = point\nsource_x = 0.5\n"
                                  "[scheme]\nladder = 1e-3, 1e-4, 1e-5\n");
    setenv("ASYNCFV_CACHE", (dir / "cache").string().c_str(), 1);
    r = cli("sweep --config " + cfg.string() + " --jobs 2 --check --out " + (dir / "sweep").string(), dir);
    CHECK(r.code == 0);
    CHECK(fs::exists(dir / "sweep" / "sweep.csv"));
    CHECK(fs::exists(dir / "sweep" / "summary.txt"));
    CHECK(fs::exists(dir / "cache"));
}
