#include "ncpr/io.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct CliResult {
    int exit_code = -1;
    std::string output;
};

CliResult run_cli(const std::string& args) {
    const fs::path out = fs::temp_directory_path() / "ncpr_cli_out.txt";
    const std::string cmd =
        std::string(NCPR_CLI_PATH) + " " + args + " > " + out.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    CliResult result;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    result.output = ncpr::read_text_file(out);
    return result;
}

fs::path write_tiny_config(const fs::path& dir) {
    const std::string text = R"(
plant.type = pendulum
cost.Q = 100 100
cost.R = 1
cost.S = 1000 1000
cost.horizon = 3
cost.dt = 0.05
cost.reg = uniform
cost.beta = 0.1
train.range = -1 1
train.count = 3
train.epochs = 2
train.lr = 1e-3
train.hidden = 8
controller = cpnn_unconstrained
sim.z0 = 0.5 0 ; -0.5 0.2
sim.z_ref = 0 0
sim.duration = 0.5
seed = 5
out.dir = )" + (dir / "run").string() + "\n";
    const fs::path path = dir / "tiny.cfg";
    ncpr::write_text_file(path, text);
    return path;
}

// Strips the final (latency) column from every data row.
std::string without_latency_column(const std::string& csv) {
    std::stringstream in(csv);
    std::string line, out;
    while (std::getline(in, line)) {
        const std::size_t comma = line.rfind(',');
        out += line.substr(0, comma) + "\n";
    }
    return out;
}

}  // namespace

TEST_CASE("missing config and usage errors exit with 2") {
    CHECK(run_cli("train --config /nonexistent.cfg").exit_code == 2);
    CHECK(run_cli("frobnicate").exit_code == 2);
    CHECK(run_cli("train").exit_code == 2);  // --config is required
    CHECK(run_cli("--help").exit_code == 0);
}

TEST_CASE("train, simulate, and compare round-trip on a tiny experiment") {
    const fs::path dir = fs::temp_directory_path() / "ncpr_cli_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const fs::path cfg = write_tiny_config(dir);

    const CliResult train = run_cli("train --config " + cfg.string());
    CHECK(train.exit_code == 0);
    const fs::path ckpt = dir / "run" / "cpnn.ckpt";
    CHECK(fs::exists(ckpt));
    CHECK(fs::exists(dir / "run" / "training_curve.csv"));
    CHECK(fs::exists(dir / "run" / "manifest.json"));
    const std::string curve = ncpr::read_text_file(dir / "run" / "training_curve.csv");
    CHECK(curve.rfind("epoch,mean_loss,skipped\n", 0) == 0);

    const CliResult sim = run_cli("simulate --config " + cfg.string() +
                                  " --checkpoint " + ckpt.string() + " --out " +
                                  (dir / "sim").string());
    CHECK(sim.exit_code == 0);
    CHECK(fs::exists(dir / "sim" / "trajectory.csv"));
    CHECK(fs::exists(dir / "sim" / "summary.json"));

    // Re-running the same manifest inputs reproduces the deterministic
    // columns bit-exactly (latency is wall-clock and excluded).
    const CliResult sim2 = run_cli("simulate --config " + cfg.string() +
                                   " --checkpoint " + ckpt.string() + " --out " +
                                   (dir / "sim2").string());
    CHECK(sim2.exit_code == 0);
    const std::string a = ncpr::read_text_file(dir / "sim" / "trajectory.csv");
    const std::string b = ncpr::read_text_file(dir / "sim2" / "trajectory.csv");
    CHECK(without_latency_column(a) == without_latency_column(b));

    // Training again reproduces the checkpoint bit-exactly.
    const CliResult train2 =
        run_cli("train --config " + cfg.string() + " --out " + (dir / "run2").string());
    CHECK(train2.exit_code == 0);
    CHECK(ncpr::read_text_file(ckpt) ==
          ncpr::read_text_file(dir / "run2" / "cpnn.ckpt"));
    CHECK(ncpr::read_text_file(dir / "run" / "training_curve.csv") ==
          ncpr::read_text_file(dir / "run2" / "training_curve.csv"));

    // z0 override with the wrong dimension fails cleanly.
    const CliResult bad = run_cli("simulate --config " + cfg.string() +
                                  " --checkpoint " + ckpt.string() +
                                  " --z0 1,2,3 --out " + (dir / "bad").string());
    CHECK(bad.exit_code == 1);

    // Compare: one CPNN column and the MPC baseline over both cases.
    ncpr::write_text_file(dir / "compare.cfg",
                          ncpr::read_text_file(cfg) + "test.box = -5 5\nmpc.horizon = 3\n"
                          "mpc.max_iters = 40\n");
    const CliResult cmp = run_cli("compare --config " + (dir / "compare.cfg").string() +
                                  " --out " + (dir / "cmp").string() +
                                  " cpnn_unconstrained=" + ckpt.string() + " mpc");
    CHECK(cmp.exit_code == 0);
    const std::string table = ncpr::read_text_file(dir / "cmp" / "compare.csv");
    CHECK(table.rfind("controller,case,status,error,msd\n", 0) == 0);
    // 2 controllers x 2 cases.
    CHECK(std::count(table.begin(), table.end(), '\n') == 5);
    CHECK(table.find("cpnn_unconstrained,A,ok,") != std::string::npos);
    CHECK(table.find("mpc,B,ok,") != std::string::npos);

    const std::string manifest = ncpr::read_text_file(dir / "cmp" / "manifest.json");
    CHECK(manifest.find("\"config_fnv1a64\"") != std::string::npos);
    CHECK(manifest.find("\"seed\"") != std::string::npos);

    fs::remove_all(dir);
}

TEST_CASE("checkpoint with mismatched plant dims is rejected") {
    const fs::path dir = fs::temp_directory_path() / "ncpr_cli_dims";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const fs::path cfg = write_tiny_config(dir);

    CHECK(run_cli("train --config " + cfg.string()).exit_code == 0);

    // Swap the plant for the 3-state unicycle but keep the 2-input checkpoint.
    std::string text = ncpr::read_text_file(cfg);
    text.replace(text.find("plant.type = pendulum"), 21, "plant.type = unicycle");
    text.replace(text.find("cost.Q = 100 100"), 16, "cost.Q = 10 10 10");
    text.replace(text.find("cost.R = 1\n"), 11, "cost.R = 1 1\n");
    text.replace(text.find("cost.S = 1000 1000"), 18, "cost.S = 500 500 500");
    text.replace(text.find("sim.z0 = 0.5 0 ; -0.5 0.2"), 25, "sim.z0 = 1 1 0");
    text.replace(text.find("sim.z_ref = 0 0"), 15, "sim.z_ref = 0 0 0");
    ncpr::write_text_file(dir / "uni.cfg", text);

    const CliResult sim = run_cli("simulate --config " + (dir / "uni.cfg").string() +
                                  " --checkpoint " + (dir / "run" / "cpnn.ckpt").string() +
                                  " --out " + (dir / "simx").string());
    CHECK(sim.exit_code == 1);
    CHECK(sim.output.find("dim") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("verify passes clean and fails under an injected fault") {
    const CliResult ok = run_cli("verify");
    CHECK(ok.exit_code == 0);
    CHECK(ok.output.find("[PASS] autodiff") != std::string::npos);
    CHECK(ok.output.find("[PASS] qp_oracle") != std::string::npos);
    CHECK(ok.output.find("[PASS] rk4_order") != std::string::npos);
    CHECK(ok.output.find("[PASS] msd") != std::string::npos);

    const CliResult bad = run_cli("verify --inject-fault qp_oracle");
    CHECK(bad.exit_code == 1);
    CHECK(bad.output.find("[FAIL] qp_oracle") != std::string::npos);
}
