#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "inril/checkpoint.hpp"
#include "inril/commands.hpp"
#include "inril/errors.hpp"
#include "inril/text_io.hpp"

using namespace inril;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("inril_harness_" + std::to_string(::getpid())) / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

json tiny_config() {
    return json::parse(R"({
        "env": "pointmass", "seed": 3, "mode": "full_net_surgery", "m": 2,
        "alpha_il": 0.01, "alpha_rl": 0.01, "budget_env_steps": 384,
        "value_hidden": [8], "residual_hidden": [4], "eval_episodes": 2,
        "policy": {"hidden": [8]},
        "env_config": {"horizon": 30},
        "demos": {"n_trajectories": 2, "action_noise_std": 0.1},
        "pretrain": {"n_steps": 20, "eval_every": 10, "eval_episodes": 2},
        "rl": {"steps_per_batch": 64, "value_epochs": 2},
        "sweep": {"m_values": [1, "infinity"], "seeds": [3], "modes": ["full_net_surgery"]}
    })");
}

std::string slurp(const fs::path& p) { return read_text_file(p); }

}  // namespace

TEST_CASE("config resolution") {
    const RunConfig c = resolve_config(tiny_config());
    CHECK(c.env.kind == EnvKind::kPointmass);
    CHECK(c.interleave.m == 2);
    CHECK(c.rl.lr == 0.01);
    CHECK(c.rl.steps_per_batch == 64);
    CHECK(c.env.point.horizon == 30);

    json bad = tiny_config();
    bad["alpha_ill"] = 0.1;
    CHECK_THROWS_WITH_AS(resolve_config(bad), doctest::Contains("alpha_ill"), ConfigError);
    bad = tiny_config();
    bad["rl"]["gama"] = 0.9;
    CHECK_THROWS_AS(resolve_config(bad), ConfigError);
    bad = tiny_config();
    bad["m"] = "lots";
    CHECK_THROWS_AS(resolve_config(bad), ConfigError);
    bad = tiny_config();
    bad["alpha_il"] = "fast";
    CHECK_THROWS_AS(resolve_config(bad), ConfigError);

    // Per-env defaults.
    const RunConfig g = resolve_config(json{{"env", "gridworld"}});
    CHECK(g.rl.steps_per_batch == 2048);
    CHECK(g.demo_trajectories == 20);
    const RunConfig p = resolve_config(json{{"env", "pointmass"}});
    CHECK(p.rl.steps_per_batch == 1024);
    CHECK(p.demo_trajectories == 50);

    // Snapshot round trip.
    const json snap = to_json(c);
    CHECK(to_json(resolve_config(snap)) == snap);

    json j = tiny_config();
    apply_override(j, "rl.gamma=0.9");
    apply_override(j, "mode=naive_or_not");
    apply_override(j, "m=adaptive");
    CHECK(j["rl"]["gamma"] == 0.9);
    CHECK(j["mode"] == "naive_or_not");
    CHECK(resolve_config([&] { json k = tiny_config(); apply_override(k, "m=adaptive"); return k; }()).interleave.adaptive);
    CHECK_THROWS_AS(resolve_config(j), ConfigError);
    CHECK_THROWS_AS(apply_override(j, "no_equals_sign"), UsageError);
}

TEST_CASE("run log parsing") {
    const RunConfig c = resolve_config(tiny_config());
    const fs::path dir = scratch_dir("log");
    {
        RunLogWriter w(dir / "log.ndjson", "test", c, json::object());
        CycleRecord r;
        r.env_steps = 10;
        r.updates = 2;
        r.il_loss = std::nan("");
        w.write_cycle(r);
        r.cycle = 1;
        r.env_steps = 20;
        r.updates = 4;
        r.il_loss = 1.5;
        w.write_cycle(r);
        r.env_steps = 15;
        CHECK_THROWS_AS(w.write_cycle(r), UsageError);
    }
    const RunLog log = read_run_log(dir / "log.ndjson");
    CHECK(log.header["command"] == "test");
    CHECK(log.cycles().size() == 2);
    const auto il = log.cycle_series("il_loss");
    CHECK(std::isnan(il[0]));
    CHECK(il[1] == 1.5);

    const std::string text = slurp(dir / "log.ndjson");
    CHECK_THROWS_WITH_AS(parse_run_log(text + "{not json\n", "x.ndjson"), doctest::Contains("x.ndjson:4"), ParseError);
    CHECK_THROWS_WITH_AS(parse_run_log(text + "{\"type\":\"cycle\",\"cycle\":2}\n", "x.ndjson"),
                         doctest::Contains("x.ndjson:4"), ParseError);
    CHECK_THROWS_AS(parse_run_log("{\"type\":\"cycle\"}\n"), ParseError);
    CHECK_THROWS_AS(parse_run_log(""), ParseError);
    CHECK_THROWS_AS(parse_run_log(text + text), ParseError);
}

TEST_CASE("double descent flag") {
    CHECK(double_descent_flag({1.0, 2.0, 1.5}));
    CHECK(max_relative_drop({1.0, 2.0, 1.5}) == doctest::Approx(0.25));
    CHECK_FALSE(double_descent_flag({1.0, 2.0, 1.7}));
    CHECK_FALSE(double_descent_flag({3.0, 2.0, 1.0}));  // never rises
    CHECK_FALSE(double_descent_flag({1.0, 1.0, 0.1}));
    CHECK(double_descent_flag({1.0, 2.0, 4.0, 3.0, 2.9}));
    CHECK(max_relative_drop({}) == 0.0);
    CHECK(max_relative_drop({1.0, std::nan(""), 3.0, 1.5}) == doctest::Approx(0.5));
}

TEST_CASE("normalized AUC") {
    CHECK(normalized_auc({0, 1, 2}, {1, 1, 1}) == doctest::Approx(1.0));
    CHECK(normalized_auc({0, 2}, {0, 4}) == doctest::Approx(2.0));
    CHECK(normalized_auc({0, 1, 3}, {0, 2, 2}) == doctest::Approx((1.0 + 4.0) / 3.0));
    CHECK(normalized_auc({5}, {7}) == 7.0);
    CHECK_THROWS_AS(normalized_auc({0, 1}, {1}), ShapeError);
}

TEST_CASE("Savitzky-Golay smoothing") {
    const std::vector<double> y{3, 1, 4, 1, 5, 9, 2, 6, 5, 3, 5};
    CHECK(savgol_filter(y, 1, 0) == y);
    CHECK_THROWS_AS(savgol_filter(y, 4, 2), ConfigError);
    CHECK_THROWS_AS(savgol_filter(y, 5, 5), ConfigError);
    CHECK_THROWS_AS(savgol_filter(y, 13, 2), ConfigError);
    // Exact on polynomials up to the order, including the edges.
    std::vector<double> cubic;
    for (int i = 0; i < 20; ++i) cubic.push_back(0.5 * i * i * i - 2.0 * i + 1.0);
    const auto s = savgol_filter(cubic, 7, 3);
    for (std::size_t i = 0; i < cubic.size(); ++i) CHECK(s[i] == doctest::Approx(cubic[i]).epsilon(1e-9));
    // Window 5, order 2 interior weights are (-3, 12, 17, 12, -3) / 35.
    const auto q = savgol_filter(y, 5, 2);
    for (std::size_t i = 2; i + 2 < y.size(); ++i) {
        const double w = (-3 * y[i - 2] + 12 * y[i - 1] + 17 * y[i] + 12 * y[i + 1] - 3 * y[i + 2]) / 35.0;
        CHECK(q[i] == doctest::Approx(w).epsilon(1e-12));
    }
    // Order 0 in the interior is a moving average.
    const auto avg = savgol_filter(y, 3, 0);
    CHECK(avg[5] == doctest::Approx((5.0 + 9.0 + 2.0) / 3.0));
}

TEST_CASE("sweep cells") {
    const RunConfig c = resolve_config(tiny_config());
    const auto cells = sweep_cells(c);
    REQUIRE(cells.size() == 2);
    CHECK(cells[0].name == "full_net_surgery_m1_s3");
    CHECK(cells[1].name == "rl_only_minf_s3");
    CHECK(cells[1].cfg.interleave.mode == Mode::kRlOnly);

    json j = tiny_config();
    j["sweep"]["modes"] = {"full_net_surgery", "full_net_naive"};
    j["sweep"]["seeds"] = {0, 1};
    const auto more = sweep_cells(resolve_config(j));
    CHECK(more.size() == 6);  // 2 modes x 1 finite m x 2 seeds, plus one rl_only per seed
}

TEST_CASE("command pipeline") {
    const fs::path dir = scratch_dir("pipeline");
    const RunConfig cfg = resolve_config(tiny_config());

    const fs::path demos = dir / "demos.txt";
    const DemoDataset d = cmd_gen_demos({cfg, demos, false});
    CHECK(d.n_trajectories == 2);
    const std::string demo_text = slurp(demos);
    CHECK_THROWS_AS(cmd_gen_demos({cfg, demos, false}), FileError);
    CHECK(slurp(demos) == demo_text);
    CHECK_NOTHROW(cmd_gen_demos({cfg, demos, true}));
    CHECK(slurp(demos) == demo_text);

    SUBCASE("pretrain with zero steps saves the initialization") {
        RunConfig c0 = cfg;
        c0.pretrain_steps = 0;
        cmd_pretrain({c0, demos, dir / "pre0", std::nullopt, false});
        const Checkpoint ck = load_checkpoint(dir / "pre0" / "final.ckpt");
        CHECK(ck.get("policy").params() == initial_policy(c0).params());
        CHECK(ck.step == 0);
    }

    SUBCASE("resume continues the mini-batch sequence") {
        cmd_pretrain({cfg, demos, dir / "full", std::nullopt, false});
        RunConfig half = cfg;
        half.pretrain_steps = 10;
        cmd_pretrain({half, demos, dir / "a", std::nullopt, false});
        const PretrainSummary s = cmd_pretrain({half, demos, dir / "b", dir / "a" / "final.ckpt", false});
        CHECK(s.start_step == 10);
        CHECK(s.final_step == 20);
        CHECK(load_checkpoint(dir / "b" / "final.ckpt").get("policy").params() ==
              load_checkpoint(dir / "full" / "final.ckpt").get("policy").params());
        const RunLog log = read_run_log(dir / "full" / "log.ndjson");
        int steps = 0, evals = 0;
        for (const auto& r : log.records) {
            if (r["type"] == "pretrain_step") ++steps;
            if (r["type"] == "pretrain_eval") ++evals;
        }
        CHECK(steps == 20);
        CHECK(evals == 3);
    }

    SUBCASE("finetune writes one record per cycle and is reproducible") {
        cmd_pretrain({cfg, demos, dir / "pre", std::nullopt, false});
        const fs::path ck = dir / "pre" / "final.ckpt";
        const FinetuneSummary s = cmd_finetune({cfg, ck, demos, dir / "ft1", false});
        cmd_finetune({cfg, ck, demos, dir / "ft2", false});
        CHECK(s.cycles == 3);  // 384 steps / (2 x 64)
        const RunLog log = read_run_log(dir / "ft1" / "log.ndjson");
        CHECK(log.cycles().size() == s.cycles);
        CHECK(log.records.back()["type"] == "end");
        CHECK(log.header["inputs"]["checkpoint"] == file_digest(ck));
        CHECK(slurp(dir / "ft1" / "log.ndjson") == slurp(dir / "ft2" / "log.ndjson"));
        CHECK(slurp(dir / "ft1" / "final.ckpt") == slurp(dir / "ft2" / "final.ckpt"));

        // Wrong architecture is rejected before any training.
        RunConfig wide = cfg;
        wide.policy_hidden = {16};
        CHECK_THROWS_AS(cmd_finetune({wide, ck, demos, dir / "ft3", false}), ConfigError);

        // Plot CSV has one row per cycle record.
        PlotOptions po;
        po.logs = {dir / "ft1" / "log.ndjson", dir / "ft2" / "log.ndjson"};
        po.out_dir = dir / "plots";
        po.smooth_window = 3;
        po.smooth_order = 1;
        const PlotResult pr = cmd_plot(po);
        CHECK(pr.csv_rows == 6);
        CHECK(pr.curves == 2);
        std::istringstream csv(slurp(dir / "plots" / "curves.csv"));
        std::string line;
        int lines = 0;
        while (std::getline(csv, line)) ++lines;
        CHECK(lines == 7);
        CHECK(slurp(dir / "plots" / "return.svg").find("<svg") == 0);
    }

    SUBCASE("sweep summary is regenerable from the logs") {
        SweepOptions so{cfg, std::nullopt, demos, dir / "sweep", 2, false};
        const auto rows = cmd_sweep_m(so);
        REQUIRE(rows.size() == 2);
        for (const auto& r : rows) CHECK(r.status == "ok");
        const std::string csv = slurp(dir / "sweep" / "summary.csv");
        const std::string js = slurp(dir / "sweep" / "summary.json");
        fs::remove(dir / "sweep" / "summary.csv");
        fs::remove(dir / "sweep" / "summary.json");
        reduce_sweep(dir / "sweep");
        CHECK(slurp(dir / "sweep" / "summary.csv") == csv);
        CHECK(slurp(dir / "sweep" / "summary.json") == js);
        CHECK(rows[1].m == "infinity");
    }
}

TEST_CASE("theory check report") {
    const fs::path dir = scratch_dir("theory");
    TheoryCheckOptions o;
    o.suite.bound_runs = 6;
    o.suite.bound_T = 30;
    o.suite.paired_seeds = 3;
    o.report = dir / "report.ndjson";
    const TheoryCheckResult r = cmd_theory_check(o);
    std::istringstream in(slurp(dir / "report.ndjson"));
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        const json j = json::parse(line);
        CHECK(j.contains("name"));
        CHECK(j.contains("pass"));
        ++n;
    }
    CHECK(n == r.records.size());
    CHECK(r.table.find("fixed_point") != std::string::npos);
}
