#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "inril/commands.hpp"
#include "inril/errors.hpp"
#include "inril/interleave.hpp"
#include "inril/random.hpp"
#include "inril/text_io.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace inril;

namespace {

py::object to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

RunConfig config_from(const std::optional<fs::path>& file, const std::vector<std::string>& overrides) {
    return load_run_config(file, overrides);
}

py::dict pretrain_dict(const PretrainSummary& s) {
    py::dict d;
    d["start_step"] = s.start_step;
    d["final_step"] = s.final_step;
    d["initial_full_loss"] = s.initial_full_loss;
    d["final_full_loss"] = s.final_full_loss;
    d["best_full_loss"] = s.best_full_loss;
    d["best_step"] = s.best_step;
    d["best_eval_return"] = s.best_eval_return;
    d["best_eval_success"] = s.best_eval_success;
    d["final_eval_return"] = s.final_eval_return;
    d["final_eval_success"] = s.final_eval_success;
    d["batch_size"] = s.batch_size;
    return d;
}

py::dict finetune_dict(const FinetuneSummary& s) {
    py::dict d;
    d["cycles"] = s.cycles;
    d["env_steps"] = s.env_steps;
    d["final_return"] = s.final_return;
    d["final_il_loss"] = s.final_il_loss;
    d["final_eval_return"] = s.final_eval_return;
    d["final_eval_success"] = s.final_eval_success;
    d["best_eval_return"] = s.best_eval_return;
    d["best_eval_success"] = s.best_eval_success;
    return d;
}

py::dict transition_dict(const Transition& t) {
    py::dict d;
    d["obs"] = t.obs;
    d["action"] = t.action;
    d["reward"] = t.reward;
    d["next_obs"] = t.next_obs;
    d["done"] = t.done;
    d["success"] = t.success;
    return d;
}

}  // namespace

PYBIND11_MODULE(inril, m) {
    m.doc() = "Interleaved imitation and reinforcement learning core";
    m.attr("__version__") = kCodeVersion;

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    // Most specific first: pybind tries translators in reverse registration order.
    py::register_exception<UsageError>(m, "UsageError", base.ptr());
    py::register_exception<FileError>(m, "FileError", base.ptr());
    py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<ParseError>(m, "ParseError", base.ptr());
    py::register_exception<NumericError>(m, "NumericError", base.ptr());
    py::register_exception<DivergenceError>(m, "DivergenceError", base.ptr());
    py::register_exception<BudgetExceededError>(m, "BudgetExceededError", base.ptr());
    py::register_exception<EnvError>(m, "EnvError", base.ptr());
    py::register_exception<DomainError>(m, "DomainError", base.ptr());

    m.def("derive_seed", [](std::uint64_t b, std::uint64_t stream, std::uint64_t idx) {
        return derive_seed(b, static_cast<Stream>(stream), idx);
    }, py::arg("base"), py::arg("stream"), py::arg("index") = 0);

    // Gradient combination.
    m.def("measure_alignment", [](std::vector<double> a, std::vector<double> b) {
        return measure_alignment(ParamVector(std::move(a)), ParamVector(std::move(b)));
    }, py::arg("g_il"), py::arg("g_rl"));
    m.def("dual_cone_combine", [](std::vector<double> a, std::vector<double> b) {
        return dual_cone_combine(ParamVector(std::move(a)), ParamVector(std::move(b))).values();
    }, py::arg("g_il"), py::arg("g_rl"));

    // Series analysis.
    m.def("savgol_filter", &savgol_filter, py::arg("y"), py::arg("window"), py::arg("order"));
    m.def("double_descent_flag", &double_descent_flag, py::arg("series"), py::arg("drop") = 0.2);
    m.def("max_relative_drop", &max_relative_drop, py::arg("series"));
    m.def("normalized_auc", &normalized_auc, py::arg("x"), py::arg("y"));
    m.def("summarize_log", [](const fs::path& p) {
        return to_py(to_json(summarize_log(read_run_log(p), p.parent_path().filename().string())));
    }, py::arg("path"));

    // Theory.
    m.def("affine_fixed_point", &theory::affine_fixed_point, py::arg("alpha"), py::arg("m"));
    m.def("simulate_affine_cycles", &theory::simulate_affine_cycles, py::arg("alpha"), py::arg("m"), py::arg("cycles"));
    m.def("break_even_beta", &theory::break_even_beta, py::arg("m_bar"));
    m.def("efficiency_ratio", [](double m_bar, double delta, double gap, double c_rl, double L_rl) {
        TheoryConstants c;
        c.c_rl = c_rl;
        c.L_rl = L_rl;
        const theory::EfficiencyRatio r = theory::efficiency_ratio(c, m_bar, delta, gap);
        return py::make_tuple(r.ratio, r.beta);
    }, py::arg("m_bar"), py::arg("delta"), py::arg("l_rl_gap"), py::arg("c_rl") = 0.5, py::arg("L_rl") = 1.0);
    m.def("theory_suite", [](std::uint64_t seed, int bound_runs, std::int64_t bound_T, int paired_seeds, double l_scale) {
        theory::SuiteOptions o;
        o.seed = seed;
        o.bound_runs = bound_runs;
        o.bound_T = bound_T;
        o.paired_seeds = paired_seeds;
        o.l_scale = l_scale;
        py::list out;
        for (const auto& r : theory::run_suite(o)) out.append(to_py(to_json(r)));
        return out;
    }, py::arg("seed") = 0, py::arg("bound_runs") = 60, py::arg("bound_T") = 200, py::arg("paired_seeds") = 10,
       py::arg("l_scale") = 1.0);

    // Environments.
    py::class_<Env>(m, "Env")
        .def(py::init([](const std::string& name, std::vector<std::string> overrides) {
                 overrides.insert(overrides.begin(), "env=\"" + name + "\"");
                 return Env(config_from(std::nullopt, overrides).env);
             }),
             py::arg("name"), py::arg("overrides") = std::vector<std::string>{})
        .def("reset", &Env::reset, py::arg("seed"))
        .def("step", [](Env& e, std::vector<double> a) { return transition_dict(e.step(a)); }, py::arg("action"))
        .def_property_readonly("terminal", &Env::terminal)
        .def_property_readonly("step_count", &Env::step_count)
        .def_property_readonly("observation", &Env::observation)
        .def_property_readonly("horizon", [](const Env& e) { return e.config().horizon(); });

    m.def("expert_action", [](const Env& e, std::vector<double> obs) { return expert_action(e.config(), obs); },
          py::arg("env"), py::arg("obs"));

    // Commands. `config` is a JSON file path or None; overrides are "key=value".
    m.def("resolve_config", [](std::optional<fs::path> config, std::vector<std::string> overrides) {
        return to_py(to_json(config_from(config, overrides)));
    }, py::arg("config") = py::none(), py::arg("overrides") = std::vector<std::string>{});

    m.def("gen_demos", [](const fs::path& out, std::optional<fs::path> config, std::vector<std::string> overrides,
                          bool force) {
        const DemoDataset d = cmd_gen_demos({config_from(config, overrides), resolve_output(out), force});
        return py::make_tuple(d.n_trajectories, d.pairs.size());
    }, py::arg("out"), py::arg("config") = py::none(), py::arg("overrides") = std::vector<std::string>{},
       py::arg("force") = false);

    m.def("pretrain", [](const fs::path& demos, const fs::path& out_dir, std::optional<fs::path> config,
                         std::vector<std::string> overrides, std::optional<fs::path> resume) {
        return pretrain_dict(cmd_pretrain({config_from(config, overrides), demos, resolve_output(out_dir), resume, false}));
    }, py::arg("demos"), py::arg("out_dir"), py::arg("config") = py::none(),
       py::arg("overrides") = std::vector<std::string>{}, py::arg("resume") = py::none());

    m.def("finetune", [](const fs::path& demos, const fs::path& out_dir, std::optional<fs::path> checkpoint,
                         std::optional<fs::path> config, std::vector<std::string> overrides) {
        return finetune_dict(cmd_finetune({config_from(config, overrides), checkpoint, demos, resolve_output(out_dir), false}));
    }, py::arg("demos"), py::arg("out_dir"), py::arg("checkpoint") = py::none(), py::arg("config") = py::none(),
       py::arg("overrides") = std::vector<std::string>{});

    m.def("sweep_m", [](const fs::path& demos, const fs::path& out_dir, std::optional<fs::path> checkpoint,
                        std::optional<fs::path> config, std::vector<std::string> overrides, int jobs) {
        py::list out;
        for (const auto& r : cmd_sweep_m({config_from(config, overrides), checkpoint, demos, resolve_output(out_dir), jobs, false})) {
            out.append(to_py(to_json(r)));
        }
        return out;
    }, py::arg("demos"), py::arg("out_dir"), py::arg("checkpoint") = py::none(), py::arg("config") = py::none(),
       py::arg("overrides") = std::vector<std::string>{}, py::arg("jobs") = 1);
}
