#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "maestro/analysis.hpp"
#include "maestro/config.hpp"
#include "maestro/environment.hpp"
#include "maestro/errors.hpp"
#include "maestro/policy.hpp"
#include "maestro/protocol.hpp"
#include "maestro/registry.hpp"
#include "maestro/rewards.hpp"
#include "maestro/rng.hpp"
#include "maestro/trainer.hpp"

namespace py = pybind11;
using namespace maestro;

namespace {

registry::Registry registry_from_json_str(const std::string& text) {
    return registry::load_registry(nlohmann::json::parse(text));
}

py::dict format_report_dict(const protocol::FormatReport& r) {
    py::dict d;
    d["balanced_tags"] = r.balanced_tags;
    d["one_think_per_step"] = r.one_think_per_step;
    d["search_info_counts_match"] = r.search_info_counts_match;
    d["identifiers_valid"] = r.identifiers_valid;
    d["single_terminal_answer"] = r.single_terminal_answer;
    py::list violations;
    for (const auto& v : r.violations) {
        py::dict vd;
        vd["constraint"] = static_cast<int>(v.constraint);
        vd["offset"] = v.offset;
        vd["detail"] = v.detail;
        violations.append(vd);
    }
    d["violations"] = violations;
    return d;
}

} // namespace

PYBIND11_MODULE(_maestro, m) {
    m.doc() = "RL-driven model-skill orchestration engine";

    py::register_exception<Error>(m, "MaestroError");

    // ---- protocol ----
    py::class_<protocol::SearchAction>(m, "SearchAction")
        .def(py::init<std::string, std::string, std::string>(), py::arg("model_id"),
             py::arg("skill_id"), py::arg("query"))
        .def_readonly("model_id", &protocol::SearchAction::model_id)
        .def_readonly("skill_id", &protocol::SearchAction::skill_id)
        .def_readonly("query", &protocol::SearchAction::query);

    py::class_<protocol::Step>(m, "Step")
        .def_readonly("thinks", &protocol::Step::thinks)
        .def_readonly("observations", &protocol::Step::observations)
        .def_property_readonly("is_search", [](const protocol::Step& s) { return s.is_search(); })
        .def_property_readonly("is_answer", [](const protocol::Step& s) { return s.is_answer(); })
        .def_property_readonly("search",
                               [](const protocol::Step& s) -> py::object {
                                   if (!s.is_search()) return py::none();
                                   return py::cast(std::get<protocol::SearchAction>(*s.action));
                               })
        .def_property_readonly("answer", [](const protocol::Step& s) -> py::object {
            if (!s.is_answer()) return py::none();
            return py::cast(std::get<protocol::AnswerAction>(*s.action).text);
        });

    py::class_<protocol::ParsedTrajectory>(m, "ParsedTrajectory")
        .def_readonly("raw", &protocol::ParsedTrajectory::raw)
        .def_readonly("steps", &protocol::ParsedTrajectory::steps)
        .def_readonly("terminal", &protocol::ParsedTrajectory::terminal)
        .def_property_readonly("final_answer", [](const protocol::ParsedTrajectory& pt) {
            return pt.final_answer();
        });

    m.def("serialize_search", &protocol::serialize_search, py::arg("model_id"),
          py::arg("skill_id"), py::arg("query"));
    m.def("wrap_observation", &protocol::wrap_observation);
    m.def("wrap_think", &protocol::wrap_think);
    m.def("wrap_answer", &protocol::wrap_answer);
    m.def("parse_trajectory",
          [](const std::string& text) { return protocol::parse_trajectory(text); });
    m.def("validate_format",
          [](const protocol::ParsedTrajectory& pt, const registry::Registry& reg) {
              return format_report_dict(protocol::validate_format(pt, reg));
          });
    m.def("truncate_observation", &protocol::truncate_observation, py::arg("obs"),
          py::arg("limit"));
    m.def("serialize_trajectory", &protocol::serialize_trajectory);

    // ---- registry ----
    py::class_<registry::Registry>(m, "Registry")
        .def_property_readonly("version", [](const registry::Registry& r) { return r.version; })
        .def_property_readonly("model_ids",
                               [](const registry::Registry& r) {
                                   std::vector<std::string> ids;
                                   for (const auto& model : r.models) ids.push_back(model.id);
                                   return ids;
                               })
        .def_property_readonly("skill_ids",
                               [](const registry::Registry& r) {
                                   std::vector<std::string> ids;
                                   for (const auto& s : r.skills) ids.push_back(s.id);
                                   return ids;
                               })
        .def_property_readonly("total_level2",
                               [](const registry::Registry& r) { return r.total_level2(); });

    m.def("load_registry", &registry_from_json_str, py::arg("json_text"));
    m.def("load_registry_file",
          [](const std::filesystem::path& p) { return registry::load_registry_file(p); });
    m.def("compression_stats", [](const registry::Registry& r) {
        auto s = registry::compression_stats(r);
        py::dict d;
        d["flat_size"] = s.flat_size;
        d["hier_size"] = s.hier_size;
        d["ratio_num"] = s.ratio_num;
        d["ratio_den"] = s.ratio_den;
        return d;
    });
    m.def("route_level2",
          [](const registry::Registry& reg, const std::string& skill_id, const std::string& query) {
              const auto* skill = reg.find_skill(skill_id);
              if (!skill) throw Error(ErrorCode::UnresolvableIdentifier, "unknown skill " + skill_id);
              return registry::route_level2(*skill, query).id;
          });
    m.def("baseline_retrieve",
          [](const registry::Registry& reg, const std::string& query, std::size_t k) {
              std::vector<std::string> ids;
              for (const auto* s : registry::baseline_retrieve(reg, query, k)) ids.push_back(s->id);
              return ids;
          });

    // ---- environment ----
    py::class_<env::GenConfig>(m, "GenConfig")
        .def_static("from_json",
                    [](const std::string& text) {
                        return env::gen_config_from_json(nlohmann::json::parse(text));
                    })
        .def_readonly("tag_dim", &env::GenConfig::tag_dim)
        .def_readonly("u_hi", &env::GenConfig::u_hi)
        .def_readonly("gap", &env::GenConfig::gap);

    py::class_<env::TaskInstance>(m, "TaskInstance")
        .def_readonly("task_id", &env::TaskInstance::task_id)
        .def_readonly("task_type", &env::TaskInstance::task_type)
        .def_readonly("gold_answer", &env::TaskInstance::gold_answer)
        .def_readonly("context_features", &env::TaskInstance::context_features);

    py::class_<env::UtilityTable>(m, "UtilityTable")
        .def("at", &env::UtilityTable::at)
        .def("contains", &env::UtilityTable::contains)
        .def("set", &env::UtilityTable::set);

    py::class_<env::Environment>(m, "Environment")
        .def_static("synthetic", &env::Environment::synthetic, py::arg("gen"), py::arg("registry"))
        .def_readonly("table", &env::Environment::table);

    m.def("sample_task", [](const env::GenConfig& cfg, std::uint64_t seed) {
        return env::sample_task(cfg, RngStream(seed));
    });
    m.def("judge_answer", [](const env::TaskInstance& t, const std::string& a) {
        return env::judge_answer(t, a);
    });
    m.def("planted_utility_table", &env::planted_utility_table);

    // ---- policy ----
    py::class_<policy::FeatureLayout>(m, "FeatureLayout")
        .def(py::init([](int tag_dim, int task_dim, int t_max) {
                 policy::FeatureLayout l;
                 l.tag_dim = tag_dim;
                 l.task_dim = task_dim;
                 l.t_max = t_max;
                 return l;
             }),
             py::arg("tag_dim") = 32, py::arg("task_dim") = 32, py::arg("t_max") = 4)
        .def_readonly("tag_dim", &policy::FeatureLayout::tag_dim)
        .def_property_readonly("state_dim", &policy::FeatureLayout::state_dim);

    py::class_<policy::PolicyParameters>(m, "PolicyParameters")
        .def_static("zeros", &policy::PolicyParameters::zeros, py::arg("layout"),
                    py::arg("registry_version"))
        .def_readonly("w_act", &policy::PolicyParameters::w_act)
        .def_readonly("w_model", &policy::PolicyParameters::w_model)
        .def_readonly("w_skill", &policy::PolicyParameters::w_skill)
        .def("save", &policy::save_checkpoint)
        .def_static("load", &policy::load_checkpoint);

    // ---- rewards ----
    py::class_<rewards::RewardBreakdown>(m, "RewardBreakdown")
        .def_readonly("r_ans", &rewards::RewardBreakdown::r_ans)
        .def_readonly("r_fmt", &rewards::RewardBreakdown::r_fmt)
        .def_readonly("total", &rewards::RewardBreakdown::total);

    m.def("total_reward",
          [](const protocol::ParsedTrajectory& pt, const env::TaskInstance& task,
             const registry::Registry& reg) {
              auto report = protocol::validate_format(pt, reg);
              return rewards::total_reward(pt, task, report);
          });

    // ---- trainer ----
    py::class_<trainer::TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_static("from_json",
                    [](const std::string& text) {
                        return trainer::train_config_from_json(nlohmann::json::parse(text));
                    })
        .def_readwrite("group_size", &trainer::TrainConfig::group_size)
        .def_readwrite("t_max", &trainer::TrainConfig::t_max)
        .def_readwrite("clip_eps", &trainer::TrainConfig::clip_eps)
        .def_readwrite("dual_clip", &trainer::TrainConfig::dual_clip)
        .def_readwrite("learning_rate", &trainer::TrainConfig::learning_rate)
        .def_readwrite("steps", &trainer::TrainConfig::steps)
        .def_readwrite("batch_size", &trainer::TrainConfig::batch_size)
        .def_readwrite("temperature", &trainer::TrainConfig::temperature)
        .def_readwrite("seed", &trainer::TrainConfig::seed);

    m.def("group_advantages", [](const std::vector<double>& rewards, double eps) {
        auto adv = trainer::group_advantages(rewards, eps);
        py::dict d;
        d["a"] = adv.a;
        d["mean_reward"] = adv.mean_reward;
        d["std_reward"] = adv.std_reward;
        return d;
    });
    m.def("surrogate_objective", &trainer::surrogate_objective, py::arg("ratio"),
          py::arg("advantage"), py::arg("clip_eps") = 0.2, py::arg("dual_clip") = 3.0);

    m.def(
        "train",
        [](const env::Environment& environment, const registry::Registry& reg,
           const trainer::TrainConfig& cfg, int tag_dim) {
            policy::FeatureLayout layout;
            layout.tag_dim = tag_dim;
            layout.task_dim = tag_dim;
            layout.t_max = cfg.t_max;
            auto theta = policy::PolicyParameters::zeros(layout, reg.version);
            RngStream root(cfg.seed);
            std::vector<double> rewards;
            for (int step = 0; step < cfg.steps; ++step) {
                trainer::UpdateStats stats;
                theta = trainer::train_step(theta, environment, reg, cfg,
                                            root.child("train").child(
                                                static_cast<std::uint64_t>(step)),
                                            stats);
                rewards.push_back(stats.mean_reward);
            }
            return py::make_tuple(theta, rewards);
        },
        py::arg("environment"), py::arg("registry"), py::arg("config"), py::arg("tag_dim") = 32,
        "Train from zero-initialized parameters; returns (theta, per-step mean rewards)");

    m.def(
        "evaluate",
        [](const policy::PolicyParameters& theta, const env::Environment& environment,
           const registry::Registry& reg, const trainer::TrainConfig& cfg, int episodes,
           std::uint64_t seed, bool greedy) {
            auto result = analysis::evaluate_policy(
                theta, environment, reg, cfg, episodes, RngStream(seed),
                greedy ? analysis::EvalMode::Greedy : analysis::EvalMode::Sample);
            py::dict d;
            d["mean_reward"] = result.mean_reward;
            d["accuracy"] = result.accuracy;
            d["routing_accuracy"] = result.routing_accuracy;
            d["format_violation_rate"] = result.format_violation_rate;
            d["episodes"] = result.episodes;
            return d;
        },
        py::arg("theta"), py::arg("environment"), py::arg("registry"), py::arg("config"),
        py::arg("episodes"), py::arg("seed") = 0, py::arg("greedy") = true);

    // ---- analysis ----
    m.def("compatibility", [](double u0, double uM, double uK, double uMK) {
        auto r = analysis::compatibility(u0, uM, uK, uMK);
        py::dict d;
        d["delta_m"] = r.delta_m;
        d["delta_k"] = r.delta_k;
        d["compatibility"] = r.compat;
        return d;
    });
    m.def("oracle_utility",
          [](const env::UtilityTable& table, const std::string& type,
             const registry::Registry& reg) {
              auto r = analysis::oracle_utility(table, type, reg);
              return py::make_tuple(r.value, r.model_id, r.skill_id);
          });
    m.def("pass_at_k", &analysis::pass_at_k);
    m.def("sc_at_k", [](const std::vector<std::vector<std::string>>& answers,
                        const std::vector<std::string>& gold) {
        return analysis::sc_at_k(answers, gold);
    });
}
