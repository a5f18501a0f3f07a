#include "maestro/policy.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "maestro/errors.hpp"
#include "maestro/protocol.hpp"

namespace maestro::policy {

namespace {

constexpr const char* kThinkTexts[] = {
    "weighing which expert and skill fit this task",
    "reviewing the latest evidence before deciding",
};

std::string query_template_text(int index, const env::TaskInstance& task) {
    switch (index) {
    case 0:
        return "solve this " + task.task_type + " problem and report the key finding";
    default:
        return "what is the most likely answer, stated as a single token";
    }
}

int head_cardinality(const PolicyParameters& theta, const ContextFeatures& f, Head head) {
    switch (head) {
    case Head::ActType:
        return 3;
    case Head::Model:
        return static_cast<int>(f.reg->model_tags.rows());
    case Head::Skill:
        return static_cast<int>(f.reg->skill_tags.rows());
    case Head::QueryTemplate:
        return theta.layout.query_templates;
    case Head::AnswerMode:
        return 2;
    case Head::Observation:
        return 1;
    }
    return 1;
}

} // namespace

std::string_view head_name(Head head) {
    switch (head) {
    case Head::ActType:
        return "act_type";
    case Head::Model:
        return "model";
    case Head::Skill:
        return "skill";
    case Head::QueryTemplate:
        return "query_template";
    case Head::AnswerMode:
        return "answer_mode";
    case Head::Observation:
        return "observation";
    }
    return "unknown";
}

Eigen::VectorXd tag_features(std::span<const std::string> tags, int tag_dim) {
    Eigen::VectorXd psi = Eigen::VectorXd::Zero(tag_dim);
    for (const auto& tag : tags) {
        auto bucket = RngStream::fnv1a64(tag) % static_cast<std::uint64_t>(tag_dim);
        psi[static_cast<Eigen::Index>(bucket)] = 1.0;
    }
    return psi;
}

std::shared_ptr<const RegistryFeatures> registry_features(const registry::Registry& reg,
                                                          const FeatureLayout& layout) {
    auto out = std::make_shared<RegistryFeatures>();
    out->version = reg.version;
    out->model_tags.resize(static_cast<Eigen::Index>(reg.models.size()), layout.tag_dim);
    for (std::size_t i = 0; i < reg.models.size(); ++i) {
        out->model_tags.row(static_cast<Eigen::Index>(i)) =
            tag_features(reg.models[i].capability_tags, layout.tag_dim).transpose();
    }
    out->skill_tags.resize(static_cast<Eigen::Index>(reg.skills.size()), layout.tag_dim);
    for (std::size_t i = 0; i < reg.skills.size(); ++i) {
        out->skill_tags.row(static_cast<Eigen::Index>(i)) =
            tag_features(reg.skills[i].capability_tags, layout.tag_dim).transpose();
    }
    return out;
}

Eigen::VectorXd ContextFeatures::flat() const {
    Eigen::VectorXd out(state.size() + model_scores.size() + skill_scores.size());
    out << state, model_scores, skill_scores;
    return out;
}

ContextFeatures featurize(const env::EpisodeState& state, const registry::Registry& reg,
                          const FeatureLayout& layout) {
    return featurize(state, registry_features(reg, layout), layout);
}

ContextFeatures featurize(const env::EpisodeState& state,
                          std::shared_ptr<const RegistryFeatures> reg_features,
                          const FeatureLayout& layout) {
    if (static_cast<int>(state.task.context_features.size()) != layout.task_dim) {
        throw Error(ErrorCode::VersionMismatch,
                    "task context dimension " +
                        std::to_string(state.task.context_features.size()) +
                        " does not match the policy feature layout (" +
                        std::to_string(layout.task_dim) + ")");
    }
    ContextFeatures f;
    f.registry_version = reg_features->version;
    f.reg = std::move(reg_features);
    f.state = Eigen::VectorXd::Zero(layout.state_dim());
    for (int i = 0; i < layout.task_dim; ++i) {
        f.state[i] = state.task.context_features[static_cast<std::size_t>(i)];
    }
    int turn = std::min(state.turn, layout.t_max);
    f.state[layout.task_dim + turn] = 1.0;
    f.state[layout.state_dim() - 1] = state.latest_hint ? 1.0 : 0.0;

    Eigen::VectorXd ctx = f.state.head(layout.task_dim);
    f.model_scores = f.reg->model_tags * ctx;
    f.skill_scores = f.reg->skill_tags * ctx;
    return f;
}

PolicyParameters PolicyParameters::zeros(const FeatureLayout& layout, int registry_version) {
    PolicyParameters p;
    p.layout = layout;
    p.base_registry_version = registry_version;
    int d = layout.state_dim();
    p.w_act = Eigen::MatrixXd::Zero(3, d);
    p.w_model = Eigen::MatrixXd::Zero(layout.tag_dim, layout.task_dim);
    p.w_skill = Eigen::MatrixXd::Zero(layout.tag_dim, layout.task_dim);
    p.w_query = Eigen::MatrixXd::Zero(layout.query_templates, d);
    p.w_answer = Eigen::MatrixXd::Zero(2, d);
    return p;
}

void PolicyParameters::set_zero() {
    w_act.setZero();
    w_model.setZero();
    w_skill.setZero();
    w_query.setZero();
    w_answer.setZero();
}

void PolicyParameters::add_scaled(const PolicyParameters& other, double scale) {
    w_act += scale * other.w_act;
    w_model += scale * other.w_model;
    w_skill += scale * other.w_skill;
    w_query += scale * other.w_query;
    w_answer += scale * other.w_answer;
}

double PolicyParameters::max_abs() const {
    double m = w_act.cwiseAbs().maxCoeff();
    m = std::max(m, w_model.cwiseAbs().maxCoeff());
    m = std::max(m, w_skill.cwiseAbs().maxCoeff());
    m = std::max(m, w_query.cwiseAbs().maxCoeff());
    m = std::max(m, w_answer.cwiseAbs().maxCoeff());
    return m;
}

Eigen::MatrixXd& PolicyParameters::head_matrix(Head head) {
    switch (head) {
    case Head::ActType:
        return w_act;
    case Head::Model:
        return w_model;
    case Head::Skill:
        return w_skill;
    case Head::QueryTemplate:
        return w_query;
    case Head::AnswerMode:
        return w_answer;
    default:
        throw Error(ErrorCode::Internal, "observation records carry no parameters");
    }
}

const Eigen::MatrixXd& PolicyParameters::head_matrix(Head head) const {
    return const_cast<PolicyParameters*>(this)->head_matrix(head);
}

Eigen::VectorXd head_logits(const PolicyParameters& theta, const ContextFeatures& f, Head head) {
    switch (head) {
    case Head::ActType:
        return theta.w_act * f.state;
    case Head::Model:
        return f.reg->model_tags *
               (theta.w_model * f.state.head(theta.layout.task_dim));
    case Head::Skill:
        return f.reg->skill_tags *
               (theta.w_skill * f.state.head(theta.layout.task_dim));
    case Head::QueryTemplate:
        return theta.w_query * f.state;
    case Head::AnswerMode:
        return theta.w_answer * f.state;
    default:
        throw Error(ErrorCode::Internal, "observation records carry no logits");
    }
}

Eigen::VectorXd log_softmax(const Eigen::VectorXd& logits, double temperature) {
    Eigen::VectorXd scaled = logits / temperature;
    double max = scaled.maxCoeff();
    double lse = std::log((scaled.array() - max).exp().sum()) + max;
    return scaled.array() - lse;
}

double head_entropy(const PolicyParameters& theta, const ContextFeatures& f, Head head,
                    double temperature) {
    Eigen::VectorXd lp = log_softmax(head_logits(theta, f, head), temperature);
    return -(lp.array().exp() * lp.array()).sum();
}

double head_log_prob(const PolicyParameters& theta, const ContextFeatures& f, Head head,
                     int chosen, double temperature) {
    Eigen::VectorXd lp = log_softmax(head_logits(theta, f, head), temperature);
    if (chosen < 0 || chosen >= lp.size()) {
        throw Error(ErrorCode::UnresolvableIdentifier,
                    "decision index out of range for head " + std::string(head_name(head)));
    }
    return lp[chosen];
}

void render_action_text(PolicyAction& action, const env::EpisodeState& state,
                        const registry::Registry& reg) {
    switch (action.type) {
    case ActType::Think:
        action.think_text = kThinkTexts[1];
        break;
    case ActType::Search:
        action.think_text = kThinkTexts[0];
        action.model_id = reg.models[static_cast<std::size_t>(action.model_index)].id;
        action.skill_id = reg.skills[static_cast<std::size_t>(action.skill_index)].id;
        action.query_text = query_template_text(action.query_template, state.task);
        break;
    case ActType::Answer:
        action.think_text = kThinkTexts[1];
        if (action.answer_mode == AnswerMode::EmitLatestHint && state.latest_hint) {
            action.answer_text = env::answer_from_hint(*state.latest_hint);
        } else {
            action.answer_text = state.task.direct_guess;
        }
        break;
    }
}

namespace {

int sample_head(const PolicyParameters& theta, const ContextFeatures& f, Head head,
                double temperature, RngStream& rng, std::vector<DecisionRecord>& records,
                int turn) {
    Eigen::VectorXd lp = log_softmax(head_logits(theta, f, head), temperature);
    Eigen::VectorXd probs = lp.array().exp();
    std::vector<double> weights(probs.data(), probs.data() + probs.size());
    int chosen = static_cast<int>(rng.categorical(weights));
    records.push_back(DecisionRecord{head, chosen, lp[chosen], false, turn});
    return chosen;
}

} // namespace

std::pair<PolicyAction, std::vector<DecisionRecord>> sample_action(
    const PolicyParameters& theta, const ContextFeatures& f, const registry::Registry& reg,
    const env::EpisodeState& state, double temperature, RngStream& rng) {
    if (temperature <= 0.0) {
        throw Error(ErrorCode::ConfigError, "sampling temperature must be positive");
    }
    std::vector<DecisionRecord> records;
    PolicyAction action;
    int turn = state.turn;
    action.type =
        static_cast<ActType>(sample_head(theta, f, Head::ActType, temperature, rng, records, turn));
    switch (action.type) {
    case ActType::Think:
        break;
    case ActType::Search:
        action.model_index = sample_head(theta, f, Head::Model, temperature, rng, records, turn);
        action.skill_index = sample_head(theta, f, Head::Skill, temperature, rng, records, turn);
        action.query_template =
            sample_head(theta, f, Head::QueryTemplate, temperature, rng, records, turn);
        break;
    case ActType::Answer:
        action.answer_mode = static_cast<AnswerMode>(
            sample_head(theta, f, Head::AnswerMode, temperature, rng, records, turn));
        break;
    }
    render_action_text(action, state, reg);
    return {std::move(action), std::move(records)};
}

std::vector<DecisionRecord> action_log_prob(const PolicyParameters& theta,
                                            const ContextFeatures& f, const PolicyAction& action,
                                            double temperature) {
    std::vector<DecisionRecord> records;
    auto add = [&](Head head, int chosen) {
        int n = head_cardinality(theta, f, head);
        if (chosen < 0 || chosen >= n) {
            throw Error(ErrorCode::UnresolvableIdentifier,
                        "action references index " + std::to_string(chosen) +
                            " outside head " + std::string(head_name(head)));
        }
        records.push_back(
            DecisionRecord{head, chosen, head_log_prob(theta, f, head, chosen, temperature), false, 0});
    };
    add(Head::ActType, static_cast<int>(action.type));
    switch (action.type) {
    case ActType::Think:
        break;
    case ActType::Search:
        add(Head::Model, action.model_index);
        add(Head::Skill, action.skill_index);
        add(Head::QueryTemplate, action.query_template);
        break;
    case ActType::Answer:
        add(Head::AnswerMode, static_cast<int>(action.answer_mode));
        break;
    }
    return records;
}

PolicyAction greedy_action(const PolicyParameters& theta, const ContextFeatures& f,
                           const registry::Registry& reg, const env::EpisodeState& state) {
    auto argmax = [&](Head head) {
        Eigen::VectorXd logits = head_logits(theta, f, head);
        Eigen::Index best = 0;
        for (Eigen::Index i = 1; i < logits.size(); ++i) {
            if (logits[i] > logits[best]) best = i; // strict: ties keep the lower index
        }
        return static_cast<int>(best);
    };
    PolicyAction action;
    action.type = static_cast<ActType>(argmax(Head::ActType));
    switch (action.type) {
    case ActType::Think:
        break;
    case ActType::Search:
        action.model_index = argmax(Head::Model);
        action.skill_index = argmax(Head::Skill);
        action.query_template = argmax(Head::QueryTemplate);
        break;
    case ActType::Answer:
        action.answer_mode = static_cast<AnswerMode>(argmax(Head::AnswerMode));
        break;
    }
    render_action_text(action, state, reg);
    return action;
}

void accumulate_log_prob_grad(const PolicyParameters& theta, const ContextFeatures& f,
                              const DecisionRecord& record, double coeff, double temperature,
                              PolicyParameters& grad) {
    if (record.masked) return;
    Eigen::VectorXd lp = log_softmax(head_logits(theta, f, record.head), temperature);
    Eigen::VectorXd probs = lp.array().exp();
    double scale = coeff / temperature;
    switch (record.head) {
    case Head::ActType:
    case Head::QueryTemplate:
    case Head::AnswerMode: {
        // d log p(c) / dW = ((e_c - p) f_state^T) / temperature
        Eigen::VectorXd delta = -probs;
        delta[record.chosen] += 1.0;
        grad.head_matrix(record.head).noalias() += scale * delta * f.state.transpose();
        break;
    }
    case Head::Model:
    case Head::Skill: {
        // logits_i = psi_i^T W ctx => d log p(c) / dW = (psi_c - sum_i p_i psi_i) ctx^T / T
        const Eigen::MatrixXd& tags =
            record.head == Head::Model ? f.reg->model_tags : f.reg->skill_tags;
        Eigen::VectorXd delta = tags.row(record.chosen).transpose() - tags.transpose() * probs;
        grad.head_matrix(record.head).noalias() +=
            scale * delta * f.state.head(theta.layout.task_dim).transpose();
        break;
    }
    case Head::Observation:
        break;
    }
}

void save_checkpoint(const PolicyParameters& theta, const std::filesystem::path& path) {
    auto matrix_to_json = [](const Eigen::MatrixXd& m) {
        nlohmann::json rows = nlohmann::json::array();
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            nlohmann::json row = nlohmann::json::array();
            for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
            rows.push_back(std::move(row));
        }
        return rows;
    };
    nlohmann::json j;
    j["schema_version"] = 1;
    j["registry_version"] = theta.base_registry_version;
    j["layout"] = {{"tag_dim", theta.layout.tag_dim},
                   {"task_dim", theta.layout.task_dim},
                   {"t_max", theta.layout.t_max},
                   {"query_templates", theta.layout.query_templates}};
    j["heads"] = {{"act_type", matrix_to_json(theta.w_act)},
                  {"model", matrix_to_json(theta.w_model)},
                  {"skill", matrix_to_json(theta.w_skill)},
                  {"query_template", matrix_to_json(theta.w_query)},
                  {"answer_mode", matrix_to_json(theta.w_answer)}};
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write checkpoint " + path.string());
    out << j.dump(2) << "\n";
}

PolicyParameters load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open checkpoint " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::SchemaError,
                    "checkpoint " + path.string() + " is not valid JSON: " + e.what());
    }
    FeatureLayout layout;
    layout.tag_dim = j.at("layout").at("tag_dim").get<int>();
    layout.task_dim = j.at("layout").at("task_dim").get<int>();
    layout.t_max = j.at("layout").at("t_max").get<int>();
    layout.query_templates = j.at("layout").at("query_templates").get<int>();
    PolicyParameters theta = PolicyParameters::zeros(layout, j.at("registry_version").get<int>());

    auto matrix_from_json = [&](const nlohmann::json& rows, Eigen::MatrixXd& m, const char* name) {
        if (static_cast<Eigen::Index>(rows.size()) != m.rows()) {
            throw Error(ErrorCode::VersionMismatch,
                        std::string("checkpoint head '") + name + "' does not match the layout");
        }
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            const auto& row = rows[static_cast<std::size_t>(r)];
            if (static_cast<Eigen::Index>(row.size()) != m.cols()) {
                throw Error(ErrorCode::VersionMismatch,
                            std::string("checkpoint head '") + name + "' does not match the layout");
            }
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
            }
        }
    };
    matrix_from_json(j.at("heads").at("act_type"), theta.w_act, "act_type");
    matrix_from_json(j.at("heads").at("model"), theta.w_model, "model");
    matrix_from_json(j.at("heads").at("skill"), theta.w_skill, "skill");
    matrix_from_json(j.at("heads").at("query_template"), theta.w_query, "query_template");
    matrix_from_json(j.at("heads").at("answer_mode"), theta.w_answer, "answer_mode");
    return theta;
}

} // namespace maestro::policy
