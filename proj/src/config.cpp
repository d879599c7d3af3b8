#include "cil/config.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace cil {

namespace {

constexpr double kPi = 3.14159265358979323846;

template <typename T>
void opt(const nlohmann::json& j, const char* key, T& field) {
    if (j.contains(key)) field = j.at(key).get<T>();
}

void opt_range(const nlohmann::json& j, const char* key, std::pair<double, double>& r) {
    if (j.contains(key)) {
        auto a = j.at(key);
        r = {a.at(0).get<double>(), a.at(1).get<double>()};
    }
}

void opt_range(const nlohmann::json& j, const char* key, std::pair<int, int>& r) {
    if (j.contains(key)) {
        auto a = j.at(key);
        r = {a.at(0).get<int>(), a.at(1).get<int>()};
    }
}

}  // namespace

MrfModel ModelConfig::build() const {
    return MrfModel::make(n_nodes, d_st1_mm, alpha_basal_deg * kPi / 180.0,
                          alpha_apical_deg * kPi / 180.0, theta3, theta4);
}

PipelineConfig config_from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
    }
    PipelineConfig c;
    if (j.contains("synth")) {
        const auto& s = j["synth"];
        opt_range(s, "l_prior", c.synth.l_prior);
        opt_range(s, "alpha", c.synth.alpha);
        opt_range(s, "lambda1", c.synth.lambda1);
        opt_range(s, "lambda2", c.synth.lambda2);
        opt_range(s, "lambda3", c.synth.lambda3);
        opt_range(s, "lambda4", c.synth.lambda4);
        opt_range(s, "theta", c.synth.theta);
        opt_range(s, "sigma1", c.synth.sigma1);
        opt_range(s, "n_bones", c.synth.n_bones);
        opt_range(s, "noise_sigma", c.synth.noise_sigma);
        opt(s, "n_electrodes", c.synth.n_electrodes);
        opt(s, "hires_dims", c.synth.hires_dims);
        opt(s, "target_dims", c.synth.target_dims);
        opt(s, "guard_mm", c.synth.guard_mm);
        c.synth.validate();
    }
    if (j.contains("model")) {
        const auto& m = j["model"];
        opt(m, "n_nodes", c.model.n_nodes);
        opt(m, "d_st1_mm", c.model.d_st1_mm);
        opt(m, "alpha_basal_deg", c.model.alpha_basal_deg);
        opt(m, "alpha_apical_deg", c.model.alpha_apical_deg);
        opt(m, "theta1", c.model.theta1);
        opt(m, "theta2", c.model.theta2);
        opt(m, "theta3", c.model.theta3);
        opt(m, "theta4", c.model.theta4);
        opt(m, "sigma2_mm", c.model.sigma2_mm);
        opt(m, "blob_scale_mm", c.model.blob_scale_mm);
    }
    if (j.contains("inference")) {
        const auto& i = j["inference"];
        opt(i, "n_iterations", c.inference.n_iterations);
        opt(i, "mcmc_steps", c.inference.mcmc_steps);
        opt(i, "particles_per_node", c.inference.particles_per_node);
        opt(i, "k_nearest", c.inference.k_nearest);
        opt(i, "plateau_window", c.inference.plateau_window);
        opt(i, "plateau_epsilon_scale", c.inference.plateau_epsilon_scale);
        opt(i, "diversity_radius_factor", c.inference.diversity_radius_factor);
        opt(i, "init_jitter_factor", c.inference.init_jitter_factor);
    }
    if (j.contains("candidates")) {
        const auto& k = j["candidates"];
        opt(k, "scale_mm", c.candidates.scale_mm);
        opt(k, "max_candidates", c.candidates.max_candidates);
    }
    opt(j, "voi_margin_mm", c.voi_margin_mm);
    return c;
}

PipelineConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("config: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(f)),
                     std::istreambuf_iterator<char>());
    return config_from_json_text(text);
}

std::string config_to_json_text(const PipelineConfig& c) {
    nlohmann::json j;
    auto pr = [](const auto& p) { return nlohmann::json{p.first, p.second}; };
    j["synth"] = {{"l_prior", pr(c.synth.l_prior)},
                  {"alpha", pr(c.synth.alpha)},
                  {"lambda1", pr(c.synth.lambda1)},
                  {"lambda2", pr(c.synth.lambda2)},
                  {"lambda3", pr(c.synth.lambda3)},
                  {"lambda4", pr(c.synth.lambda4)},
                  {"theta", pr(c.synth.theta)},
                  {"sigma1", pr(c.synth.sigma1)},
                  {"n_bones", pr(c.synth.n_bones)},
                  {"noise_sigma", pr(c.synth.noise_sigma)},
                  {"n_electrodes", c.synth.n_electrodes},
                  {"hires_dims", c.synth.hires_dims},
                  {"target_dims", c.synth.target_dims},
                  {"guard_mm", c.synth.guard_mm}};
    j["model"] = {{"n_nodes", c.model.n_nodes},
                  {"d_st1_mm", c.model.d_st1_mm},
                  {"alpha_basal_deg", c.model.alpha_basal_deg},
                  {"alpha_apical_deg", c.model.alpha_apical_deg},
                  {"theta1", c.model.theta1},
                  {"theta2", c.model.theta2},
                  {"theta3", c.model.theta3},
                  {"theta4", c.model.theta4},
                  {"sigma2_mm", c.model.sigma2_mm},
                  {"blob_scale_mm", c.model.blob_scale_mm}};
    j["inference"] = {{"n_iterations", c.inference.n_iterations},
                      {"mcmc_steps", c.inference.mcmc_steps},
                      {"particles_per_node", c.inference.particles_per_node},
                      {"k_nearest", c.inference.k_nearest},
                      {"plateau_window", c.inference.plateau_window},
                      {"plateau_epsilon_scale", c.inference.plateau_epsilon_scale},
                      {"diversity_radius_factor", c.inference.diversity_radius_factor},
                      {"init_jitter_factor", c.inference.init_jitter_factor}};
    j["candidates"] = {{"scale_mm", c.candidates.scale_mm},
                       {"max_candidates", c.candidates.max_candidates}};
    j["voi_margin_mm"] = c.voi_margin_mm;
    return j.dump(2);
}

}  // namespace cil
