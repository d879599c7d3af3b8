#ifndef CIL_CONFIG_HPP
#define CIL_CONFIG_HPP

#include <string>

#include "cil/inference.hpp"
#include "cil/mrf.hpp"
#include "cil/synthgen.hpp"

namespace cil {

/// MRF model block of the config file.
struct ModelConfig {
    int n_nodes = 12;
    double d_st1_mm = 1.0;
    double alpha_basal_deg = 170.0;
    double alpha_apical_deg = 120.0;
    double theta1 = 1.0;
    double theta2 = 1.0;
    double theta3 = 4.0;
    double theta4 = 1.0;
    double sigma2_mm = 0.3;
    double blob_scale_mm = 0.25;

    MrfModel build() const;
};

struct CandidateConfig {
    double scale_mm = 0.25;
    int max_candidates = 50;
};

/// Full pipeline configuration, loaded from a JSON file. Missing fields keep
/// their defaults.
struct PipelineConfig {
    SynthRanges synth;
    ModelConfig model;
    InferenceConfig inference;
    CandidateConfig candidates;
    double voi_margin_mm = 1.5;  ///< GT bbox margin used by `benchmark`
};

PipelineConfig load_config(const std::string& path);
PipelineConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const PipelineConfig& cfg);

}  // namespace cil

#endif
