// ealoc: synthetic CBCT generation, electrode-array localization and
// evaluation, as file-based reproducible workflows.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cil/candidates.hpp"
#include "cil/config.hpp"
#include "cil/eval.hpp"
#include "cil/inference.hpp"
#include "cil/synthgen.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

/// Thrown for bad user input (exit code 2); everything else exits 1.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void write_text_atomic(const fs::path& path, const std::string& content) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw std::runtime_error("cannot open " + tmp.string());
        f << content;
    }
    fs::rename(tmp, path);
}

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    }
};

json make_manifest(const std::string& command, const cil::PipelineConfig& cfg,
                   std::uint64_t seed, const json& inputs, const json& outputs,
                   double duration) {
    json m;
    m["tool_version"] = kVersion;
    m["command"] = command;
    m["config"] = json::parse(cil::config_to_json_text(cfg));
    m["seed"] = seed;
    m["inputs"] = inputs;
    m["outputs"] = outputs;
    m["duration_seconds"] = duration;
    return m;
}

cil::PipelineConfig load_config_checked(const std::string& path) {
    if (path.empty()) return cil::PipelineConfig{};
    if (!fs::exists(path)) throw UsageError("config file not found: " + path);
    try {
        return cil::load_config(path);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
}

std::vector<double> parse_floats(const std::string& s, std::size_t expect,
                                 const std::string& what) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
    if (out.size() != expect)
        throw UsageError(what + ": expected " + std::to_string(expect) +
                         " comma-separated values, got '" + s + "'");
    return out;
}

json result_to_json(const cil::RunResult& res, int runs, std::uint64_t seed) {
    json j;
    auto& arr = j["contacts_mm"] = json::array();
    for (const auto& c : res.positions.positions) arr.push_back({c.x, c.y, c.z});
    j["energy"] = res.energy;
    j["runs"] = runs;
    j["seed"] = seed;
    j["diagnostics"] = {{"reties", res.diagnostics.reties},
                        {"plateaus", res.diagnostics.plateaus},
                        {"iterations", res.n_iterations}};
    return j;
}

/// Shared localization pipeline: unary field + candidates + best-of-N runs.
cil::RunResult localize_volume(const cil::Volume3D& vol, const cil::Box3& voi,
                               const cil::WorldPoint& basal,
                               const cil::PipelineConfig& cfg, int runs,
                               std::uint64_t seed,
                               cil::CandidateSet* cands_out = nullptr) {
    cil::MrfModel model = cfg.model.build();
    cil::UnaryField field =
        cil::build_unary_field(vol, voi, cfg.model.sigma2_mm, cfg.model.blob_scale_mm,
                               cfg.model.theta1, cfg.model.theta2);
    cil::CandidateSet cands = cil::extract_candidates(
        vol, voi, cfg.candidates.scale_mm, cfg.candidates.max_candidates);
    if (cands_out) *cands_out = cands;
    return cil::localize(model, field, cands, basal, voi, cfg.inference, runs, seed);
}

int cmd_generate(const std::string& config_path, int count, std::uint64_t seed,
                 const std::string& out_dir, const std::string& command) {
    Timer timer;
    cil::PipelineConfig cfg = load_config_checked(config_path);
    if (count < 1) throw UsageError("--count must be >= 1");
    fs::create_directories(out_dir);
    json outputs = json::array();
    for (int i = 0; i < count; ++i) {
        std::uint64_t ds_seed = cil::derive_seed(seed, "dataset", i);
        cil::Rng rng(ds_seed);
        cil::SynthParams params = cil::sample_params(rng, cfg.synth);
        params.seed = ds_seed;
        cil::Dataset ds = cil::generate_dataset(params);
        char name[32];
        std::snprintf(name, sizeof(name), "dataset_%03d", i);
        fs::path dir = fs::path(out_dir) / name;
        fs::create_directories(dir);
        cil::write_dataset(ds.volume, ds.gt, ds.params, dir.string());
        outputs.push_back(dir.string());
    }
    json manifest = make_manifest(command, cfg, seed, json::array(), outputs,
                                  timer.seconds());
    write_text_atomic(fs::path(out_dir) / "manifest.json", manifest.dump(2) + "\n");
    std::cout << "generated " << count << " dataset(s) in " << out_dir << "\n";
    return 0;
}

int cmd_localize(const std::string& volume_path, const std::string& voi_str,
                 const std::string& basal_str, const std::string& config_path,
                 int runs, std::uint64_t seed, const std::string& out_dir,
                 bool dump_candidates, const std::string& command) {
    Timer timer;
    cil::PipelineConfig cfg = load_config_checked(config_path);
    if (!fs::exists(volume_path))
        throw UsageError("volume file not found: " + volume_path);
    if (runs < 1) throw UsageError("--runs must be >= 1");

    auto v = parse_floats(voi_str, 6, "--voi");
    cil::Box3 voi{{v[0], v[1], v[2]}, {v[3], v[4], v[5]}};
    if (!(voi.min.x < voi.max.x && voi.min.y < voi.max.y && voi.min.z < voi.max.z))
        throw UsageError("--voi: min must be strictly below max per axis");
    auto b = parse_floats(basal_str, 3, "--basal");
    cil::WorldPoint basal{b[0], b[1], b[2]};
    if (!voi.contains(basal)) throw UsageError("--basal must lie inside the VOI");

    cil::Volume3D vol = cil::read_volume(volume_path);
    cil::CandidateSet cands;
    cil::RunResult res = localize_volume(vol, voi, basal, cfg, runs, seed, &cands);

    fs::create_directories(out_dir);
    write_text_atomic(fs::path(out_dir) / "result.json",
                      result_to_json(res, runs, seed).dump(2) + "\n");
    if (dump_candidates)
        cil::write_candidates(cands, (fs::path(out_dir) / "candidates.json").string());
    json manifest =
        make_manifest(command, cfg, seed, json::array({volume_path}),
                      json::array({(fs::path(out_dir) / "result.json").string()}),
                      timer.seconds());
    write_text_atomic(fs::path(out_dir) / "manifest.json", manifest.dump(2) + "\n");
    std::cout << "energy " << res.energy << ", result written to " << out_dir << "\n";
    return 0;
}

cil::Configuration read_prediction(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw UsageError("prediction file not found: " + path);
    json j = json::parse(f);
    cil::Configuration cfg;
    for (const auto& c : j.at("contacts_mm"))
        cfg.positions.push_back({c[0], c[1], c[2]});
    return cfg;
}

int cmd_evaluate(const std::vector<std::string>& preds,
                 const std::vector<std::string>& gts, const std::string& out_dir,
                 const std::string& command) {
    Timer timer;
    if (preds.size() != gts.size()) {
        std::string msg = "unpaired files:";
        for (std::size_t i = std::min(preds.size(), gts.size()); i < preds.size(); ++i)
            msg += " " + preds[i];
        for (std::size_t i = std::min(preds.size(), gts.size()); i < gts.size(); ++i)
            msg += " " + gts[i];
        throw UsageError(msg);
    }
    if (preds.empty()) throw UsageError("no prediction/ground-truth pairs given");

    std::vector<cil::EvalReport> reports;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (!fs::exists(gts[i])) throw UsageError("ground truth not found: " + gts[i]);
        cil::Configuration pred = read_prediction(preds[i]);
        cil::GroundTruth gt = cil::read_ground_truth(gts[i]);
        reports.push_back(cil::evaluate(fs::path(preds[i]).parent_path().filename().string().empty()
                                            ? preds[i]
                                            : fs::path(preds[i]).parent_path().filename().string(),
                                        pred, gt));
    }
    cil::EvalSummary summary = cil::aggregate(reports);
    fs::create_directories(out_dir);
    cil::write_reports(reports, summary, (fs::path(out_dir) / "report").string());
    json manifest = make_manifest(command, cil::PipelineConfig{}, 0, json::array(),
                                  json::array({(fs::path(out_dir) / "report.json").string()}),
                                  timer.seconds());
    write_text_atomic(fs::path(out_dir) / "manifest.json", manifest.dump(2) + "\n");
    std::cout << "mean score " << summary.mean_score << " mm over " << reports.size()
              << " dataset(s)\n";
    return 0;
}

int cmd_benchmark(const std::string& data_dir, const std::string& config_path,
                  int runs, std::uint64_t seed, const std::string& out_dir,
                  const std::string& command) {
    Timer timer;
    cil::PipelineConfig cfg = load_config_checked(config_path);
    if (!fs::is_directory(data_dir)) throw UsageError("not a directory: " + data_dir);
    if (runs < 1) throw UsageError("--runs must be >= 1");

    std::vector<fs::path> datasets;
    for (const auto& entry : fs::directory_iterator(data_dir))
        if (entry.is_directory() && fs::exists(entry.path() / "volume.raw") &&
            fs::exists(entry.path() / "gt.json"))
            datasets.push_back(entry.path());
    std::sort(datasets.begin(), datasets.end());
    if (datasets.empty()) throw UsageError("no datasets found in " + data_dir);

    fs::create_directories(out_dir);
    std::vector<cil::EvalReport> reports;
    json failures = json::array();
    for (const auto& ds : datasets) {
        std::string name = ds.filename().string();
        try {
            cil::Volume3D vol = cil::read_volume((ds / "volume.raw").string());
            cil::GroundTruth gt = cil::read_ground_truth((ds / "gt.json").string());

            cil::Vec3 lo = gt.contacts.front(), hi = gt.contacts.front();
            for (const auto& c : gt.contacts)
                for (int a = 0; a < 3; ++a) {
                    lo[a] = std::min(lo[a], c[a]);
                    hi[a] = std::max(hi[a], c[a]);
                }
            cil::Box3 voi{lo - cil::Vec3{cfg.voi_margin_mm, cfg.voi_margin_mm,
                                         cfg.voi_margin_mm},
                          hi + cil::Vec3{cfg.voi_margin_mm, cfg.voi_margin_mm,
                                         cfg.voi_margin_mm}};
            cil::WorldPoint basal = gt.contacts.front();

            cil::PipelineConfig ds_cfg = cfg;
            ds_cfg.model.n_nodes = static_cast<int>(gt.contacts.size());
            std::uint64_t ds_seed = cil::derive_seed(seed, "bench-" + name);
            cil::RunResult res = localize_volume(vol, voi, basal, ds_cfg, runs, ds_seed);

            fs::path ds_out = fs::path(out_dir) / name;
            fs::create_directories(ds_out);
            write_text_atomic(ds_out / "result.json",
                              result_to_json(res, runs, ds_seed).dump(2) + "\n");
            reports.push_back(cil::evaluate(name, res.positions, gt));
            std::cout << name << ": score " << reports.back().score << " mm (a "
                      << reports.back().mean_a << ", b " << reports.back().mean_b
                      << ", energy " << res.energy << ")\n";
        } catch (const std::exception& e) {
            failures.push_back({{"dataset", name}, {"error", e.what()}});
            std::cerr << name << ": FAILED: " << e.what() << "\n";
        }
    }

    if (!reports.empty()) {
        cil::EvalSummary summary = cil::aggregate(reports);
        cil::write_reports(reports, summary, (fs::path(out_dir) / "report").string());
        std::cout << "mean score " << summary.mean_score << " mm, median "
                  << summary.median_score << " mm\n";
    }
    json outputs = json::array({(fs::path(out_dir) / "report.json").string()});
    json manifest = make_manifest(command, cfg, seed, json::array({data_dir}), outputs,
                                  timer.seconds());
    manifest["failures"] = failures;
    write_text_atomic(fs::path(out_dir) / "manifest.json", manifest.dump(2) + "\n");
    return failures.empty() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"electrode-array localization toolkit"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    std::string command;
    for (int i = 0; i < argc; ++i) {
        if (i) command += ' ';
        command += argv[i];
    }

    std::string config_path, out_dir, volume_path, voi_str, basal_str, data_dir;
    std::vector<std::string> preds, gts;
    int count = 1, runs = 20;
    std::uint64_t seed = 0;
    bool dump_candidates = false;

    auto* gen = app.add_subcommand("generate", "generate synthetic datasets");
    gen->add_option("--config", config_path, "pipeline config (JSON)");
    gen->add_option("--count", count, "number of datasets")->default_val(1);
    gen->add_option("--seed", seed, "base seed")->default_val(0);
    gen->add_option("--out", out_dir, "output directory")->required();

    auto* loc = app.add_subcommand("localize", "localize electrodes in a volume");
    loc->add_option("--volume", volume_path, "raw volume path (with .json sidecar)")
        ->required();
    loc->add_option("--voi", voi_str, "VOI box: minx,miny,minz,maxx,maxy,maxz (mm)")
        ->required();
    loc->add_option("--basal", basal_str, "basal contact: x,y,z (mm)")->required();
    loc->add_option("--config", config_path, "pipeline config (JSON)");
    loc->add_option("--runs", runs, "number of restarts")->default_val(20);
    loc->add_option("--seed", seed, "base seed")->default_val(0);
    loc->add_option("--out", out_dir, "output directory")->required();
    loc->add_flag("--dump-candidates", dump_candidates, "write candidates.json");

    auto* ev = app.add_subcommand("evaluate", "evaluate predictions against GT");
    ev->add_option("--pred", preds, "prediction json files (contacts_mm)")->required();
    ev->add_option("--gt", gts, "ground truth json files")->required();
    ev->add_option("--out", out_dir, "output directory")->required();

    auto* bench = app.add_subcommand("benchmark", "localize + evaluate a dataset dir");
    bench->add_option("--data", data_dir, "dataset directory from `generate`")
        ->required();
    bench->add_option("--config", config_path, "pipeline config (JSON)");
    bench->add_option("--runs", runs, "restarts per dataset")->default_val(20);
    bench->add_option("--seed", seed, "base seed")->default_val(0);
    bench->add_option("--out", out_dir, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) return cmd_generate(config_path, count, seed, out_dir, command);
        if (loc->parsed())
            return cmd_localize(volume_path, voi_str, basal_str, config_path, runs, seed,
                                out_dir, dump_candidates, command);
        if (ev->parsed()) return cmd_evaluate(preds, gts, out_dir, command);
        if (bench->parsed())
            return cmd_benchmark(data_dir, config_path, runs, seed, out_dir, command);
    } catch (const UsageError& e) {
        std::cerr << json{{"error", e.what()}, {"kind", "usage"}}.dump() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", e.what()}, {"kind", "internal"}}.dump() << "\n";
        return 1;
    }
    return 0;
}
