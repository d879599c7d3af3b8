#include "cil/eval.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace cil {

std::vector<double> metric_nearest(const Configuration& pred, const GroundTruth& gt) {
    if (pred.positions.empty() || gt.contacts.empty())
        throw std::invalid_argument("metric_nearest: empty input");
    if (pred.positions.size() != gt.contacts.size())
        throw std::invalid_argument("metric_nearest: contact count mismatch");
    std::vector<double> out;
    out.reserve(pred.positions.size());
    for (const auto& p : pred.positions) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& g : gt.contacts) best = std::min(best, distance(p, g));
        out.push_back(best);
    }
    return out;
}

std::vector<double> metric_labeled(const Configuration& pred, const GroundTruth& gt) {
    if (pred.positions.size() != gt.contacts.size())
        throw std::invalid_argument("metric_labeled: contact count mismatch");
    if (pred.positions.empty())
        throw std::invalid_argument("metric_labeled: empty input");
    std::vector<double> out;
    out.reserve(pred.positions.size());
    for (std::size_t i = 0; i < pred.positions.size(); ++i)
        out.push_back(distance(pred.positions[i], gt.contacts[i]));
    return out;
}

double score(double mean_a, double mean_b) {
    if (mean_a < 0 || mean_b < 0)
        throw std::invalid_argument("score: metric means must be >= 0");
    return (mean_a + mean_b) / 2.0;
}

namespace {

double mean(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / v.size();
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

}  // namespace

EvalReport evaluate(const std::string& dataset, const Configuration& pred,
                    const GroundTruth& gt) {
    EvalReport r;
    r.dataset = dataset;
    r.per_electrode_a = metric_nearest(pred, gt);
    r.per_electrode_b = metric_labeled(pred, gt);
    r.mean_a = mean(r.per_electrode_a);
    r.mean_b = mean(r.per_electrode_b);
    r.score = score(r.mean_a, r.mean_b);
    return r;
}

EvalSummary aggregate(const std::vector<EvalReport>& reports) {
    if (reports.empty()) throw std::invalid_argument("aggregate: empty report list");
    std::vector<double> scores, as, bs;
    for (const auto& r : reports) {
        scores.push_back(r.score);
        as.push_back(r.mean_a);
        bs.push_back(r.mean_b);
    }
    EvalSummary s;
    s.mean_score = mean(scores);
    s.median_score = median(scores);
    s.mean_a = mean(as);
    s.median_a = median(as);
    s.mean_b = mean(bs);
    s.median_b = median(bs);
    return s;
}

void write_reports(const std::vector<EvalReport>& reports, const EvalSummary& summary,
                   const std::string& base_path) {
    nlohmann::json j;
    auto& rows = j["datasets"] = nlohmann::json::array();
    for (const auto& r : reports) {
        nlohmann::json row;
        row["dataset"] = r.dataset;
        row["mean_a"] = r.mean_a;
        row["mean_b"] = r.mean_b;
        row["score"] = r.score;
        row["per_electrode_a"] = r.per_electrode_a;
        row["per_electrode_b"] = r.per_electrode_b;
        rows.push_back(row);
    }
    j["summary"] = {{"mean_score", summary.mean_score},
                    {"median_score", summary.median_score},
                    {"mean_a", summary.mean_a},
                    {"median_a", summary.median_a},
                    {"mean_b", summary.mean_b},
                    {"median_b", summary.median_b}};
    std::ofstream jf(base_path + ".json");
    if (!jf) throw std::runtime_error("write_reports: cannot open " + base_path + ".json");
    jf << j.dump(2) << "\n";

    // CSV with '.' decimal, locale-independent.
    std::ostringstream csv;
    csv.imbue(std::locale::classic());
    csv << "dataset,mean_a,mean_b,score\n";
    for (const auto& r : reports)
        csv << r.dataset << "," << r.mean_a << "," << r.mean_b << "," << r.score << "\n";
    csv << "mean," << summary.mean_a << "," << summary.mean_b << "," << summary.mean_score
        << "\n";
    csv << "median," << summary.median_a << "," << summary.median_b << ","
        << summary.median_score << "\n";
    std::ofstream cf(base_path + ".csv");
    if (!cf) throw std::runtime_error("write_reports: cannot open " + base_path + ".csv");
    cf << csv.str();
}

}  // namespace cil
