#ifndef CIL_EVAL_HPP
#define CIL_EVAL_HPP

#include <string>
#include <vector>

#include "cil/mrf.hpp"
#include "cil/synthgen.hpp"

namespace cil {

/// Per-dataset localization errors. Metric a) is the distance from each
/// predicted electrode to the nearest GT contact, metric b) to the same-label
/// contact; the score is the average of the two means.
struct EvalReport {
    std::string dataset;
    std::vector<double> per_electrode_a;
    std::vector<double> per_electrode_b;
    double mean_a = 0.0;
    double mean_b = 0.0;
    double score = 0.0;
};

std::vector<double> metric_nearest(const Configuration& pred, const GroundTruth& gt);
std::vector<double> metric_labeled(const Configuration& pred, const GroundTruth& gt);
double score(double mean_a, double mean_b);

EvalReport evaluate(const std::string& dataset, const Configuration& pred,
                    const GroundTruth& gt);

/// Mean and median of score/mean_a/mean_b across datasets; the median of an
/// even count is the midpoint average.
struct EvalSummary {
    double mean_score = 0.0, median_score = 0.0;
    double mean_a = 0.0, median_a = 0.0;
    double mean_b = 0.0, median_b = 0.0;
};

EvalSummary aggregate(const std::vector<EvalReport>& reports);

/// report.json and report.csv (columns: dataset, mean_a, mean_b, score;
/// summary rows appended). base_path gets ".json"/".csv" suffixes.
void write_reports(const std::vector<EvalReport>& reports, const EvalSummary& summary,
                   const std::string& base_path);

}  // namespace cil

#endif
