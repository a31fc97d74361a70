#pragma once

#include <cstdint>
#include <vector>

namespace jlvae {

struct CurvePoint {
    double threshold = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double fpr = 0.0;
    double tpr = 0.0;
};

// Mann-Whitney form: P(score_pos > score_neg) + P(equal) / 2, computed
// exactly by sorting. Throws on single-class input.
double roc_auc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels);

// One point per distinct score value, descending; predictions are
// score >= threshold, so tied scores enter the positive set together.
std::vector<CurvePoint> pr_curve(const std::vector<double>& scores,
                                 const std::vector<std::uint8_t>& labels);

// Step-rule area sum (R_n - R_{n-1}) * P_n over the curve, R_0 = 0.
double prc_auc(const std::vector<CurvePoint>& curve);

// Same summation evaluated directly from scores/labels.
double average_precision(const std::vector<double>& scores,
                         const std::vector<std::uint8_t>& labels);

// Fraction of positives among the k highest scores; ties at the k-th score
// are broken by ascending index.
double top_k_precision(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels,
                       std::size_t k);

struct MetricsSummary {
    double prc_auc = 0.0;
    double aps = 0.0;
    double roc_auc = 0.0;
    double top100_precision = 0.0;
};

// The four headline metrics in one go; top-k uses k = min(100, N).
MetricsSummary compute_metrics(const std::vector<double>& scores,
                               const std::vector<std::uint8_t>& labels);

}  // namespace jlvae
