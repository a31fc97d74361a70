#include "jlvae/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "jlvae/error.hpp"

namespace jlvae {

namespace {

void check_sizes(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels) {
    if (scores.size() != labels.size()) {
        throw ShapeError("metrics: " + std::to_string(scores.size()) + " scores vs " +
                         std::to_string(labels.size()) + " labels");
    }
    if (scores.empty()) throw ValueError("metrics: empty input");
}

// Indices sorted by descending score; ascending index within ties.
std::vector<std::size_t> descending_order(const std::vector<double>& scores) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });
    return order;
}

}  // namespace

double roc_auc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels) {
    check_sizes(scores, labels);
    std::size_t n_pos = 0, n_neg = 0;
    for (auto l : labels) (l ? n_pos : n_neg)++;
    if (n_pos == 0 || n_neg == 0) {
        throw ValueError("roc_auc: both classes must be present");
    }

    // Ascending sweep: each positive beats every negative strictly below it,
    // half-credits negatives tied with it.
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double numerator = 0.0;
    std::size_t neg_below = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        std::size_t pos_tied = 0, neg_tied = 0;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            (labels[order[j]] ? pos_tied : neg_tied)++;
            ++j;
        }
        numerator += static_cast<double>(pos_tied) * static_cast<double>(neg_below) +
                     0.5 * static_cast<double>(pos_tied) * static_cast<double>(neg_tied);
        neg_below += neg_tied;
        i = j;
    }
    return numerator / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

std::vector<CurvePoint> pr_curve(const std::vector<double>& scores,
                                 const std::vector<std::uint8_t>& labels) {
    check_sizes(scores, labels);
    std::size_t n_pos = 0, n_neg = 0;
    for (auto l : labels) (l ? n_pos : n_neg)++;
    if (n_pos == 0) throw ValueError("pr_curve: at least one positive required");

    const auto order = descending_order(scores);
    std::vector<CurvePoint> curve;
    std::size_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double threshold = scores[order[i]];
        while (i < order.size() && scores[order[i]] == threshold) {
            (labels[order[i]] ? tp : fp)++;
            ++i;
        }
        CurvePoint p;
        p.threshold = threshold;
        p.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        p.recall = static_cast<double>(tp) / static_cast<double>(n_pos);
        p.tpr = p.recall;
        p.fpr = n_neg == 0 ? 0.0 : static_cast<double>(fp) / static_cast<double>(n_neg);
        curve.push_back(p);
    }
    return curve;
}

double prc_auc(const std::vector<CurvePoint>& curve) {
    double area = 0.0;
    double prev_recall = 0.0;
    for (const auto& p : curve) {
        area += (p.recall - prev_recall) * p.precision;
        prev_recall = p.recall;
    }
    return area;
}

double average_precision(const std::vector<double>& scores,
                         const std::vector<std::uint8_t>& labels) {
    return prc_auc(pr_curve(scores, labels));
}

double top_k_precision(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels,
                       std::size_t k) {
    check_sizes(scores, labels);
    if (k == 0 || k > scores.size()) {
        throw ValueError("top_k_precision: k=" + std::to_string(k) + " outside [1, " +
                         std::to_string(scores.size()) + "]");
    }
    const auto order = descending_order(scores);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < k; ++i) hits += labels[order[i]] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(k);
}

MetricsSummary compute_metrics(const std::vector<double>& scores,
                               const std::vector<std::uint8_t>& labels) {
    MetricsSummary s;
    const auto curve = pr_curve(scores, labels);
    s.prc_auc = prc_auc(curve);
    s.aps = average_precision(scores, labels);
    s.roc_auc = roc_auc(scores, labels);
    s.top100_precision = top_k_precision(scores, labels, std::min<std::size_t>(100, scores.size()));
    return s;
}

}  // namespace jlvae
