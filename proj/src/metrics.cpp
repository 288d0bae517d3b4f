#include "uqgan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace uqgan::metrics {

namespace {
void check_two_classes(const ScoredSet& s, const char* op) {
    if (s.scores.size() != s.labels.size())
        throw std::invalid_argument(std::string(op) + ": scores/labels length mismatch");
    bool pos = false, neg = false;
    for (int l : s.labels) (l == 1 ? pos : neg) = true;
    if (!pos || !neg)
        throw UndefinedMetric(std::string(op) + ": both classes must be present");
    for (double v : s.scores)
        if (!std::isfinite(v))
            throw std::invalid_argument(std::string(op) + ": non-finite score");
}
}  // namespace

double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels) {
    if (predictions.size() != labels.size() || predictions.empty())
        throw std::invalid_argument("accuracy: bad lengths");
    std::size_t hit = 0;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (predictions[i] == labels[i]) ++hit;
    return double(hit) / double(labels.size());
}

double auroc(const ScoredSet& s) {
    check_two_classes(s, "auroc");
    const std::size_t n = s.scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return s.scores[a] < s.scores[b]; });

    // Midranks: tied scores share the average of their 1-based rank range.
    std::vector<double> rank(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && s.scores[order[j + 1]] == s.scores[order[i]]) ++j;
        const double mid = 0.5 * double(i + 1 + j + 1);
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mid;
        i = j + 1;
    }

    double rank_pos = 0.0;
    std::size_t n_pos = 0;
    for (std::size_t k = 0; k < n; ++k)
        if (s.labels[k] == 1) {
            rank_pos += rank[k];
            ++n_pos;
        }
    const std::size_t n_neg = n - n_pos;
    return (rank_pos - 0.5 * double(n_pos) * double(n_pos + 1)) /
           (double(n_pos) * double(n_neg));
}

double aupr(const ScoredSet& s, PositiveClass positive) {
    ScoredSet t = s;
    if (positive == PositiveClass::out_dist) {
        for (auto& v : t.scores) v = -v;
        for (auto& l : t.labels) l = 1 - l;
    }
    check_two_classes(t, "aupr");

    const std::size_t n = t.scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return t.scores[a] > t.scores[b]; });

    std::size_t total_pos = 0;
    for (int l : t.labels) total_pos += (l == 1);

    // Average precision with tied scores grouped: precision is evaluated after
    // each complete group of equal scores (one PR step per distinct value).
    double ap = 0.0;
    std::size_t tp = 0, seen = 0, i = 0;
    while (i < n) {
        std::size_t j = i;
        std::size_t group_tp = 0;
        while (j < n && t.scores[order[j]] == t.scores[order[i]]) {
            group_tp += (t.labels[order[j]] == 1);
            ++j;
        }
        tp += group_tp;
        seen = j;
        if (group_tp > 0) ap += double(group_tp) * double(tp) / double(seen);
        i = j;
    }
    return ap / double(total_pos);
}

double fpr_at_95_tpr(const ScoredSet& s) {
    check_two_classes(s, "fpr_at_95_tpr");
    const std::size_t n = s.scores.size();
    std::size_t total_pos = 0;
    for (int l : s.labels) total_pos += (l == 1);
    const std::size_t total_neg = n - total_pos;

    std::vector<double> thresholds = s.scores;
    std::sort(thresholds.begin(), thresholds.end(), std::greater<double>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    // Descending thresholds: the first (largest) one reaching TPR >= 0.95 wins.
    for (double t : thresholds) {
        std::size_t tp = 0, fp = 0;
        for (std::size_t k = 0; k < n; ++k) {
            if (s.scores[k] >= t) {
                if (s.labels[k] == 1)
                    ++tp;
                else
                    ++fp;
            }
        }
        if (double(tp) / double(total_pos) >= 0.95)
            return double(fp) / double(total_neg);
    }
    return 1.0;  // unreachable: the smallest score classifies everything positive
}

double ece_from_confidence(const std::vector<double>& confidence,
                           const std::vector<int>& correct, int bins) {
    if (confidence.size() != correct.size() || confidence.empty())
        throw std::invalid_argument("ece: bad lengths");
    if (bins < 1) throw std::invalid_argument("ece: bins must be >= 1");
    std::vector<double> conf_sum(bins, 0.0), acc_sum(bins, 0.0);
    std::vector<std::size_t> count(bins, 0);
    for (std::size_t i = 0; i < confidence.size(); ++i) {
        // Bin k covers [k/bins, (k+1)/bins); the last bin also includes 1.
        // Edge membership is decided by comparing against the double-rounded
        // edges themselves, never via multiplication.
        int b = 0;
        while (b + 1 < bins && confidence[i] >= double(b + 1) / double(bins)) ++b;
        conf_sum[b] += confidence[i];
        acc_sum[b] += correct[i];
        ++count[b];
    }
    double e = 0.0;
    const double n = double(confidence.size());
    for (int b = 0; b < bins; ++b) {
        if (count[b] == 0) continue;
        const double c = double(count[b]);
        e += (c / n) * std::abs(acc_sum[b] / c - conf_sum[b] / c);
    }
    return e;
}

double ece(const Mat& posteriors, const std::vector<int>& true_labels, int bins) {
    if (std::size_t(posteriors.rows()) != true_labels.size())
        throw std::invalid_argument("ece: row count != label count");
    std::vector<double> conf(true_labels.size());
    std::vector<int> correct(true_labels.size());
    for (Eigen::Index i = 0; i < posteriors.rows(); ++i) {
        if (std::abs(posteriors.row(i).sum() - 1.0) > 1e-6)
            throw std::invalid_argument("ece: posterior row not normalized");
        Eigen::Index arg = 0;
        conf[i] = posteriors.row(i).maxCoeff(&arg);
        correct[i] = (int(arg) == true_labels[std::size_t(i)]) ? 1 : 0;
    }
    return ece_from_confidence(conf, correct, bins);
}

double auroc_success_failure(const std::vector<ova::UncertaintyReport>& reports,
                             const std::vector<int>& predictions,
                             const std::vector<int>& true_labels) {
    if (reports.size() != predictions.size() || reports.size() != true_labels.size())
        throw std::invalid_argument("auroc_success_failure: length mismatch");
    ScoredSet s;
    s.scores.reserve(reports.size());
    s.labels.reserve(reports.size());
    for (std::size_t i = 0; i < reports.size(); ++i) {
        s.scores.push_back(-reports[i].aleatoric_raw);
        s.labels.push_back(predictions[i] == true_labels[i] ? 1 : 0);
    }
    return auroc(s);
}

OodMetrics ood_metrics(const std::vector<double>& in_dist_scores_test,
                       const std::vector<double>& in_dist_scores_ood) {
    ScoredSet s;
    s.scores = in_dist_scores_test;
    s.labels.assign(in_dist_scores_test.size(), 1);
    s.scores.insert(s.scores.end(), in_dist_scores_ood.begin(), in_dist_scores_ood.end());
    s.labels.insert(s.labels.end(), in_dist_scores_ood.size(), 0);
    OodMetrics m;
    m.auroc = auroc(s);
    m.aupr_in = aupr(s, PositiveClass::in_dist);
    m.aupr_out = aupr(s, PositiveClass::out_dist);
    m.fpr_at_95_tpr = fpr_at_95_tpr(s);
    return m;
}

}  // namespace uqgan::metrics
