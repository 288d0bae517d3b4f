// Evaluation metrics: AUROC, AUPR-In/Out, ECE, FPR@95%TPR, AUROC S/F.
//
// Threshold semantics are fixed project-wide: a score s is classified positive
// at threshold t iff s >= t.  AUROC uses midranks (equivalent to pair counting
// with half-weight ties); AUPR is average precision with step interpolation.

#pragma once

#include "uqgan/errors.hpp"
#include "uqgan/ova.hpp"

#include <Eigen/Dense>

#include <map>
#include <string>
#include <vector>

namespace uqgan::metrics {

using Mat = Eigen::MatrixXd;

struct ScoredSet {
    std::vector<double> scores;
    std::vector<int> labels;  // 1 = positive, 0 = negative
};

enum class PositiveClass { in_dist, out_dist };

double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels);

// P(score_pos > score_neg) + 0.5 P(tie), computed with midranks.
double auroc(const ScoredSet& s);

// Average precision.  For PositiveClass::out_dist the labels are flipped and
// scores negated first (low in-distribution score = positive OoD evidence).
double aupr(const ScoredSet& s, PositiveClass positive);

// Largest threshold t with TPR(t) >= 0.95 under "score >= t -> positive";
// returns FPR at that threshold.
double fpr_at_95_tpr(const ScoredSet& s);

// Expected calibration error over equal-width confidence bins.
// Confidence = max posterior entry; a prediction counts as correct when the
// argmax (first index on ties) equals the true label.
double ece(const Mat& posteriors, const std::vector<int>& true_labels, int bins = 15);
// Same binning from precomputed (confidence, correct) pairs; shared by the
// score-file path so both entry points cannot drift apart.
double ece_from_confidence(const std::vector<double>& confidence,
                           const std::vector<int>& correct, int bins = 15);

// AUROC separating correct from incorrect predictions, scored by negative
// predictive entropy: confident-and-correct ranks highest.
double auroc_success_failure(const std::vector<ova::UncertaintyReport>& reports,
                             const std::vector<int>& predictions,
                             const std::vector<int>& true_labels);

struct OodMetrics {
    double auroc = 0.0;
    double aupr_in = 0.0;
    double aupr_out = 0.0;
    double fpr_at_95_tpr = 0.0;
};

struct MetricsReport {
    double accuracy = 0.0;
    double auroc_sf = 0.0;
    double ece = 0.0;
    OodMetrics ood_combined;
    std::map<std::string, OodMetrics> per_ood_dataset;
};

// In-distribution scores for the test split vs. each named OoD set;
// positives are the in-distribution examples.
OodMetrics ood_metrics(const std::vector<double>& in_dist_scores_test,
                       const std::vector<double>& in_dist_scores_ood);

}  // namespace uqgan::metrics
