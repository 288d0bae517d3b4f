// One-vs-all probability calculus: converts per-class in-class probabilities
// C(i|x,y) into class posteriors and uncertainty scores.
//
// All functions are pure.  An eps floor keeps every denominator and log
// argument positive; far away from the data all C(i|x,y) go to zero and the
// floor makes the posterior fall back to the class priors while the
// in-distribution score collapses to ~0 (maximal epistemic uncertainty).

#pragma once

#include <Eigen/Dense>

#include <vector>

namespace uqgan::ova {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kEps = 1e-7;

// Raw per-class in-class probabilities C(i|x,y) for one example.
struct OvaOutputs {
    Vec in_class_probs;  // length n, entries in [0,1]
    int n() const { return int(in_class_probs.size()); }
};

// Estimated relative class frequencies p(y); strictly positive, sums to 1.
struct ClassPriors {
    Vec probs;
    explicit ClassPriors(Vec p);
    static ClassPriors uniform(int n);
    int n() const { return int(probs.size()); }
};

struct UncertaintyReport {
    Vec posterior;           // p(y|x), sums to 1
    double in_dist_prob;     // C~(i|x)
    double epistemic;        // 1 - in_dist_prob
    double aleatoric_raw;    // H(x), nats
    double aleatoric_masked; // in_dist_prob * H(x)
    int predicted;           // argmax posterior
};

// Balanced-class transformation: C~ = (c/n) / (c/n + (n-1)(1-c)/n).
double transform_in_class(double c, int n);
Mat transform_in_class(const Mat& c_probs, int n);  // elementwise over a batch

// p(y|x) from transformed probabilities C~(i|x,y).  All-zero inputs return
// the priors exactly (the eps floor cancels).
Vec class_posterior(const Vec& c_tilde, const ClassPriors& priors);
Mat class_posterior(const Mat& c_tilde, const ClassPriors& priors);  // rows = examples

// C~(i|x) = sum_y C~(i|x,y)^2 p(y) / sum_y' C~(i|x,y') p(y'), clamped to [0,1].
double in_distribution_score(const Vec& c_tilde, const ClassPriors& priors);
Vec in_distribution_score(const Mat& c_tilde, const ClassPriors& priors);

// Shannon entropy, natural log, 0*log 0 := 0.  Input must sum to 1 within 1e-6.
double predictive_entropy(const Vec& posterior);

// Full report from transformed probabilities.
UncertaintyReport uncertainty_report(const Vec& c_tilde, const ClassPriors& priors);
// Convenience: applies the balanced-class transform to raw outputs first.
UncertaintyReport uncertainty_report_raw(const OvaOutputs& outputs,
                                         const ClassPriors& priors);

}  // namespace uqgan::ova
