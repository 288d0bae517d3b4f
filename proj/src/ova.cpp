#include "uqgan/ova.hpp"

#include <cmath>
#include <stdexcept>

namespace uqgan::ova {

ClassPriors::ClassPriors(Vec p) : probs(std::move(p)) {
    if (probs.size() < 2) throw std::invalid_argument("ClassPriors: need n >= 2");
    if ((probs.array() <= 0.0).any())
        throw std::invalid_argument("ClassPriors: entries must be strictly positive");
    if (std::abs(probs.sum() - 1.0) > 1e-9)
        throw std::invalid_argument("ClassPriors: entries must sum to 1");
}

ClassPriors ClassPriors::uniform(int n) {
    return ClassPriors(Vec::Constant(n, 1.0 / double(n)));
}

double transform_in_class(double c, int n) {
    if (n < 2) throw std::invalid_argument("transform_in_class: n must be >= 2");
    if (c < 0.0) c = 0.0;
    if (c > 1.0) c = 1.0;
    const double num = c / double(n);
    const double den = num + double(n - 1) * (1.0 - c) / double(n);
    return num / std::max(den, kEps);
}

Mat transform_in_class(const Mat& c_probs, int n) {
    Mat out(c_probs.rows(), c_probs.cols());
    for (Eigen::Index i = 0; i < c_probs.rows(); ++i)
        for (Eigen::Index j = 0; j < c_probs.cols(); ++j)
            out(i, j) = transform_in_class(c_probs(i, j), n);
    return out;
}

namespace {
void check_lengths(const Vec& c_tilde, const ClassPriors& priors, const char* op) {
    if (c_tilde.size() != priors.probs.size())
        throw std::invalid_argument(std::string(op) + ": length mismatch");
}
}  // namespace

Vec class_posterior(const Vec& c_tilde, const ClassPriors& priors) {
    check_lengths(c_tilde, priors, "class_posterior");
    Vec w = (c_tilde.array() + kEps) * priors.probs.array();
    return w / w.sum();
}

Mat class_posterior(const Mat& c_tilde, const ClassPriors& priors) {
    if (c_tilde.cols() != priors.probs.size())
        throw std::invalid_argument("class_posterior: length mismatch");
    Mat out(c_tilde.rows(), c_tilde.cols());
    for (Eigen::Index i = 0; i < c_tilde.rows(); ++i)
        out.row(i) = class_posterior(Vec(c_tilde.row(i)), priors).transpose();
    return out;
}

double in_distribution_score(const Vec& c_tilde, const ClassPriors& priors) {
    check_lengths(c_tilde, priors, "in_distribution_score");
    const Eigen::ArrayXd ce = c_tilde.array() + kEps;
    const double num = (ce.square() * priors.probs.array()).sum();
    const double den = (ce * priors.probs.array()).sum();
    double s = num / std::max(den, kEps);
    if (s < 0.0) s = 0.0;
    if (s > 1.0) s = 1.0;
    return s;
}

Vec in_distribution_score(const Mat& c_tilde, const ClassPriors& priors) {
    Vec out(c_tilde.rows());
    for (Eigen::Index i = 0; i < c_tilde.rows(); ++i)
        out(i) = in_distribution_score(Vec(c_tilde.row(i)), priors);
    return out;
}

double predictive_entropy(const Vec& posterior) {
    if (std::abs(posterior.sum() - 1.0) > 1e-6)
        throw std::invalid_argument("predictive_entropy: input must sum to 1");
    double h = 0.0;
    for (Eigen::Index i = 0; i < posterior.size(); ++i) {
        const double p = posterior(i);
        if (p > 0.0) h -= p * std::log(p);
    }
    return h < 0.0 ? 0.0 : h;
}

UncertaintyReport uncertainty_report(const Vec& c_tilde, const ClassPriors& priors) {
    UncertaintyReport r;
    r.posterior = class_posterior(c_tilde, priors);
    r.in_dist_prob = in_distribution_score(c_tilde, priors);
    r.epistemic = 1.0 - r.in_dist_prob;
    r.aleatoric_raw = predictive_entropy(r.posterior);
    r.aleatoric_masked = r.in_dist_prob * r.aleatoric_raw;
    Eigen::Index arg = 0;
    r.posterior.maxCoeff(&arg);
    r.predicted = int(arg);
    return r;
}

UncertaintyReport uncertainty_report_raw(const OvaOutputs& outputs,
                                         const ClassPriors& priors) {
    if (outputs.n() < 2) throw std::invalid_argument("uncertainty_report_raw: n >= 2");
    Vec ct(outputs.in_class_probs.size());
    for (Eigen::Index i = 0; i < ct.size(); ++i)
        ct(i) = transform_in_class(outputs.in_class_probs(i), outputs.n());
    return uncertainty_report(ct, priors);
}

}  // namespace uqgan::ova
