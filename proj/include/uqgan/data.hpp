// Toy dataset generators, class splitting, prior estimation and the two
// on-disk dataset formats (binary image container, columnar toy text).

#pragma once

#include "uqgan/ova.hpp"
#include "uqgan/rng.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace uqgan::data {

using Mat = Eigen::MatrixXd;

struct Dataset {
    Mat x;                   // n x d feature rows; image pixels scaled to [0,1]
    std::vector<int> y;      // labels, 0..n_classes-1
    std::vector<int> shape;  // {d} for vectors, {c,h,w} for images
    int n_classes = 0;
    // Analytic p(y|x) for synthetic data where it is known; empty otherwise.
    std::function<Mat(const Mat&)> posterior_oracle;

    Eigen::Index size() const { return x.rows(); }
    int dim() const;
    bool is_image() const { return shape.size() == 3; }
};

// Two isotropic Gaussians with means (-sep/2, 0) and (+sep/2, 0), shared
// variance var.  Carries the exact Bayes posterior as an oracle.
Dataset make_two_gaussians(int n_per_class, double sep = 4.0, double var = 1.0,
                           std::uint64_t seed = 0);

// Interleaved half circles with Gaussian jitter.
Dataset make_two_moons(int n_per_class, double noise = 0.1, std::uint64_t seed = 0);

// Nine blobs on a 3x3 grid.  per_blob_9 labels each blob separately;
// grouped_3 merges each grid row into one class.
enum class GridLabels { per_blob_9, grouped_3 };
Dataset make_gaussian_grid(int n_per_blob, GridLabels scheme, double spacing = 4.0,
                           double sigma = 0.5, std::uint64_t seed = 0);

// n points uniformly distributed on the circle of the given radius (origin
// center unless offset); used to probe far-away regions of toy problems.
Mat make_ring(int n, double radius, std::uint64_t seed, double cx = 0.0,
              double cy = 0.0);

// Keep only in_classes (relabeled 0..k-1 in sorted order); everything else
// becomes the out-of-distribution set with its original labels.
struct ClassSplit {
    Dataset in_dist;
    Dataset ood;
    std::vector<int> kept_classes;  // kept_classes[new_label] = original label
};
ClassSplit class_split(const Dataset& d, std::vector<int> in_classes);

// Relative class frequencies from labels; every class must appear.
ova::ClassPriors estimate_priors(const std::vector<int>& y, int n_classes);

// Seeded stratified split; the second part receives ceil(fraction * n_c) of
// each class c.
std::pair<Dataset, Dataset> stratified_split(const Dataset& d, double second_fraction,
                                             std::uint64_t seed);

// Horizontal flip of flattened CHW rows (augmentation for natural images).
Mat hflip_rows(const Mat& x, int c, int h, int w);

// Row / label gathers.
Mat take_rows(const Mat& x, const std::vector<Eigen::Index>& idx);
std::vector<int> take_labels(const std::vector<int>& y,
                             const std::vector<Eigen::Index>& idx);

// Epoch-reshuffling dispenser of fixed-size index batches (a trailing partial
// epoch remainder is dropped into the reshuffled next epoch).
class Batcher {
  public:
    Batcher(Eigen::Index n, int batch, Rng rng);
    std::vector<Eigen::Index> next();
    Eigen::Index batch_size() const { return Eigen::Index(batch_); }

  private:
    std::vector<Eigen::Index> idx_;
    std::size_t batch_;
    std::size_t pos_ = 0;
    Rng rng_;
};

// ---- on-disk formats ------------------------------------------------------------

// Columnar text: one sample per line, feature columns then an integer label,
// '#' starts a comment.  Meant for the 2-D toy problems.
void save_toy_text(const std::string& path, const Dataset& d);
Dataset load_toy_text(const std::string& path);

// Binary image container: magic "UQD1", u32 header fields (count, c, h, w,
// n_classes), i32 labels, u8 pixels (row-major CHW per sample, /255 on load).
void save_image_container(const std::string& path, const Dataset& d);
Dataset load_image_container(const std::string& path);

}  // namespace uqgan::data
