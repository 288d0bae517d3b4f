// Toy generators, splits, priors and the on-disk formats.

#include "doctest.h"
#include "uqgan/data.hpp"
#include "uqgan/errors.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

using namespace uqgan;
using data::Dataset;
using data::Mat;

TEST_CASE("Two Gaussians: moments, determinism and Bayes oracle") {
    const int n = 2000;
    Dataset d = data::make_two_gaussians(n, 4.0, 1.0, 123);
    REQUIRE(d.size() == 2 * n);
    CHECK(d.n_classes == 2);
    CHECK(d.shape == std::vector<int>{2});

    // Class means converge at the 3*sigma/sqrt(N) rate.
    const double tol = 3.0 / std::sqrt(double(n));
    Mat m0 = Mat::Zero(1, 2), m1 = Mat::Zero(1, 2);
    for (Eigen::Index i = 0; i < d.size(); ++i)
        (d.y[std::size_t(i)] == 0 ? m0 : m1) += d.x.row(i);
    m0 /= n;
    m1 /= n;
    CHECK(std::abs(m0(0, 0) + 2.0) < tol);
    CHECK(std::abs(m0(0, 1)) < tol);
    CHECK(std::abs(m1(0, 0) - 2.0) < tol);
    CHECK(std::abs(m1(0, 1)) < tol);

    Dataset same = data::make_two_gaussians(n, 4.0, 1.0, 123);
    CHECK((d.x - same.x).cwiseAbs().maxCoeff() == 0.0);
    Dataset other = data::make_two_gaussians(n, 4.0, 1.0, 124);
    CHECK((d.x - other.x).cwiseAbs().maxCoeff() > 0.0);

    REQUIRE(bool(d.posterior_oracle));
    Mat q(2, 2);
    q << 0.0, 0.0, 2.0, 0.0;
    Mat p = d.posterior_oracle(q);
    CHECK(p(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(p(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(p(1, 1) == doctest::Approx(1.0 / (1.0 + std::exp(-8.0))).epsilon(1e-12));
    CHECK(p.row(0).sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("Two moons: ranges and balance") {
    Dataset d = data::make_two_moons(500, 0.05, 7);
    CHECK(d.size() == 1000);
    CHECK(d.n_classes == 2);
    int c0 = 0;
    for (int label : d.y) c0 += label == 0 ? 1 : 0;
    CHECK(c0 == 500);
    CHECK(d.x.col(0).minCoeff() > -1.5);
    CHECK(d.x.col(0).maxCoeff() < 2.5);
    CHECK(d.x.col(1).minCoeff() > -1.0);
    CHECK(d.x.col(1).maxCoeff() < 1.5);
    // Upper moon peaks near (0,1); lower moon dips near (1,-0.5).
    CHECK_FALSE(bool(d.posterior_oracle));
}

TEST_CASE("Gaussian grid: blob placement and the two label schemes") {
    const int n = 400;
    Dataset d9 = data::make_gaussian_grid(n, data::GridLabels::per_blob_9, 4.0, 0.5, 3);
    CHECK(d9.size() == 9 * n);
    CHECK(d9.n_classes == 9);
    const double tol = 3.0 * 0.5 / std::sqrt(double(n));
    for (int blob = 0; blob < 9; ++blob) {
        Mat mean = Mat::Zero(1, 2);
        int count = 0;
        for (Eigen::Index i = 0; i < d9.size(); ++i)
            if (d9.y[std::size_t(i)] == blob) {
                mean += d9.x.row(i);
                ++count;
            }
        REQUIRE(count == n);
        mean /= count;
        CHECK(std::abs(mean(0, 0) - (blob % 3 - 1) * 4.0) < tol);
        CHECK(std::abs(mean(0, 1) - (blob / 3 - 1) * 4.0) < tol);
    }

    Dataset d3 = data::make_gaussian_grid(n, data::GridLabels::grouped_3, 4.0, 0.5, 3);
    CHECK(d3.n_classes == 3);
    for (int c = 0; c < 3; ++c) {
        int count = 0;
        for (int label : d3.y) count += label == c ? 1 : 0;
        CHECK(count == 3 * n);  // one grid row = three blobs
    }
    // Same seed, same points: only the labels differ between the schemes.
    CHECK((d9.x - d3.x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("Ring points lie exactly on the circle") {
    Mat r = data::make_ring(64, 6.0, 11, 1.0, -2.0);
    REQUIRE(r.rows() == 64);
    for (Eigen::Index i = 0; i < r.rows(); ++i) {
        const double dist = std::hypot(r(i, 0) - 1.0, r(i, 1) + 2.0);
        CHECK(dist == doctest::Approx(6.0).epsilon(1e-12));
    }
    Mat r2 = data::make_ring(64, 6.0, 12, 1.0, -2.0);
    CHECK((r - r2).cwiseAbs().maxCoeff() > 0.0);  // rotated by the seed
}

TEST_CASE("Class split relabels kept classes and leaves the rest as-is") {
    Dataset d = data::make_gaussian_grid(50, data::GridLabels::per_blob_9, 4.0, 0.5, 5);
    auto s = data::class_split(d, {5, 3, 4});
    CHECK(s.kept_classes == std::vector<int>{3, 4, 5});
    CHECK(s.in_dist.size() == 150);
    CHECK(s.in_dist.n_classes == 3);
    CHECK(s.ood.size() == 300);
    CHECK(s.ood.n_classes == 9);

    std::set<int> in_labels(s.in_dist.y.begin(), s.in_dist.y.end());
    CHECK(in_labels == std::set<int>{0, 1, 2});
    std::set<int> ood_labels(s.ood.y.begin(), s.ood.y.end());
    CHECK(ood_labels == std::set<int>{0, 1, 2, 6, 7, 8});

    // Bijection: relabeled class sizes match the original ones.
    for (std::size_t k = 0; k < s.kept_classes.size(); ++k) {
        int orig = 0, relab = 0;
        for (int label : d.y) orig += label == s.kept_classes[k] ? 1 : 0;
        for (int label : s.in_dist.y) relab += label == int(k) ? 1 : 0;
        CHECK(orig == relab);
    }

    CHECK_THROWS_AS(data::class_split(d, {}), std::invalid_argument);
    CHECK_THROWS_AS(data::class_split(d, {1, 1}), std::invalid_argument);
    CHECK_THROWS_AS(data::class_split(d, {9}), std::invalid_argument);
}

TEST_CASE("Priors are exact class frequencies") {
    auto p = data::estimate_priors({0, 1, 1, 1}, 2);
    CHECK(p.probs[0] == 0.25);
    CHECK(p.probs[1] == 0.75);
    CHECK_THROWS_AS(data::estimate_priors({0, 0}, 2), std::invalid_argument);
    CHECK_THROWS_AS(data::estimate_priors({0, 2}, 2), std::invalid_argument);
}

TEST_CASE("Stratified split: exact per-class counts, disjoint, deterministic") {
    Dataset d = data::make_two_gaussians(100, 4.0, 1.0, 9);
    auto [train, val] = data::stratified_split(d, 0.2, 42);
    CHECK(train.size() == 160);
    CHECK(val.size() == 40);
    for (int c = 0; c < 2; ++c) {
        int count = 0;
        for (int label : val.y) count += label == c ? 1 : 0;
        CHECK(count == 20);
    }
    // Disjoint and exhaustive: multiset of rows matches the original.
    std::multiset<double> orig, parts;
    for (Eigen::Index i = 0; i < d.size(); ++i) orig.insert(d.x(i, 0));
    for (Eigen::Index i = 0; i < train.size(); ++i) parts.insert(train.x(i, 0));
    for (Eigen::Index i = 0; i < val.size(); ++i) parts.insert(val.x(i, 0));
    CHECK(orig == parts);

    auto [train2, val2] = data::stratified_split(d, 0.2, 42);
    CHECK((val.x - val2.x).cwiseAbs().maxCoeff() == 0.0);
    auto [train3, val3] = data::stratified_split(d, 0.2, 43);
    CHECK((val.x - val3.x).cwiseAbs().maxCoeff() > 0.0);

    auto [all, none] = data::stratified_split(d, 0.0, 1);
    CHECK(all.size() == 200);
    CHECK(none.size() == 0);
}

TEST_CASE("Toy text format round-trips exactly") {
    Dataset d = data::make_two_moons(20, 0.1, 31);
    const std::string path = "toy_roundtrip.txt";
    data::save_toy_text(path, d);
    Dataset back = data::load_toy_text(path);
    CHECK((d.x - back.x).cwiseAbs().maxCoeff() == 0.0);  // 17 digits round-trip
    CHECK(back.y == d.y);
    CHECK(back.n_classes == 2);
    CHECK(back.shape == std::vector<int>{2});

    std::ifstream f(path);
    std::string first;
    std::getline(f, first);
    CHECK(first.rfind("# columns:", 0) == 0);
    std::remove(path.c_str());

    CHECK_THROWS_AS(data::load_toy_text("no_such_file.txt"), IoError);
}

TEST_CASE("Toy text loader rejects malformed rows") {
    const std::string path = "toy_bad.txt";
    {
        std::ofstream f(path);
        f << "0.5 0.5 0\n0.1 1\n";  // second row has fewer columns
    }
    CHECK_THROWS_AS(data::load_toy_text(path), IoError);
    {
        std::ofstream f(path);
        f << "0.5 0.5 0.25\n";  // fractional label
    }
    CHECK_THROWS_AS(data::load_toy_text(path), IoError);
    std::remove(path.c_str());
}

TEST_CASE("Image container round-trips quantized pixels exactly") {
    Dataset d;
    d.shape = {1, 4, 4};
    d.n_classes = 3;
    d.x.resize(2, 16);
    for (Eigen::Index i = 0; i < d.x.size(); ++i)
        d.x.data()[i] = double((i * 13) % 256) / 255.0;
    d.y = {2, 0};
    const std::string path = "img_roundtrip.uqd";
    data::save_image_container(path, d);
    Dataset back = data::load_image_container(path);
    CHECK(back.shape == d.shape);
    CHECK(back.n_classes == 3);
    CHECK(back.y == d.y);
    CHECK((back.x - d.x).cwiseAbs().maxCoeff() == 0.0);
    std::remove(path.c_str());

    Dataset bad = d;
    bad.x(0, 0) = 1.5;
    CHECK_THROWS_AS(data::save_image_container(path, bad), std::invalid_argument);

    {
        std::ofstream f("not_a_container.bin", std::ios::binary);
        f << "JUNKJUNKJUNK";
    }
    CHECK_THROWS_AS(data::load_image_container("not_a_container.bin"), IoError);
    std::remove("not_a_container.bin");
}

TEST_CASE("Horizontal flip reverses pixel columns and is an involution") {
    Mat x(1, 6);  // one image, 2 channels, 1x3
    x << 1, 2, 3, 4, 5, 6;
    Mat f = data::hflip_rows(x, 2, 1, 3);
    Mat want(1, 6);
    want << 3, 2, 1, 6, 5, 4;
    CHECK((f - want).cwiseAbs().maxCoeff() == 0.0);
    CHECK((data::hflip_rows(f, 2, 1, 3) - x).cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(data::hflip_rows(x, 1, 2, 2), std::invalid_argument);
}
