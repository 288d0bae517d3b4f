#include "uqgan/data.hpp"

#include "uqgan/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace uqgan::data {

namespace {
constexpr double kPi = 3.14159265358979323846;

Dataset subset(const Dataset& d, const std::vector<Eigen::Index>& idx) {
    Dataset out;
    out.x.resize(Eigen::Index(idx.size()), d.x.cols());
    out.y.resize(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        out.x.row(Eigen::Index(i)) = d.x.row(idx[i]);
        out.y[i] = d.y[std::size_t(idx[i])];
    }
    out.shape = d.shape;
    out.n_classes = d.n_classes;
    out.posterior_oracle = d.posterior_oracle;
    return out;
}
}  // namespace

int Dataset::dim() const {
    int v = 1;
    for (int s : shape) v *= s;
    return v;
}

Dataset make_two_gaussians(int n_per_class, double sep, double var,
                           std::uint64_t seed) {
    if (n_per_class < 1) throw std::invalid_argument("two_gaussians: empty classes");
    if (var <= 0.0) throw std::invalid_argument("two_gaussians: variance must be > 0");
    Rng rng(seed, "data/two_gaussians");
    const double sd = std::sqrt(var);
    Dataset d;
    d.x.resize(2 * n_per_class, 2);
    d.y.resize(std::size_t(2) * n_per_class);
    for (int c = 0; c < 2; ++c) {
        const double mx = (c == 0 ? -0.5 : 0.5) * sep;
        for (int i = 0; i < n_per_class; ++i) {
            const Eigen::Index r = Eigen::Index(c) * n_per_class + i;
            d.x(r, 0) = mx + sd * rng.normal();
            d.x(r, 1) = sd * rng.normal();
            d.y[std::size_t(r)] = c;
        }
    }
    d.shape = {2};
    d.n_classes = 2;
    // Equal priors and shared isotropic covariance give a logistic Bayes
    // posterior along the mean axis: p(y=1|x) = sigmoid(sep * x0 / var).
    d.posterior_oracle = [sep, var](const Mat& q) {
        Mat p(q.rows(), 2);
        for (Eigen::Index i = 0; i < q.rows(); ++i) {
            const double p1 = 1.0 / (1.0 + std::exp(-sep * q(i, 0) / var));
            p(i, 0) = 1.0 - p1;
            p(i, 1) = p1;
        }
        return p;
    };
    return d;
}

Dataset make_two_moons(int n_per_class, double noise, std::uint64_t seed) {
    if (n_per_class < 1) throw std::invalid_argument("two_moons: empty classes");
    Rng rng(seed, "data/two_moons");
    Dataset d;
    d.x.resize(2 * n_per_class, 2);
    d.y.resize(std::size_t(2) * n_per_class);
    for (int c = 0; c < 2; ++c) {
        for (int i = 0; i < n_per_class; ++i) {
            const Eigen::Index r = Eigen::Index(c) * n_per_class + i;
            const double t = kPi * rng.uniform();
            double px = c == 0 ? std::cos(t) : 1.0 - std::cos(t);
            double py = c == 0 ? std::sin(t) : 0.5 - std::sin(t);
            d.x(r, 0) = px + noise * rng.normal();
            d.x(r, 1) = py + noise * rng.normal();
            d.y[std::size_t(r)] = c;
        }
    }
    d.shape = {2};
    d.n_classes = 2;
    return d;
}

Dataset make_gaussian_grid(int n_per_blob, GridLabels scheme, double spacing,
                           double sigma, std::uint64_t seed) {
    if (n_per_blob < 1) throw std::invalid_argument("gaussian_grid: empty blobs");
    Rng rng(seed, "data/gaussian_grid");
    Dataset d;
    d.x.resize(9 * n_per_blob, 2);
    d.y.resize(std::size_t(9) * n_per_blob);
    for (int gy = 0; gy < 3; ++gy) {
        for (int gx = 0; gx < 3; ++gx) {
            const int blob = gy * 3 + gx;
            const int label = scheme == GridLabels::per_blob_9 ? blob : gy;
            for (int i = 0; i < n_per_blob; ++i) {
                const Eigen::Index r = Eigen::Index(blob) * n_per_blob + i;
                d.x(r, 0) = (gx - 1) * spacing + sigma * rng.normal();
                d.x(r, 1) = (gy - 1) * spacing + sigma * rng.normal();
                d.y[std::size_t(r)] = label;
            }
        }
    }
    d.shape = {2};
    d.n_classes = scheme == GridLabels::per_blob_9 ? 9 : 3;
    return d;
}

Mat make_ring(int n, double radius, std::uint64_t seed, double cx, double cy) {
    if (n < 1) throw std::invalid_argument("make_ring: need at least one point");
    Rng rng(seed, "data/ring");
    const double offset = rng.uniform();  // random rotation, even coverage
    Mat m(n, 2);
    for (int i = 0; i < n; ++i) {
        const double t = 2.0 * kPi * (double(i) + offset) / double(n);
        m(i, 0) = cx + radius * std::cos(t);
        m(i, 1) = cy + radius * std::sin(t);
    }
    return m;
}

ClassSplit class_split(const Dataset& d, std::vector<int> in_classes) {
    if (in_classes.empty()) throw std::invalid_argument("class_split: no classes kept");
    std::sort(in_classes.begin(), in_classes.end());
    if (std::adjacent_find(in_classes.begin(), in_classes.end()) != in_classes.end())
        throw std::invalid_argument("class_split: duplicate class");
    for (int c : in_classes)
        if (c < 0 || c >= d.n_classes)
            throw std::invalid_argument("class_split: class out of range");

    std::vector<int> new_label(std::size_t(d.n_classes), -1);
    for (std::size_t i = 0; i < in_classes.size(); ++i)
        new_label[std::size_t(in_classes[i])] = int(i);

    std::vector<Eigen::Index> in_idx, out_idx;
    for (Eigen::Index i = 0; i < d.size(); ++i)
        (new_label[std::size_t(d.y[std::size_t(i)])] >= 0 ? in_idx : out_idx)
            .push_back(i);

    ClassSplit s;
    s.kept_classes = in_classes;
    s.in_dist = subset(d, in_idx);
    s.in_dist.n_classes = int(in_classes.size());
    s.in_dist.posterior_oracle = nullptr;  // oracle refers to the original labels
    for (auto& label : s.in_dist.y) label = new_label[std::size_t(label)];
    s.ood = subset(d, out_idx);  // original labels, by design
    s.ood.posterior_oracle = nullptr;
    return s;
}

ova::ClassPriors estimate_priors(const std::vector<int>& y, int n_classes) {
    if (n_classes < 2) throw std::invalid_argument("estimate_priors: need >= 2 classes");
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(n_classes);
    for (int label : y) {
        if (label < 0 || label >= n_classes)
            throw std::invalid_argument("estimate_priors: label out of range");
        counts[label] += 1.0;
    }
    if (counts.minCoeff() <= 0.0)
        throw std::invalid_argument("estimate_priors: a class has no examples");
    return ova::ClassPriors(counts / counts.sum());
}

std::pair<Dataset, Dataset> stratified_split(const Dataset& d, double second_fraction,
                                             std::uint64_t seed) {
    if (second_fraction < 0.0 || second_fraction >= 1.0)
        throw std::invalid_argument("stratified_split: fraction must lie in [0,1)");
    Rng rng(seed, "data/split");
    std::vector<std::vector<Eigen::Index>> per_class(std::size_t(d.n_classes));
    for (Eigen::Index i = 0; i < d.size(); ++i)
        per_class.at(std::size_t(d.y[std::size_t(i)])).push_back(i);

    std::vector<Eigen::Index> first, second;
    for (auto& idx : per_class) {
        rng.shuffle(idx);
        const std::size_t take =
            std::size_t(std::ceil(second_fraction * double(idx.size())));
        for (std::size_t i = 0; i < idx.size(); ++i)
            (i < take ? second : first).push_back(idx[i]);
    }
    // Restore original relative order inside each part.
    std::sort(first.begin(), first.end());
    std::sort(second.begin(), second.end());
    return {subset(d, first), subset(d, second)};
}

Mat take_rows(const Mat& x, const std::vector<Eigen::Index>& idx) {
    Mat out(Eigen::Index(idx.size()), x.cols());
    for (std::size_t i = 0; i < idx.size(); ++i)
        out.row(Eigen::Index(i)) = x.row(idx[i]);
    return out;
}

std::vector<int> take_labels(const std::vector<int>& y,
                             const std::vector<Eigen::Index>& idx) {
    std::vector<int> out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) out[i] = y[std::size_t(idx[i])];
    return out;
}

Batcher::Batcher(Eigen::Index n, int batch, Rng rng)
    : idx_(std::size_t(n)),
      batch_(std::min<std::size_t>(std::size_t(batch), std::size_t(n))),
      rng_(std::move(rng)) {
    if (n < 1) throw std::invalid_argument("Batcher: empty index range");
    if (batch < 1) throw std::invalid_argument("Batcher: batch must be positive");
    std::iota(idx_.begin(), idx_.end(), Eigen::Index(0));
    rng_.shuffle(idx_);
}

std::vector<Eigen::Index> Batcher::next() {
    if (pos_ + batch_ > idx_.size()) {
        rng_.shuffle(idx_);
        pos_ = 0;
    }
    std::vector<Eigen::Index> out(idx_.begin() + long(pos_),
                                  idx_.begin() + long(pos_ + batch_));
    pos_ += batch_;
    return out;
}

Mat hflip_rows(const Mat& x, int c, int h, int w) {
    if (x.cols() != Eigen::Index(c) * h * w)
        throw std::invalid_argument("hflip_rows: width does not match c*h*w");
    Mat out(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r)
        for (int ch = 0; ch < c; ++ch)
            for (int row = 0; row < h; ++row)
                for (int col = 0; col < w; ++col)
                    out(r, (ch * h + row) * w + col) =
                        x(r, (ch * h + row) * w + (w - 1 - col));
    return out;
}

// ---- on-disk formats ------------------------------------------------------------

void save_toy_text(const std::string& path, const Dataset& d) {
    if (d.is_image())
        throw std::invalid_argument("save_toy_text: image data belongs in the binary container");
    std::ofstream f(path);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << "# columns: ";
    for (int j = 0; j < d.dim(); ++j) f << "x" << j << " ";
    f << "label\n";
    f.precision(17);
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        for (Eigen::Index j = 0; j < d.x.cols(); ++j) f << d.x(i, j) << " ";
        f << d.y[std::size_t(i)] << "\n";
    }
    if (!f) throw IoError("write failed: " + path);
}

Dataset load_toy_text(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open: " + path);
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    Eigen::Index width = -1;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ss(line);
        std::vector<double> vals;
        double v;
        while (ss >> v) vals.push_back(v);
        if (vals.empty()) continue;
        if (vals.size() < 2)
            throw IoError(path + ":" + std::to_string(lineno) +
                          ": need at least one feature and a label");
        const double raw_label = vals.back();
        vals.pop_back();
        if (raw_label != std::floor(raw_label) || raw_label < 0)
            throw IoError(path + ":" + std::to_string(lineno) +
                          ": label must be a non-negative integer");
        if (width < 0) width = Eigen::Index(vals.size());
        if (Eigen::Index(vals.size()) != width)
            throw IoError(path + ":" + std::to_string(lineno) +
                          ": inconsistent column count");
        rows.push_back(std::move(vals));
        labels.push_back(int(raw_label));
    }
    if (rows.empty()) throw IoError(path + ": no samples");
    Dataset d;
    d.x.resize(Eigen::Index(rows.size()), width);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (Eigen::Index j = 0; j < width; ++j)
            d.x(Eigen::Index(i), j) = rows[i][std::size_t(j)];
    d.y = std::move(labels);
    d.shape = {int(width)};
    d.n_classes = *std::max_element(d.y.begin(), d.y.end()) + 1;
    return d;
}

namespace {
void write_u32(std::ofstream& f, std::uint32_t v) {
    f.write(reinterpret_cast<const char*>(&v), 4);
}
std::uint32_t read_u32(std::ifstream& f, const std::string& path) {
    std::uint32_t v = 0;
    if (!f.read(reinterpret_cast<char*>(&v), 4)) throw IoError("truncated file: " + path);
    return v;
}
}  // namespace

void save_image_container(const std::string& path, const Dataset& d) {
    if (!d.is_image())
        throw std::invalid_argument("save_image_container: dataset has no c,h,w shape");
    if (d.size() > 0 && (d.x.minCoeff() < 0.0 || d.x.maxCoeff() > 1.0))
        throw std::invalid_argument("save_image_container: pixels must lie in [0,1]");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f.write("UQD1", 4);
    write_u32(f, std::uint32_t(d.size()));
    write_u32(f, std::uint32_t(d.shape[0]));
    write_u32(f, std::uint32_t(d.shape[1]));
    write_u32(f, std::uint32_t(d.shape[2]));
    write_u32(f, std::uint32_t(d.n_classes));
    for (int label : d.y) {
        std::int32_t v = label;
        f.write(reinterpret_cast<const char*>(&v), 4);
    }
    std::vector<unsigned char> buf(std::size_t(d.x.cols()));
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        for (Eigen::Index j = 0; j < d.x.cols(); ++j)
            buf[std::size_t(j)] = (unsigned char)std::lround(d.x(i, j) * 255.0);
        f.write(reinterpret_cast<const char*>(buf.data()),
                std::streamsize(buf.size()));
    }
    if (!f) throw IoError("write failed: " + path);
}

Dataset load_image_container(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    char magic[4];
    if (!f.read(magic, 4) || std::memcmp(magic, "UQD1", 4) != 0)
        throw IoError("not a UQD1 container: " + path);
    const std::uint32_t count = read_u32(f, path);
    const std::uint32_t c = read_u32(f, path);
    const std::uint32_t h = read_u32(f, path);
    const std::uint32_t w = read_u32(f, path);
    const std::uint32_t n_classes = read_u32(f, path);
    if (c == 0 || h == 0 || w == 0 || n_classes < 2)
        throw IoError("bad header in " + path);
    Dataset d;
    d.shape = {int(c), int(h), int(w)};
    d.n_classes = int(n_classes);
    d.y.resize(count);
    for (auto& label : d.y) {
        std::int32_t v;
        if (!f.read(reinterpret_cast<char*>(&v), 4))
            throw IoError("truncated labels in " + path);
        label = v;
    }
    const std::size_t dim = std::size_t(c) * h * w;
    d.x.resize(Eigen::Index(count), Eigen::Index(dim));
    std::vector<unsigned char> buf(dim);
    for (std::uint32_t i = 0; i < count; ++i) {
        if (!f.read(reinterpret_cast<char*>(buf.data()), std::streamsize(dim)))
            throw IoError("truncated pixels in " + path);
        for (std::size_t j = 0; j < dim; ++j)
            d.x(Eigen::Index(i), Eigen::Index(j)) = double(buf[j]) / 255.0;
    }
    return d;
}

}  // namespace uqgan::data
