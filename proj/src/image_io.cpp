#include "uqgan/image_io.hpp"

#include "uqgan/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace uqgan::image_io {

Image::Image(int w, int h, int c, std::uint8_t fill)
    : width(w), height(h), channels(c) {
    if (w <= 0 || h <= 0 || (c != 1 && c != 3))
        throw std::invalid_argument("Image: bad dimensions");
    pixels.assign(std::size_t(w) * std::size_t(h) * std::size_t(c), fill);
}

std::uint8_t& Image::at(int x, int y, int c) {
    return pixels[(std::size_t(y) * std::size_t(width) + std::size_t(x)) *
                      std::size_t(channels) +
                  std::size_t(c)];
}

std::uint8_t Image::at(int x, int y, int c) const {
    return pixels[(std::size_t(y) * std::size_t(width) + std::size_t(x)) *
                      std::size_t(channels) +
                  std::size_t(c)];
}

void Image::set_rgb(int x, int y, Rgb color) {
    if (x < 0 || x >= width || y < 0 || y >= height) return;
    if (channels == 1) {
        // Luma-weighted gray so overlays stay visible on grayscale output.
        at(x, y, 0) = std::uint8_t(0.299 * color.r + 0.587 * color.g +
                                   0.114 * color.b + 0.5);
        return;
    }
    at(x, y, 0) = color.r;
    at(x, y, 1) = color.g;
    at(x, y, 2) = color.b;
}

void write_pnm(const std::string& path, const Image& img) {
    if (img.width <= 0 || img.height <= 0)
        throw std::invalid_argument("write_pnm: empty image");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << (img.channels == 3 ? "P6" : "P5") << "\n"
        << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()),
              std::streamsize(img.pixels.size()));
    if (!out) throw IoError("short write to '" + path + "'");
}

void Extent::validate() const {
    if (!(xmin < xmax) || !(ymin < ymax))
        throw std::invalid_argument("Extent: need xmin < xmax and ymin < ymax");
}

Image colorize(const Mat& values, double lo, double hi) {
    if (values.rows() == 0 || values.cols() == 0)
        throw std::invalid_argument("colorize: empty grid");
    if (!(lo < hi)) throw std::invalid_argument("colorize: need lo < hi");
    const Rgb white{255, 255, 255}, orange{255, 140, 0};
    Image img(int(values.cols()), int(values.rows()), 3);
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
        for (Eigen::Index j = 0; j < values.cols(); ++j) {
            const double t =
                std::clamp((values(i, j) - lo) / (hi - lo), 0.0, 1.0);
            const Rgb c{std::uint8_t(white.r + t * (orange.r - white.r) + 0.5),
                        std::uint8_t(white.g + t * (orange.g - white.g) + 0.5),
                        std::uint8_t(white.b + t * (orange.b - white.b) + 0.5)};
            // Grid row 0 is ymin; image row 0 shows ymax.
            img.set_rgb(int(j), int(values.rows() - 1 - i), c);
        }
    }
    return img;
}

void draw_points(Image& img, const Extent& e, const Mat& points_xy, Rgb color,
                 int radius) {
    e.validate();
    if (points_xy.cols() != 2)
        throw std::invalid_argument("draw_points: points must be n x 2");
    if (radius < 0) throw std::invalid_argument("draw_points: negative radius");
    for (Eigen::Index i = 0; i < points_xy.rows(); ++i) {
        const double fx = (points_xy(i, 0) - e.xmin) / (e.xmax - e.xmin);
        const double fy = (points_xy(i, 1) - e.ymin) / (e.ymax - e.ymin);
        if (fx < 0.0 || fx > 1.0 || fy < 0.0 || fy > 1.0) continue;
        const int cx = int(fx * (img.width - 1) + 0.5);
        const int cy = int((1.0 - fy) * (img.height - 1) + 0.5);
        for (int dy = -radius; dy <= radius; ++dy)
            for (int dx = -radius; dx <= radius; ++dx)
                if (dx * dx + dy * dy <= radius * radius)
                    img.set_rgb(cx + dx, cy + dy, color);
    }
}

Image tile_rows(const Mat& x, int c, int h, int w, int n_rows, int n_cols,
                int pad) {
    if (n_rows <= 0 || n_cols <= 0 || pad < 0)
        throw std::invalid_argument("tile_rows: bad grid shape");
    if (c != 1 && c != 3)
        throw std::invalid_argument("tile_rows: need 1 or 3 channels");
    if (x.rows() < Eigen::Index(n_rows) * n_cols)
        throw std::invalid_argument("tile_rows: not enough images for the grid");
    if (x.cols() != Eigen::Index(c) * h * w)
        throw std::invalid_argument("tile_rows: row width != c*h*w");

    const int W = n_cols * w + (n_cols + 1) * pad;
    const int H = n_rows * h + (n_rows + 1) * pad;
    Image img(W, H, c, 0);  // black padding between cells
    for (int r = 0; r < n_rows; ++r) {
        for (int col = 0; col < n_cols; ++col) {
            const Eigen::Index row = Eigen::Index(r) * n_cols + col;
            const int x0 = pad + col * (w + pad);
            const int y0 = pad + r * (h + pad);
            for (int py = 0; py < h; ++py)
                for (int px = 0; px < w; ++px)
                    for (int ch = 0; ch < c; ++ch) {
                        const double v = std::clamp(
                            x(row, Eigen::Index(ch) * h * w + py * w + px), 0.0,
                            1.0);
                        img.at(x0 + px, y0 + py, ch) = std::uint8_t(v * 255.0 + 0.5);
                    }
        }
    }
    return img;
}

void write_grid_text(const std::string& path, const std::vector<double>& xs,
                     const std::vector<double>& ys, const Mat& values,
                     const std::string& value_name) {
    if (values.rows() != Eigen::Index(ys.size()) ||
        values.cols() != Eigen::Index(xs.size()))
        throw std::invalid_argument("write_grid_text: grid shape mismatch");
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "# x y " << value_name << "\n";
    out.precision(17);
    for (std::size_t i = 0; i < ys.size(); ++i)
        for (std::size_t j = 0; j < xs.size(); ++j)
            out << xs[j] << " " << ys[i] << " "
                << values(Eigen::Index(i), Eigen::Index(j)) << "\n";
    if (!out) throw IoError("short write to '" + path + "'");
}

}  // namespace uqgan::image_io
