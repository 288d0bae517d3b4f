// Minimal raster output: binary PGM/PPM writing, a white-to-orange heatmap
// colormap, scatter overlays, and sample-grid tiling.  All pixel work is
// deterministic so emitted files are byte-stable under fixed inputs.

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace uqgan::image_io {

using Mat = Eigen::MatrixXd;

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
};

struct Image {
    int width = 0;
    int height = 0;
    int channels = 1;  // 1 = grayscale (PGM), 3 = RGB (PPM)
    std::vector<std::uint8_t> pixels;  // row-major, interleaved channels

    Image() = default;
    Image(int w, int h, int c, std::uint8_t fill = 255);
    std::uint8_t& at(int x, int y, int c);
    std::uint8_t at(int x, int y, int c) const;
    void set_rgb(int x, int y, Rgb color);  // ignores out-of-bounds points
};

// Binary PGM (1 channel) or PPM (3 channels), maximum value 255.
void write_pnm(const std::string& path, const Image& img);

// Rectangle in data coordinates mapped onto the full image; row 0 of the
// image is ymax (vertical axis points up, as in the figures).
struct Extent {
    double xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;
    void validate() const;
};

// values(i, j) = value at grid row i (y index, ymin at i = 0), column j
// (x index).  Values are clamped to [lo, hi] and mapped linearly from white
// (lo) to orange (hi), one pixel per cell.
Image colorize(const Mat& values, double lo, double hi);

// Draw filled discs of the given pixel radius at each (x, y) row of
// points_xy, positioned inside the extent.  Out-of-extent points are ignored.
void draw_points(Image& img, const Extent& e, const Mat& points_xy, Rgb color,
                 int radius = 1);

// Tile a batch of images (rows of x, each c*h*w pixels in [0,1], planes
// outermost) into an n_rows x n_cols grid with a padding border between
// cells.  Row-major fill: row r holds images r*n_cols .. r*n_cols+n_cols-1.
Image tile_rows(const Mat& x, int c, int h, int w, int n_rows, int n_cols,
                int pad = 2);

// Columnar text alongside every heatmap: "x y value" per grid cell with a
// header comment, 17 significant digits.
void write_grid_text(const std::string& path, const std::vector<double>& xs,
                     const std::vector<double>& ys, const Mat& values,
                     const std::string& value_name);

}  // namespace uqgan::image_io
