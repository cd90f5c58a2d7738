#pragma once

#include <utility>

#include "flmn/dataset.hpp"

namespace flmn::episodes {

// Rotation about the image center, bilinear sampling, zero padding.
GrayImage rotate(const GrayImage& img, double angle);

// Integer pixel shift (positive dx moves content right, dy down), zero fill.
GrayImage translate(const GrayImage& img, int dx, int dy);

// Box/area downscale to out_side x out_side with fractional pixel coverage.
GrayImage area_downscale(const GrayImage& img, int out_side);

// Intensity-weighted centroid as (row, col).
std::pair<double, double> centroid(const GrayImage& img);

}  // namespace flmn::episodes
