#include "flmn/image_ops.hpp"

#include <algorithm>
#include <cmath>

namespace flmn::episodes {

GrayImage rotate(const GrayImage& img, double angle) {
  const int s = img.side;
  const double cx = (s - 1) / 2.0;
  const double cy = (s - 1) / 2.0;
  const double ca = std::cos(angle);
  const double sa = std::sin(angle);
  GrayImage out;
  out.side = s;
  out.pixels = Eigen::VectorXd::Zero(s * s);
  for (int y = 0; y < s; ++y) {
    for (int x = 0; x < s; ++x) {
      // Inverse map the output pixel into the source image.
      double dx = x - cx;
      double dy = y - cy;
      double sx = ca * dx + sa * dy + cx;
      double sy = -sa * dx + ca * dy + cy;
      int x0 = static_cast<int>(std::floor(sx));
      int y0 = static_cast<int>(std::floor(sy));
      double fx = sx - x0;
      double fy = sy - y0;
      double acc = 0.0;
      for (int oy = 0; oy <= 1; ++oy) {
        for (int ox = 0; ox <= 1; ++ox) {
          int xi = x0 + ox;
          int yi = y0 + oy;
          if (xi < 0 || xi >= s || yi < 0 || yi >= s) continue;
          double w = (ox ? fx : 1.0 - fx) * (oy ? fy : 1.0 - fy);
          acc += w * img.at(yi, xi);
        }
      }
      out.at(y, x) = acc;
    }
  }
  return out;
}

GrayImage translate(const GrayImage& img, int dx, int dy) {
  const int s = img.side;
  GrayImage out;
  out.side = s;
  out.pixels = Eigen::VectorXd::Zero(s * s);
  for (int y = 0; y < s; ++y) {
    int sy = y - dy;
    if (sy < 0 || sy >= s) continue;
    for (int x = 0; x < s; ++x) {
      int sx = x - dx;
      if (sx < 0 || sx >= s) continue;
      out.at(y, x) = img.at(sy, sx);
    }
  }
  return out;
}

GrayImage area_downscale(const GrayImage& img, int out_side) {
  const int s = img.side;
  const double scale = static_cast<double>(s) / out_side;
  GrayImage out;
  out.side = out_side;
  out.pixels = Eigen::VectorXd::Zero(out_side * out_side);
  for (int oy = 0; oy < out_side; ++oy) {
    double y0 = oy * scale;
    double y1 = (oy + 1) * scale;
    for (int ox = 0; ox < out_side; ++ox) {
      double x0 = ox * scale;
      double x1 = (ox + 1) * scale;
      double acc = 0.0;
      for (int y = static_cast<int>(std::floor(y0)); y < static_cast<int>(std::ceil(y1)); ++y) {
        double wy = std::min<double>(y + 1, y1) - std::max<double>(y, y0);
        if (wy <= 0.0 || y < 0 || y >= s) continue;
        for (int x = static_cast<int>(std::floor(x0)); x < static_cast<int>(std::ceil(x1)); ++x) {
          double wx = std::min<double>(x + 1, x1) - std::max<double>(x, x0);
          if (wx <= 0.0 || x < 0 || x >= s) continue;
          acc += wx * wy * img.at(y, x);
        }
      }
      out.at(oy, ox) = acc / (scale * scale);
    }
  }
  return out;
}

std::pair<double, double> centroid(const GrayImage& img) {
  double mass = 0.0, ry = 0.0, rx = 0.0;
  for (int y = 0; y < img.side; ++y) {
    for (int x = 0; x < img.side; ++x) {
      double v = img.at(y, x);
      mass += v;
      ry += v * y;
      rx += v * x;
    }
  }
  if (mass <= 0.0) return {0.0, 0.0};
  return {ry / mass, rx / mass};
}

}  // namespace flmn::episodes
