#pragma once

#include <cstdint>
#include <vector>

#include "slidemil/preprocess/image.hpp"
#include "slidemil/preprocess/segment.hpp"

namespace slidemil::synth {

struct Ellipse {
  double cx = 0, cy = 0;  // centre, pixels
  double rx = 1, ry = 1;  // semi-axes, pixels
  preprocess::Rgb color{214, 130, 178};
};

/// A thick straight marker line drawn over everything else.
struct PenStroke {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  double thickness = 8;
  preprocess::Rgb color{40, 40, 40};
};

struct SlideGeometry {
  std::size_t width = 512;
  std::size_t height = 512;
  std::vector<Ellipse> blobs;
  std::vector<PenStroke> pens;
  int noise = 0;  // per-channel uniform jitter in [-noise, noise]
  std::uint64_t seed = 0;
};

struct SlideImage {
  preprocess::RgbImage image;
  /// Exact tissue ground truth at full resolution: inside some blob and not
  /// under a pen stroke. Pixel (x, y) is tested at its centre.
  preprocess::TissueMask mask;
};

bool inside(const Ellipse& e, double px, double py);
bool inside(const PenStroke& p, double px, double py);

SlideImage generate_slide_image(const SlideGeometry& geometry);

}  // namespace slidemil::synth
