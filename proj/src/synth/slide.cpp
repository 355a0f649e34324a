#include "slidemil/synth/slide.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "slidemil/common/rng.hpp"

namespace slidemil::synth {

bool inside(const Ellipse& e, double px, double py) {
  const double dx = (px - e.cx) / e.rx, dy = (py - e.cy) / e.ry;
  return dx * dx + dy * dy <= 1.0;
}

bool inside(const PenStroke& p, double px, double py) {
  const double vx = p.x1 - p.x0, vy = p.y1 - p.y0;
  const double len2 = vx * vx + vy * vy;
  const double t = len2 > 0 ? std::clamp(((px - p.x0) * vx + (py - p.y0) * vy) / len2, 0.0, 1.0) : 0.0;
  const double dx = px - (p.x0 + t * vx), dy = py - (p.y0 + t * vy);
  return dx * dx + dy * dy <= 0.25 * p.thickness * p.thickness;
}

SlideImage generate_slide_image(const SlideGeometry& g) {
  SlideImage out{preprocess::RgbImage(g.width, g.height), {}};
  auto& mask = out.mask;
  mask.width = mask.source_width = g.width;
  mask.height = mask.source_height = g.height;
  mask.bits.assign(g.width * g.height, 0);

  Rng rng = make_rng(g.seed, {tag("slide-image")});
  std::uniform_int_distribution<int> jitter(-g.noise, g.noise);
  auto noisy = [&](std::uint8_t c) { return static_cast<std::uint8_t>(std::clamp(c + jitter(rng), 0, 255)); };

  for (std::size_t y = 0; y < g.height; ++y) {
    for (std::size_t x = 0; x < g.width; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      preprocess::Rgb c = preprocess::kWhite;
      bool tissue = false;
      for (const auto& e : g.blobs) {
        if (inside(e, px, py)) {
          c = e.color;
          tissue = true;
        }
      }
      for (const auto& p : g.pens) {
        if (inside(p, px, py)) {
          c = p.color;
          tissue = false;
        }
      }
      if (g.noise > 0) c = {noisy(c.r), noisy(c.g), noisy(c.b)};
      out.image.set(x, y, c);
      mask.bits[y * g.width + x] = tissue ? 1 : 0;
    }
  }
  return out;
}

}  // namespace slidemil::synth
