#include "impart/desk_data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace impart {
namespace {

using Color = std::array<double, 3>;

struct Pose {
  double cx, cy, cos_t, sin_t, radius;

  // Pixel centre -> object frame.
  void local(double x, double y, double& u, double& v) const {
    const double dx = x - cx;
    const double dy = y - cy;
    u = cos_t * dx + sin_t * dy;
    v = -sin_t * dx + cos_t * dy;
  }
};

double box(double u, double v, double hu, double hv) {
  const double qx = std::abs(u) - hu;
  const double qy = std::abs(v) - hv;
  const double outside = std::hypot(std::max(qx, 0.0), std::max(qy, 0.0));
  return outside + std::min(std::max(qx, qy), 0.0);
}

double triangle(double u, double v, double r) {
  double d = -1e9;
  for (int k = 0; k < 3; ++k) {
    const double a = std::numbers::pi / 2 + k * 2.0 * std::numbers::pi / 3.0;
    d = std::max(d, u * std::cos(a) + v * std::sin(a) - 0.5 * r);
  }
  return d;
}

// Signed distance (pixels) of the class shape; negative inside.
double shape_distance(int label, double u, double v, double r) {
  switch (label) {
    case 0: return std::hypot(u, v) - r;
    case 1: return std::abs(std::hypot(u, v) - 0.75 * r) - 0.22 * r;
    case 2: return box(u, v, 0.8 * r, 0.8 * r);
    case 3: return triangle(u, v, r * 1.3);
    case 4:
    case 6: return std::min(box(u, v, r, 0.28 * r), box(u, v, 0.28 * r, r));
    case 5: return box(u, v, r, 0.3 * r);
    case 7: return box(u, v, 0.85 * r, 0.85 * r);
    case 8: {
      const double s = 0.6 * r;
      return std::min(std::hypot(u - s, v), std::hypot(u + s, v)) - 0.45 * r;
    }
    case 9: return std::abs(box(u, v, 0.7 * r, 0.7 * r)) - 0.18 * r;
    default: throw std::out_of_range("desk shape label out of range");
  }
}

double coverage(double d) { return std::clamp(0.5 - d, 0.0, 1.0); }

Color random_color(Rng& rng, double lo = 0.05, double hi = 0.95) {
  return {rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)};
}

double distance(const Color& a, const Color& b) {
  return std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) +
                   (a[2] - b[2]) * (a[2] - b[2]));
}

Color contrasting(const Color& against, Rng& rng, double min_gap) {
  Color c = random_color(rng);
  for (int tries = 0; tries < 64 && distance(c, against) < min_gap; ++tries) c = random_color(rng);
  return c;
}

double rotation_for(int label, Rng& rng) {
  const double pi = std::numbers::pi;
  switch (label) {
    case 4: return rng.uniform(-pi / 18, pi / 18);
    case 6: return pi / 4 + rng.uniform(-pi / 18, pi / 18);
    case 7: return rng.uniform(-pi / 12, pi / 12);
    default: return rng.uniform(0.0, 2.0 * pi);
  }
}

struct Grating {
  double fx, fy;
  Color tint;
};

// Two fixed oriented gratings per class; the class texture of the desk world.
std::array<Grating, 2> class_texture(int label) {
  Rng rng = Rng::derive(0x7465787475726573ULL, static_cast<std::uint64_t>(label));
  std::array<Grating, 2> g;
  for (auto& t : g) {
    const double f = rng.uniform(0.9, 2.2);
    const double a = rng.uniform(0.0, std::numbers::pi);
    t.fx = f * std::cos(a);
    t.fy = f * std::sin(a);
    double n = 0.0;
    for (double& v : t.tint) {
      v = rng.normal();
      n += v * v;
    }
    for (double& v : t.tint) v /= std::sqrt(n / 3.0);
  }
  return g;
}

RgbImage render(int label, Rng& rng, const DeskDataSpec& spec) {
  const int n = spec.size;
  const double half = n / 2.0;
  RgbImage img(n, n, 0.0);

  const Color base = random_color(rng, 0.1, 0.9);
  const double grad_angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
  Color grad_amp;
  for (double& g : grad_amp) g = rng.uniform(-0.15, 0.15);
  struct Wave {
    double fx, fy, phase;
    Color amp;
  };
  std::array<Wave, 3> waves;
  for (auto& w : waves) {
    const double f = rng.uniform(0.2, 0.8);
    const double a = rng.uniform(0.0, 2.0 * std::numbers::pi);
    w.fx = f * std::cos(a);
    w.fy = f * std::sin(a);
    w.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (double& v : w.amp) v = rng.uniform(-0.04, 0.04);
  }

  const double radius = rng.uniform(0.17, 0.32) * n;
  const double theta = rotation_for(label, rng);
  const Pose pose{half + rng.uniform(-0.18, 0.18) * n, half + rng.uniform(-0.18, 0.18) * n,
                  std::cos(theta), std::sin(theta), radius};
  const Color fg = contrasting(base, rng, 0.4);
  const Color fg2 = contrasting(fg, rng, 0.4);
  const double cell = 0.85 * radius / 1.5;

  const bool clutter = rng.uniform() < spec.clutter_probability;
  const Color clutter_color = random_color(rng);
  const double clx = rng.uniform(2.0, n - 2.0);
  const double cly = rng.uniform(2.0, n - 2.0);
  const double clr = rng.uniform(1.5, 3.0);

  // Texture of the own class with probability texture_consistency, else of another class.
  int texture_label = label;
  if (rng.uniform() >= spec.texture_consistency) {
    texture_label = (label + 1 + static_cast<int>(rng.index(spec.num_classes - 1))) % spec.num_classes;
  }
  const auto texture = class_texture(texture_label);
  const double texture_amp = spec.texture_strength * rng.uniform(0.5, 1.5);
  const double texture_phase[2] = {rng.uniform(0.0, 2.0 * std::numbers::pi),
                                   rng.uniform(0.0, 2.0 * std::numbers::pi)};

  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const double px = x + 0.5;
      const double py = y + 0.5;
      const double along =
          ((px - half) * std::cos(grad_angle) + (py - half) * std::sin(grad_angle)) / half;
      Color c;
      for (int k = 0; k < 3; ++k) {
        double v = base[k] + grad_amp[k] * along;
        for (const auto& w : waves) v += w.amp[k] * std::sin(w.fx * px + w.fy * py + w.phase);
        c[k] = v;
      }
      if (clutter) {
        const double a = coverage(std::hypot(px - clx, py - cly) - clr);
        for (int k = 0; k < 3; ++k) c[k] = (1 - a) * c[k] + a * clutter_color[k];
      }
      double u, v;
      pose.local(px, py, u, v);
      const double a = coverage(shape_distance(label, u, v, radius));
      if (a > 0.0) {
        Color paint = fg;
        if (label == 7) {
          const double s = std::sin(std::numbers::pi * u / cell) * std::sin(std::numbers::pi * v / cell);
          const double mix = std::clamp(0.5 + 2.0 * s, 0.0, 1.0);
          for (int k = 0; k < 3; ++k) paint[k] = mix * fg[k] + (1 - mix) * fg2[k];
        }
        for (int k = 0; k < 3; ++k) c[k] = (1 - a) * c[k] + a * paint[k];
      }
      for (int t = 0; t < 2; ++t) {
        const double w = texture_amp * std::sin(texture[t].fx * px + texture[t].fy * py + texture_phase[t]);
        for (int k = 0; k < 3; ++k) c[k] += w * texture[t].tint[k];
      }
      for (int k = 0; k < 3; ++k) {
        img.at(y, x, k) = std::clamp(c[k] + spec.pixel_noise * rng.normal(), 0.0, 1.0);
      }
    }
  }
  return img;
}

}  // namespace

const char* desk_class_name(int label) {
  static constexpr const char* kNames[kDeskMaxClasses] = {
      "disk", "ring", "square", "triangle", "plus", "bar", "cross", "checker", "dumbbell", "frame"};
  if (label < 0 || label >= kDeskMaxClasses) throw std::out_of_range("desk_class_name");
  return kNames[label];
}

LabeledDataset make_desk_dataset(std::size_t count, Split split, std::uint64_t seed,
                                 const DeskDataSpec& spec) {
  if (spec.num_classes < 2 || spec.num_classes > kDeskMaxClasses) {
    throw std::invalid_argument("make_desk_dataset: num_classes must be in [2, 10]");
  }
  if (spec.size < 16) throw std::invalid_argument("make_desk_dataset: size must be >= 16");
  LabeledDataset data(spec.num_classes, split);
  const std::uint64_t stream_seed = mix64(seed) ^ (split == Split::train ? 0x7472ULL : 0x7465ULL);
  for (std::size_t i = 0; i < count; ++i) {
    const int label = static_cast<int>(i % spec.num_classes);
    Rng rng = Rng::derive(stream_seed, i);
    data.add(render(label, rng, spec).quantized(), label);
  }
  return data;
}

}  // namespace impart
