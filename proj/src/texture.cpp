// Copyright (c) 2026 The apnv Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <array>
#include <random>

#include "apnv/render.hpp"

namespace apnv {
namespace {

using Rgb = std::array<int, 3>;

class Painter {
 public:
  Painter(ImageU8& img, std::mt19937_64& rng) : img_(img), rng_(rng) {}

  int uniform(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

  void fill(const Rgb& c) { rect(0, 0, img_.width(), img_.height(), c); }

  void rect(int x, int y, int w, int h, const Rgb& c) {
    for (int j = std::max(0, y); j < std::min(img_.height(), y + h); ++j) {
      for (int i = std::max(0, x); i < std::min(img_.width(), x + w); ++i) {
        for (int k = 0; k < 3; ++k) img_(i, j, k) = static_cast<std::uint8_t>(std::clamp(c[k], 0, 255));
      }
    }
  }

  void speckle(int amplitude) {
    for (auto& v : img_.data()) v = static_cast<std::uint8_t>(std::clamp(v + uniform(-amplitude, amplitude), 0, 255));
  }

  /// Light pastel used as the print background.
  Rgb light() { return {uniform(185, 235), uniform(185, 235), uniform(185, 235)}; }
  /// Dark ink that contrasts strongly with `light()`.
  Rgb dark() { return {uniform(10, 90), uniform(10, 90), uniform(10, 90)}; }
  /// Saturated mid-tone accent.
  Rgb accent() {
    Rgb c{uniform(20, 90), uniform(20, 90), uniform(20, 90)};
    c[static_cast<std::size_t>(uniform(0, 2))] = uniform(170, 230);
    return c;
  }

 private:
  ImageU8& img_;
  std::mt19937_64& rng_;
};

// Texture row 0 is the upper edge of a face, so every print shares an "up" direction:
// header band, logo, glyph field, then text lines toward the bottom.
void paint_front(Painter& p, const Rgb& background) {
  p.fill(background);
  const int n = kTextureSize;
  const int header = p.uniform(14, 20);
  p.rect(0, 0, n, header, p.accent());
  const Rgb logo = p.accent();
  p.rect(p.uniform(4, n / 2), p.uniform(header + 6, header + 14), p.uniform(28, 44), p.uniform(16, 24), logo);
  const int glyphs = p.uniform(14, 20);
  for (int g = 0; g < glyphs; ++g) {
    const Rgb ink = p.uniform(0, 3) == 0 ? p.accent() : p.dark();
    p.rect(p.uniform(0, n - 8), p.uniform(n / 2 - 8, 3 * n / 4), p.uniform(5, 18), p.uniform(4, 12), ink);
  }
  const int lines = p.uniform(6, 9);
  for (int l = 0; l < lines; ++l) {
    p.rect(p.uniform(2, 20), 3 * n / 4 + 4 + 3 * l, p.uniform(40, n - 30), 2, p.dark());
  }
}

void paint_back(Painter& p, const Rgb& background) {
  p.fill(background);
  const int n = kTextureSize;
  const int bw = p.uniform(44, 64), bh = p.uniform(26, 40);
  const int bx = p.uniform(4, n - bw - 4), by = p.uniform(n / 2, n - bh - 4);
  p.rect(bx - 3, by - 3, bw + 6, bh + 6, {245, 245, 245});
  for (int x = bx; x < bx + bw;) {
    const int stripe = p.uniform(1, 4);
    p.rect(x, by, stripe, bh, {15, 15, 15});
    x += stripe + p.uniform(1, 3);
  }
  // a few small text bars above the code
  for (int l = 0; l < 3; ++l) p.rect(p.uniform(4, n / 2), p.uniform(8, n / 3), p.uniform(16, 40), 2, p.dark());
}

void paint_side(Painter& p, const Rgb& background) {
  p.fill(background);
  const int band = p.uniform(10, 18);
  p.rect(0, p.uniform(8, 20), kTextureSize, band, p.accent());
  p.speckle(2);
}

void paint_plain(Painter& p, const Rgb& background) {
  p.fill(background);
  p.speckle(3);
}

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

TextureAtlas procedural_texture(const ProductSpec& spec, int cylinder_facets) {
  const Mesh mesh = canonical_mesh(spec, cylinder_facets);
  std::mt19937_64 product_rng(mix(spec.texture_seed));
  ImageU8 scratch;
  Painter palette(scratch, product_rng);
  const Rgb background = palette.light();
  const Rgb plain = palette.light();

  TextureAtlas atlas;
  for (std::size_t slot = 0; slot < mesh.slot_roles.size(); ++slot) {
    ImageU8 img(kTextureSize, kTextureSize, 3);
    std::mt19937_64 rng(mix(spec.texture_seed * 1315423911ULL + slot + 1));
    Painter p(img, rng);
    switch (mesh.slot_roles[slot]) {
      case FaceRole::Front: paint_front(p, background); break;
      case FaceRole::Back: paint_back(p, background); break;
      case FaceRole::Side: paint_side(p, background); break;
      case FaceRole::Top:
      case FaceRole::Bottom: paint_plain(p, plain); break;
    }
    atlas.slots.push_back(std::move(img));
  }
  return atlas;
}

}  // namespace apnv
