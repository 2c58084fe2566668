// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The F2Net Authors

#include "f2net/data_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

namespace f2net {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// PNG codecs

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_fail(png_structp, png_const_charp msg) { throw ImageIoError(msg); }
void png_warn(png_structp, png_const_charp) {}

void write_png_impl(const fs::path& path, int height, int width, int color_type,
                    const std::vector<std::uint8_t>& rows, int row_bytes, const std::vector<Rgb>* palette) {
  FilePtr f(std::fopen(path.string().c_str(), "wb"));
  if (!f) throw ImageIoError("cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  png_infop info = png_create_info_struct(png);
  try {
    png_init_io(png, f.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8, color_type,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    std::vector<png_color> pal;
    if (palette) {
      for (const Rgb& c : *palette) pal.push_back(png_color{c[0], c[1], c[2]});
      png_set_PLTE(png, info, pal.data(), static_cast<int>(pal.size()));
    }
    png_write_info(png, info);
    for (int y = 0; y < height; ++y) {
      png_write_row(png, const_cast<png_bytep>(rows.data() + static_cast<std::size_t>(y) * row_bytes));
    }
    png_write_end(png, nullptr);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
  png_destroy_write_struct(&png, &info);
}

}  // namespace

Image8 read_png(const fs::path& path) {
  FilePtr f(std::fopen(path.string().c_str(), "rb"));
  if (!f) throw ImageIoError("cannot open " + path.string());
  png_byte sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw ImageIoError(path.string() + " is not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  png_infop info = png_create_info_struct(png);
  Image8 img;
  try {
    png_init_io(png, f.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);
    img.width = static_cast<int>(png_get_image_width(png, info));
    img.height = static_cast<int>(png_get_image_height(png, info));
    img.channels = 3;
    const std::size_t row_bytes = png_get_rowbytes(png, info);
    if (row_bytes != static_cast<std::size_t>(img.width) * 3) throw ImageIoError("unexpected PNG layout in " + path.string());
    img.pixels.resize(row_bytes * img.height);
    std::vector<png_bytep> rows(img.height);
    for (int y = 0; y < img.height; ++y) rows[y] = img.pixels.data() + row_bytes * y;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
  } catch (const ImageIoError& e) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageIoError(path.string() + ": " + e.what());
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

void write_png(const fs::path& path, const Image8& image) {
  if (image.channels != 1 && image.channels != 3) throw ImageIoError("write_png: need 1 or 3 channels");
  if (image.pixels.size() != static_cast<std::size_t>(image.height) * image.width * image.channels) {
    throw ImageIoError("write_png: pixel buffer does not match dimensions");
  }
  write_png_impl(path, image.height, image.width, image.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
                 image.pixels, image.width * image.channels, nullptr);
}

void write_indexed_png(const fs::path& path, int height, int width, const std::vector<std::uint8_t>& indices,
                       const std::vector<Rgb>& palette) {
  if (palette.empty() || palette.size() > 256) throw ImageIoError("write_indexed_png: palette needs 1..256 entries");
  write_png_impl(path, height, width, PNG_COLOR_TYPE_PALETTE, indices, width, &palette);
}

// ---------------------------------------------------------------------------
// Dataset description

fs::path DatasetSpec::image_path(const std::string& split, const std::string& stem) const {
  return root / split / "images" / (stem + ".png");
}

fs::path DatasetSpec::mask_path(const std::string& split, const std::string& stem) const {
  return root / split / "masks" / (stem + ".png");
}

const std::vector<std::string>& DatasetSpec::split(const std::string& name) const {
  if (name == "train") return train;
  if (name == "val") return val;
  if (name == "test") return test;
  throw std::invalid_argument("unknown split '" + name + "'");
}

void DatasetSpec::validate() const {
  if (num_classes < 2) throw std::invalid_argument("dataset needs at least 2 classes");
  if (static_cast<int>(palette.size()) != num_classes) {
    throw std::invalid_argument("palette has " + std::to_string(palette.size()) + " colours for " +
                                std::to_string(num_classes) + " classes");
  }
  std::set<Rgb> seen(palette.begin(), palette.end());
  seen.insert(ignore_color);
  if (seen.size() != palette.size() + 1) throw std::invalid_argument("palette is not injective");
  if (ignore_index >= 0 && ignore_index < num_classes) {
    throw std::invalid_argument("ignore_index collides with a class id");
  }
}

DatasetSpec default_dataset_spec(int num_classes) {
  if (num_classes < 2 || num_classes > 7) throw std::invalid_argument("classes must be in [2, 7]");
  DatasetSpec s;
  s.num_classes = num_classes;
  if (num_classes == 2) {
    s.palette = {Rgb{0, 0, 0}, Rgb{255, 255, 255}};
    s.class_names = {"background", "building"};
    s.ignore_color = {128, 128, 128};
    return s;
  }
  static const std::vector<std::pair<std::string, Rgb>> legend{
      {"agriculture", {255, 255, 0}}, {"rangeland", {255, 0, 255}}, {"urban", {0, 255, 255}},
      {"forest", {0, 255, 0}},        {"water", {0, 0, 255}},       {"barren", {255, 255, 255}},
      {"wetland", {255, 128, 0}}};
  for (int c = 0; c < num_classes; ++c) {
    s.class_names.push_back(legend[c].first);
    s.palette.push_back(legend[c].second);
  }
  s.ignore_color = {0, 0, 0};
  return s;
}

nlohmann::json to_json(const DatasetSpec& spec) {
  nlohmann::json j;
  j["num_classes"] = spec.num_classes;
  j["palette"] = spec.palette;
  j["class_names"] = spec.class_names;
  j["ignore_index"] = spec.ignore_index;
  j["ignore_color"] = spec.ignore_color;
  j["splits"] = {{"train", spec.train}, {"val", spec.val}, {"test", spec.test}};
  return j;
}

DatasetSpec dataset_spec_from_json(const nlohmann::json& j, const fs::path& root) {
  DatasetSpec s;
  s.root = root;
  try {
    s.num_classes = j.at("num_classes").get<int>();
    s.palette = j.at("palette").get<std::vector<Rgb>>();
    s.class_names = j.value("class_names", std::vector<std::string>{});
    s.ignore_index = j.value("ignore_index", 255);
    s.ignore_color = j.value("ignore_color", Rgb{0, 0, 0});
    const auto& splits = j.at("splits");
    s.train = splits.value("train", std::vector<std::string>{});
    s.val = splits.value("val", std::vector<std::string>{});
    s.test = splits.value("test", std::vector<std::string>{});
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed dataset manifest: ") + e.what());
  }
  s.validate();
  return s;
}

void write_manifest(const DatasetSpec& spec) {
  std::ofstream out(spec.root / "manifest.json");
  if (!out) throw ImageIoError("cannot write " + (spec.root / "manifest.json").string());
  out << to_json(spec).dump(2) << '\n';
}

DatasetSpec read_manifest(const fs::path& root) {
  std::ifstream in(root / "manifest.json");
  if (!in) throw ImageIoError("missing dataset manifest " + (root / "manifest.json").string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed dataset manifest: ") + e.what());
  }
  return dataset_spec_from_json(j, root);
}

// ---------------------------------------------------------------------------
// Mask codec

Image8 encode_mask(const SegmentationMap& mask, const DatasetSpec& spec) {
  Image8 img{mask.height, mask.width, 3, {}};
  img.pixels.resize(static_cast<std::size_t>(mask.height) * mask.width * 3);
  for (std::size_t i = 0; i < mask.labels.size(); ++i) {
    const int c = mask.labels[i];
    Rgb col;
    if (c == spec.ignore_index) col = spec.ignore_color;
    else if (c >= 0 && c < spec.num_classes) col = spec.palette[c];
    else throw std::out_of_range("encode_mask: label " + std::to_string(c) + " out of range");
    std::copy(col.begin(), col.end(), img.pixels.begin() + i * 3);
  }
  return img;
}

SegmentationMap decode_mask(const Image8& rgb, const DatasetSpec& spec, int* warnings) {
  if (rgb.channels != 3) throw ImageIoError("decode_mask: expected an RGB raster");
  std::map<Rgb, int> lookup;
  for (int c = 0; c < spec.num_classes; ++c) lookup[spec.palette[c]] = c;
  lookup[spec.ignore_color] = spec.ignore_index;
  SegmentationMap m;
  m.height = rgb.height;
  m.width = rgb.width;
  m.labels.resize(static_cast<std::size_t>(rgb.height) * rgb.width);
  int unknown = 0;
  for (std::size_t i = 0; i < m.labels.size(); ++i) {
    const Rgb col{rgb.pixels[i * 3], rgb.pixels[i * 3 + 1], rgb.pixels[i * 3 + 2]};
    auto it = lookup.find(col);
    if (it == lookup.end()) {
      m.labels[i] = spec.ignore_index;
      ++unknown;
    } else {
      m.labels[i] = it->second;
    }
  }
  if (warnings) *warnings += unknown;
  return m;
}

void write_mask(const fs::path& path, const SegmentationMap& mask, const DatasetSpec& spec) {
  std::vector<Rgb> palette = spec.palette;
  palette.push_back(spec.ignore_color);
  std::vector<std::uint8_t> idx(mask.labels.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const int c = mask.labels[i];
    if (c == spec.ignore_index) idx[i] = static_cast<std::uint8_t>(spec.num_classes);
    else if (c >= 0 && c < spec.num_classes) idx[i] = static_cast<std::uint8_t>(c);
    else throw std::out_of_range("write_mask: label " + std::to_string(c) + " out of range");
  }
  write_indexed_png(path, mask.height, mask.width, idx, palette);
}

Tensor<float> image_to_tensor(const Image8& image) {
  std::vector<float> v(image.pixels.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(image.pixels[i]) / 255.0f;
  return Tensor<float>::from({image.height, image.width, image.channels}, std::move(v));
}

Image8 tensor_to_image(const Tensor<float>& t) {
  if (t.rank() != 3) throw DimensionError("tensor_to_image: expected [H, W, C]");
  Image8 img{t.dim(0), t.dim(1), t.dim(2), {}};
  img.pixels.resize(t.numel());
  auto d = t.data();
  for (std::size_t i = 0; i < d.size(); ++i) {
    img.pixels[i] = static_cast<std::uint8_t>(std::lround(std::clamp(d[i], 0.0f, 1.0f) * 255.0f));
  }
  return img;
}

LoadedPair load_pair(const fs::path& image_path, const fs::path& mask_path, const DatasetSpec& spec) {
  Image8 img = read_png(image_path);
  Image8 msk = read_png(mask_path);
  if (img.height != msk.height || img.width != msk.width) {
    throw DimensionError("image " + image_path.string() + " is " + std::to_string(img.height) + "x" +
                         std::to_string(img.width) + " but its mask is " + std::to_string(msk.height) + "x" +
                         std::to_string(msk.width));
  }
  LoadedPair p;
  p.image = image_to_tensor(img);
  p.mask = decode_mask(msk, spec, &p.warnings);
  return p;
}

// ---------------------------------------------------------------------------
// Synthetic frequency-probe data

namespace {

constexpr double kTextureAmplitude = 0.18;

// Zero-mean +-1 patterns with period 2 or 4. Speckle draws a balanced sign
// permutation per 2x2 block so every block sums to zero.
double texture(int kind, int x, int y, std::uint64_t salt) {
  switch (kind % 5) {
    case 0: return (y % 2) ? 1.0 : -1.0;
    case 1: return (x % 2) ? 1.0 : -1.0;
    case 2: return ((x + y) % 2) ? 1.0 : -1.0;
    case 3: {
      const std::uint64_t bx = static_cast<std::uint64_t>((x + 1) / 2), by = static_cast<std::uint64_t>((y + 1) / 2);
      std::uint64_t h = salt ^ (bx * 0x9e3779b97f4a7c15ULL) ^ (by * 0xc2b2ae3d27d4eb4fULL);
      h ^= h >> 31;
      h *= 0xbf58476d1ce4e5b9ULL;
      h ^= h >> 29;
      static constexpr int kPerms[6][4] = {{1, 1, 0, 0}, {1, 0, 1, 0}, {1, 0, 0, 1},
                                           {0, 1, 1, 0}, {0, 1, 0, 1}, {0, 0, 1, 1}};
      const int slot = ((y + 1) % 2) * 2 + ((x + 1) % 2);
      return kPerms[h % 6][slot] ? 1.0 : -1.0;
    }
    default: return ((y / 2) % 2) ? 1.0 : -1.0;
  }
}

}  // namespace

SyntheticSample generate_synthetic_sample(std::uint64_t seed, int index, int size, int classes) {
  if (classes < 2 || classes > 7) throw std::invalid_argument("classes must be in [2, 7], got " + std::to_string(classes));
  if (size < 32) throw std::invalid_argument("size must be at least 32, got " + std::to_string(size));
  std::seed_seq sq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                   static_cast<std::uint32_t>(index), 0x46324eu};
  std::mt19937_64 rng(sq);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t npix = static_cast<std::size_t>(size) * size;

  // Smooth background: a few low-wavenumber plane waves.
  const int waves = 2 + static_cast<int>(rng() % 3);
  std::vector<double> field(npix, 0.0);
  for (int k = 0; k < waves; ++k) {
    const double amp = 0.5 + 0.5 * unit(rng);
    const double angle = 2.0 * std::numbers::pi * unit(rng);
    const double cycles = 0.5 + 1.5 * unit(rng);
    const double phase = 2.0 * std::numbers::pi * unit(rng);
    const double fx = std::cos(angle) * cycles / size, fy = std::sin(angle) * cycles / size;
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        field[static_cast<std::size_t>(y) * size + x] += amp * std::sin(2.0 * std::numbers::pi * (fx * x + fy * y) + phase);
      }
    }
  }
  double peak = 1e-12;
  for (double v : field) peak = std::max(peak, std::abs(v));
  for (double& v : field) v /= peak;
  std::vector<double> sorted = field;
  std::nth_element(sorted.begin(), sorted.begin() + npix / 2, sorted.end());
  const double median = sorted[npix / 2];

  std::vector<int> labels(npix, 0);
  if (classes > 2) {
    for (std::size_t i = 0; i < npix; ++i) labels[i] = field[i] > median ? 1 : 0;
  }
  const int first_texture = classes == 2 ? 1 : 2;
  const int n_textures = classes - first_texture;
  const double target = 0.8 / classes;

  // Thin watercourse-like structure, 3 px wide, edge to edge.
  {
    const bool vertical = rng() % 2;
    const double a = unit(rng) * size, b = unit(rng) * size;
    const double x0 = vertical ? a : 0, y0 = vertical ? 0 : a;
    const double x1 = vertical ? b : size - 1, y1 = vertical ? size - 1 : b;
    const double dx = x1 - x0, dy = y1 - y0, len2 = dx * dx + dy * dy;
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const double t = std::clamp(((x - x0) * dx + (y - y0) * dy) / len2, 0.0, 1.0);
        const double ex = x - (x0 + t * dx), ey = y - (y0 + t * dy);
        if (ex * ex + ey * ey <= 1.5 * 1.5) labels[static_cast<std::size_t>(y) * size + x] = classes - 1;
      }
    }
  }

  auto coverage = [&](int c) {
    return static_cast<double>(std::count(labels.begin(), labels.end(), c)) / static_cast<double>(npix);
  };
  std::uniform_int_distribution<int> pos(0, size - 1);
  std::uniform_int_distribution<int> radius(std::max(3, size / 16), std::max(4, size / 6));
  for (int attempt = 0; attempt < 400; ++attempt) {
    int cls = -1;
    double worst = 1.0;
    for (int c = first_texture; c < classes; ++c) {
      const double ratio = coverage(c) / target;
      if (ratio < 1.0 && ratio < worst) {
        worst = ratio;
        cls = c;
      }
    }
    if (cls < 0) break;
    const int cx = pos(rng), cy = pos(rng), rx = radius(rng), ry = radius(rng);
    const bool ellipse = rng() % 2;
    for (int y = std::max(0, cy - ry); y <= std::min(size - 1, cy + ry); ++y) {
      for (int x = std::max(0, cx - rx); x <= std::min(size - 1, cx + rx); ++x) {
        if (ellipse) {
          const double u = static_cast<double>(x - cx) / rx, v = static_cast<double>(y - cy) / ry;
          if (u * u + v * v > 1.0) continue;
        }
        labels[static_cast<std::size_t>(y) * size + x] = cls;
      }
    }
  }

  SyntheticSample s;
  s.image = Image8{size, size, 3, std::vector<std::uint8_t>(npix * 3)};
  static constexpr double kTint[3] = {1.0, 0.8, 0.6};
  const std::uint64_t salt = rng();
  double tex_sum = 0, base_sum = 0;
  long tex_count = 0;
  for (std::size_t i = 0; i < npix; ++i) {
    const int x = static_cast<int>(i % size), y = static_cast<int>(i / size);
    const int c = labels[i];
    // A lone texture class (binary masks) gets the checkerboard.
    const int kind = n_textures == 1 ? 2 : c - first_texture;
    const double t = c >= first_texture ? kTextureAmplitude * texture(kind, x, y, salt) : 0.0;
    for (int ch = 0; ch < 3; ++ch) {
      const double base = 0.5 + 0.15 * kTint[ch] * field[i];
      const double v = std::clamp(base + t, 0.0, 1.0);
      const auto q = static_cast<std::uint8_t>(std::lround(v * 255.0));
      s.image.pixels[i * 3 + ch] = q;
      if (c >= first_texture) {
        tex_sum += q / 255.0;
        base_sum += base;
        ++tex_count;
      }
    }
  }
  s.audit.max_mean_deviation = tex_count > 0 ? std::abs(tex_sum - base_sum) / base_sum : 0.0;
  s.audit.class_pixels.assign(classes, 0);
  for (int c : labels) ++s.audit.class_pixels[c];
  s.mask = SegmentationMap{size, size, std::move(labels), {}};
  return s;
}

DatasetSpec gen_synthetic(const fs::path& root, std::uint64_t seed, int count, int size, int classes,
                          SyntheticAudit* audit) {
  if (count < 1) throw std::invalid_argument("count must be positive");
  DatasetSpec spec = default_dataset_spec(classes);
  spec.root = root;
  const int n_train = std::max(1, count * 3 / 4);
  const int n_val = std::max(count > 1 ? 1 : 0, count / 8);
  for (const char* split : {"train", "val", "test"}) {
    fs::create_directories(root / split / "images");
    fs::create_directories(root / split / "masks");
  }
  SyntheticAudit total;
  total.class_pixels.assign(classes, 0);
  for (int i = 0; i < count; ++i) {
    std::ostringstream stem;
    stem << std::setw(4) << std::setfill('0') << i;
    const std::string split = i < n_train ? "train" : (i < n_train + n_val ? "val" : "test");
    auto& list = split == "train" ? spec.train : (split == "val" ? spec.val : spec.test);
    list.push_back(stem.str());
    SyntheticSample s = generate_synthetic_sample(seed, i, size, classes);
    write_png(spec.image_path(split, stem.str()), s.image);
    write_mask(spec.mask_path(split, stem.str()), s.mask, spec);
    total.max_mean_deviation = std::max(total.max_mean_deviation, s.audit.max_mean_deviation);
    for (int c = 0; c < classes; ++c) total.class_pixels[c] += s.audit.class_pixels[c];
  }
  write_manifest(spec);
  if (audit) *audit = total;
  return spec;
}

// ---------------------------------------------------------------------------
// Tiling

namespace {

// (start, length) spans at the given stride; the last span is cut at the
// image edge so every interior seam overlaps by exactly tile - stride.
std::vector<std::pair<int, int>> window_spans(int extent, int tile, int stride) {
  std::vector<std::pair<int, int>> spans;
  for (int s = 0;; s += stride) {
    spans.emplace_back(s, std::min(tile, extent - s));
    if (s + tile >= extent) break;
  }
  return spans;
}

}  // namespace

TilePlan tile_plan(int height, int width, int tile, int overlap) {
  if (height <= 0 || width <= 0) throw std::invalid_argument("tile_plan: empty image");
  if (overlap < 0 || tile <= 2 * overlap) {
    throw std::invalid_argument("tile_plan: need tile > 2 * overlap >= 0 (tile " + std::to_string(tile) +
                                ", overlap " + std::to_string(overlap) + ")");
  }
  TilePlan plan{height, width, overlap, {}};
  if (tile > std::min(height, width)) {
    plan.windows.push_back({0, 0, height, width});
    return plan;
  }
  const int stride = tile - overlap;
  for (const auto& [r, h] : window_spans(height, tile, stride)) {
    for (const auto& [c, w] : window_spans(width, tile, stride)) plan.windows.push_back({r, c, h, w});
  }
  return plan;
}

std::vector<std::uint8_t> seam_mask(const TilePlan& plan, int band) {
  std::vector<std::uint8_t> m(static_cast<std::size_t>(plan.height) * plan.width, 0);
  auto mark = [&](int y0, int y1, int x0, int x1) {
    for (int y = std::max(0, y0); y < std::min(plan.height, y1); ++y) {
      for (int x = std::max(0, x0); x < std::min(plan.width, x1); ++x) m[static_cast<std::size_t>(y) * plan.width + x] = 1;
    }
  };
  for (const TileWindow& w : plan.windows) {
    if (w.row > 0) mark(w.row - band, w.row + band, w.col, w.col + w.width);
    if (w.row + w.height < plan.height) mark(w.row + w.height - band, w.row + w.height + band, w.col, w.col + w.width);
    if (w.col > 0) mark(w.row, w.row + w.height, w.col - band, w.col + band);
    if (w.col + w.width < plan.width) mark(w.row, w.row + w.height, w.col + w.width - band, w.col + w.width + band);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Prefetching

PairPrefetcher::PairPrefetcher(DatasetSpec spec, std::vector<std::pair<fs::path, fs::path>> items,
                               std::size_t capacity)
    : spec_(std::move(spec)), items_(std::move(items)), capacity_(std::max<std::size_t>(1, capacity)) {
  worker_ = std::jthread([this](std::stop_token st) { run(st); });
}

PairPrefetcher::~PairPrefetcher() {
  worker_.request_stop();
  cv_.notify_all();
}

void PairPrefetcher::run(std::stop_token stop) {
  for (const auto& [img, msk] : items_) {
    LoadedPair p;
    try {
      p = load_pair(img, msk, spec_);
    } catch (...) {
      std::lock_guard lock(mu_);
      error_ = std::current_exception();
      done_ = true;
      cv_.notify_all();
      return;
    }
    std::unique_lock lock(mu_);
    if (!cv_.wait(lock, stop, [&] { return queue_.size() < capacity_; })) return;
    queue_.push_back(std::move(p));
    cv_.notify_all();
  }
  std::lock_guard lock(mu_);
  done_ = true;
  cv_.notify_all();
}

std::optional<LoadedPair> PairPrefetcher::next() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return !queue_.empty() || done_; });
  if (!queue_.empty()) {
    LoadedPair p = std::move(queue_.front());
    queue_.pop_front();
    cv_.notify_all();
    return p;
  }
  if (error_) std::rethrow_exception(std::exchange(error_, nullptr));
  return std::nullopt;
}

}  // namespace f2net
