// SPDX-License-Identifier: Apache-2.0
#include "nlosloc/dataio.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "nlosloc/rng.hpp"

namespace nlosloc {

void write_file_atomic(const std::filesystem::path& path,
                       std::string_view bytes) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw WriteFailure("cannot open " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw WriteFailure("short write to " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) throw WriteFailure("cannot rename " + tmp.string() + ": " +
                             ec.message());
}

namespace {

// In-memory PNG encode/decode so writes can go through write_file_atomic.

void png_append(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::string*>(png_get_io_ptr(png));
  out->append(reinterpret_cast<const char*>(data), length);
}

struct PngReadState {
  const std::string* bytes;
  std::size_t offset = 0;
};

void png_consume(png_structp png, png_bytep data, png_size_t length) {
  auto* state = static_cast<PngReadState*>(png_get_io_ptr(png));
  if (state->offset + length > state->bytes->size())
    png_error(png, "truncated PNG stream");
  std::copy_n(state->bytes->data() + state->offset, length,
              reinterpret_cast<char*>(data));
  state->offset += length;
}

std::string encode_png_gray8(const std::vector<std::uint8_t>& pixels, int w,
                             int h) {
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw WriteFailure("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw WriteFailure("png_create_info_struct failed");
  }
  std::string out;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw WriteFailure("libpng write error");
  }
  png_set_write_fn(png, &out, png_append, nullptr);
  png_set_IHDR(png, info, static_cast<png_uint_32>(w),
               static_cast<png_uint_32>(h), 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int r = 0; r < h; ++r)
    png_write_row(png, const_cast<png_bytep>(&pixels[static_cast<std::size_t>(
                           r) * w]));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

std::vector<std::uint8_t> decode_png_gray8(const std::filesystem::path& path,
                                           int& w, int& h) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileNotFound("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw UnreadableImage("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw UnreadableImage("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw UnreadableImage("not a valid PNG: " + path.string());
  }
  PngReadState state{&bytes};
  png_set_read_fn(png, &state, png_consume);
  png_read_info(png, info);

  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color != PNG_COLOR_TYPE_GRAY) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw UnreadableImage("expected 8-bit grayscale PNG: " + path.string());
  }
  if (depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (depth == 16) png_set_strip_16(png);
  png_read_update_info(png, info);

  w = static_cast<int>(png_get_image_width(png, info));
  h = static_cast<int>(png_get_image_height(png, info));
  std::vector<std::uint8_t> pixels(static_cast<std::size_t>(w) * h);
  for (int r = 0; r < h; ++r)
    png_read_row(png, &pixels[static_cast<std::size_t>(r) * w], nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return pixels;
}

} // namespace

EnvironmentGrid load_building_map(const std::filesystem::path& path,
                                  bool any_size, double cell_size,
                                  double building_height,
                                  double antenna_height) {
  int w = 0, h = 0;
  const auto pixels = decode_png_gray8(path, w, h);
  if (w != h) throw BadDimensions("building map must be square");
  if (!any_size && (w != 256 || h != 256))
    throw BadDimensions("building map must be 256x256 (pass any_size to "
                        "relax)");
  MaskGrid occ(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      occ(r, c) = pixels[static_cast<std::size_t>(r) * w + c] >= 128 ? 1 : 0;
  return make_environment(occ, cell_size, building_height, antenna_height);
}

void save_building_map(const EnvironmentGrid& env,
                       const std::filesystem::path& path) {
  const int n = env.size();
  std::vector<std::uint8_t> pixels(static_cast<std::size_t>(n) * n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c)
      pixels[static_cast<std::size_t>(r) * n + c] =
          env.occupancy(r, c) ? 255 : 0;
  write_file_atomic(path, encode_png_gray8(pixels, n, n));
}

RadioMap load_gain_map(const std::filesystem::path& path, bool any_size) {
  int w = 0, h = 0;
  const auto pixels = decode_png_gray8(path, w, h);
  if (w != h) throw BadDimensions("gain map must be square");
  if (!any_size && (w != 256 || h != 256))
    throw BadDimensions("gain map must be 256x256 (pass any_size to relax)");
  RadioMap rm;
  rm.normalized = true;
  rm.values = FieldGrid(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      rm.values(r, c) =
          pixels[static_cast<std::size_t>(r) * w + c] / 255.0;
  return rm;
}

void save_gain_map(const RadioMap& rm, const std::filesystem::path& path) {
  if (!rm.normalized)
    throw NotNormalized("save_gain_map expects a normalized map");
  const int rows = static_cast<int>(rm.values.rows());
  const int cols = static_cast<int>(rm.values.cols());
  std::vector<std::uint8_t> pixels(static_cast<std::size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const double v = std::clamp(rm.values(r, c), 0.0, 1.0);
      pixels[static_cast<std::size_t>(r) * cols + c] =
          static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
  write_file_atomic(path, encode_png_gray8(pixels, cols, rows));
}

RadioMap denormalize_gain(const RadioMap& rm, double db_min, double db_max) {
  if (!rm.normalized)
    throw NotNormalized("denormalize_gain expects a normalized map");
  if (!(db_max > db_min))
    throw InvalidEnvironment("db_max must exceed db_min");
  RadioMap out = rm;
  out.values = db_min + rm.values * (db_max - db_min);
  out.normalized = false;
  return out;
}

SceneRecord generate_synthetic_scene(int n, int buildings_min,
                                     int buildings_max,
                                     const PropagationParams& params,
                                     std::uint64_t seed) {
  if (n < 8) throw BadShape("scene grid must be at least 8x8");
  if (buildings_min < 0 || buildings_max < buildings_min)
    throw InvalidEnvironment("bad building count range");

  Rng rng(derive_seed(seed, stream_tag("synthetic_scene")));
  const int count =
      buildings_min +
      static_cast<int>(rng.uniform_index(
          static_cast<std::uint64_t>(buildings_max - buildings_min + 1)));
  const int max_side = std::max(2, n / 8);

  MaskGrid occ = MaskGrid::Zero(n, n);
  for (int b = 0; b < count; ++b) {
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      const int hgt = 2 + static_cast<int>(rng.uniform_index(max_side - 1));
      const int wid = 2 + static_cast<int>(rng.uniform_index(max_side - 1));
      const int r0 = static_cast<int>(rng.uniform_index(n - hgt + 1));
      const int c0 = static_cast<int>(rng.uniform_index(n - wid + 1));
      bool overlap = false;
      for (int r = r0; r < r0 + hgt && !overlap; ++r)
        for (int c = c0; c < c0 + wid && !overlap; ++c)
          if (occ(r, c)) overlap = true;
      if (overlap) continue;
      for (int r = r0; r < r0 + hgt; ++r)
        for (int c = c0; c < c0 + wid; ++c) occ(r, c) = 1;
      placed = true;
    }
    if (!placed)
      throw PlacementFailure("could not place building after 1000 attempts");
  }

  SceneRecord rec;
  rec.env = make_environment(occ, 1.0, 25.0, 1.5);
  rec.source = "synthetic";
  const auto tx_pool = rec.env.free_restricted_cells();
  if (tx_pool.empty())
    throw PlacementFailure("no free restricted cell for the emitter");
  rec.tx = tx_pool[rng.uniform_index(tx_pool.size())];
  rec.ground_truth = synthesize_radio_map(rec.env, rec.tx, params);
  rec.has_truth = true;
  return rec;
}

std::vector<std::string> split_manifest(std::size_t record_count,
                                        std::size_t train_count,
                                        std::size_t test_count,
                                        std::uint64_t seed) {
  if (train_count + test_count > record_count)
    throw InvalidEnvironment("train + test exceeds the record count");
  std::vector<std::size_t> order(record_count);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, stream_tag("split_manifest")));
  for (std::size_t i = 0; i + 1 < record_count; ++i) {
    const auto j = i + rng.uniform_index(record_count - i);
    std::swap(order[i], order[j]);
  }
  std::vector<std::string> split(record_count, "unused");
  for (std::size_t i = 0; i < train_count; ++i) split[order[i]] = "train";
  for (std::size_t i = 0; i < test_count; ++i)
    split[order[train_count + i]] = "test";
  return split;
}

void save_scene(const std::filesystem::path& scenes_dir,
                const SceneRecord& rec) {
  const auto dir = scenes_dir / rec.id;
  save_building_map(rec.env, dir / "building.png");
  if (rec.has_truth) {
    const RadioMap norm = rec.ground_truth.normalized
                              ? rec.ground_truth
                              : normalize_radio_map(rec.ground_truth);
    save_gain_map(norm, dir / "gain_tx0.png");
  }
}

SceneRecord load_scene(const std::filesystem::path& scenes_dir,
                       const std::string& id, const GridPoint& tx,
                       bool any_size) {
  SceneRecord rec;
  rec.id = id;
  rec.env = load_building_map(scenes_dir / id / "building.png", any_size);
  rec.tx = tx;
  const auto gain = scenes_dir / id / "gain_tx0.png";
  if (std::filesystem::exists(gain)) {
    rec.ground_truth = load_gain_map(gain, any_size);
    rec.ground_truth.tx = tx;
    rec.has_truth = true;
  }
  return rec;
}

void save_manifest(const std::filesystem::path& path,
                   const std::vector<ManifestRow>& rows) {
  std::ostringstream out;
  out << "scene_id,tx_row,tx_col,split\r\n";
  for (const auto& row : rows)
    out << row.scene_id << "," << row.tx.row << "," << row.tx.col << ","
        << row.split << "\r\n";
  write_file_atomic(path, out.str());
}

std::vector<ManifestRow> load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileNotFound("cannot open manifest: " + path.string());
  std::vector<ManifestRow> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    std::stringstream ss(line);
    std::string id, r, c, split;
    if (!std::getline(ss, id, ',') || !std::getline(ss, r, ',') ||
        !std::getline(ss, c, ',') || !std::getline(ss, split, ','))
      throw UnreadableImage("malformed manifest line: " + line);
    rows.push_back({id, {std::stoi(r), std::stoi(c)}, split});
  }
  return rows;
}

} // namespace nlosloc
