/* Copyright 2026 The MCM Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include "mcm/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "mcm/error.hpp"
#include "mcm/rng.hpp"

namespace fs = std::filesystem;

namespace mcm {

namespace {

bool IsSpace(std::uint8_t c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

class PnmHeaderReader {
 public:
  explicit PnmHeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void SkipSpaceAndComments() {
    while (pos_ < bytes_.size()) {
      if (IsSpace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t Number(const char* what) {
    SkipSpaceAndComments();
    const std::size_t start = pos_;
    std::size_t value = 0;
    while (pos_ < bytes_.size() && bytes_[pos_] >= '0' && bytes_[pos_] <= '9') {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > (1u << 30)) throw ParseError(std::string("pnm: ") + what + " too large", start);
      ++pos_;
    }
    if (pos_ == start) throw ParseError(std::string("pnm: expected ") + what, start);
    return value;
  }

  std::size_t pos_ = 0;
  std::span<const std::uint8_t> bytes_;
};

}  // namespace

PnmImage ParsePnm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
    throw ParseError("pnm: expected magic P5 or P6", 0);
  PnmImage img;
  img.channels = bytes[1] == '6' ? 3 : 1;
  PnmHeaderReader r(bytes);
  r.pos_ = 2;
  if (r.pos_ >= bytes.size() || (!IsSpace(bytes[r.pos_]) && bytes[r.pos_] != '#'))
    throw ParseError("pnm: expected whitespace after magic", r.pos_);
  img.width = r.Number("width");
  img.height = r.Number("height");
  r.SkipSpaceAndComments();
  const std::size_t maxval_at = r.pos_;
  const std::size_t maxval = r.Number("maxval");
  if (img.width == 0 || img.height == 0) throw ParseError("pnm: zero image dimension", maxval_at);
  if (maxval == 0 || maxval > 65535) throw ParseError("pnm: maxval must be in 1..65535", maxval_at);
  img.maxval = static_cast<std::uint32_t>(maxval);
  if (r.pos_ >= bytes.size() || !IsSpace(bytes[r.pos_]))
    throw ParseError("pnm: expected single whitespace before raster", r.pos_);
  ++r.pos_;
  const std::size_t bps = img.maxval > 255 ? 2 : 1;
  const std::size_t count = img.width * img.height * img.channels;
  if (bytes.size() - r.pos_ < count * bps) {
    throw ParseError("pnm: raster truncated, need " + std::to_string(count * bps) + " bytes",
                     r.pos_);
  }
  img.samples.resize(count);
  const std::uint8_t* p = bytes.data() + r.pos_;
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint16_t v =
        bps == 2 ? static_cast<std::uint16_t>((p[2 * i] << 8) | p[2 * i + 1]) : p[i];
    if (v > img.maxval) throw ParseError("pnm: sample exceeds maxval", r.pos_ + i * bps);
    img.samples[i] = v;
  }
  return img;
}

std::vector<std::uint8_t> EncodePnm(const PnmImage& image) {
  Require(image.channels == 1 || image.channels == 3, ErrorKind::kContract,
          "pnm: only 1 or 3 channels can be written");
  Require(image.maxval >= 1 && image.maxval <= 65535, ErrorKind::kContract,
          "pnm: maxval must be in 1..65535");
  Require(image.samples.size() == image.width * image.height * image.channels,
          ErrorKind::kDimension, "pnm: sample count does not match dimensions");
  const std::string header = std::string(image.channels == 3 ? "P6" : "P5") + "\n" +
                             std::to_string(image.width) + " " + std::to_string(image.height) +
                             "\n" + std::to_string(image.maxval) + "\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  const bool wide = image.maxval > 255;
  out.reserve(out.size() + image.samples.size() * (wide ? 2 : 1));
  for (std::uint16_t v : image.samples) {
    if (wide) out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  }
  return out;
}

std::vector<std::uint8_t> ReadFileBytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kIo, "cannot open '" + path + "' for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

void WriteFileBytes(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Fail(ErrorKind::kIo, "cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) Fail(ErrorKind::kIo, "write to '" + path + "' failed");
}

void WriteTextFile(const std::string& path, const std::string& text) {
  WriteFileBytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

PnmImage ReadPnm(const std::string& path) {
  const auto bytes = ReadFileBytes(path);
  try {
    return ParsePnm(bytes);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.detail(), e.offset());
  }
}

void WritePnm(const std::string& path, const PnmImage& image) {
  WriteFileBytes(path, EncodePnm(image));
}

Tensor PnmToTensor(const PnmImage& image) {
  std::vector<double> data(image.samples.size());
  const double inv = 1.0 / static_cast<double>(image.maxval);
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = image.samples[i] * inv;
  return Tensor::FromData({image.height, image.width, image.channels}, std::move(data));
}

PnmImage TensorToPnm(const Tensor& image, std::uint32_t maxval) {
  Require(image.rank() == 3 && (image.dim(2) == 1 || image.dim(2) == 3), ErrorKind::kDimension,
          "pnm: expected [H x W x 1|3] image, got " + ShapeToString(image.shape()));
  PnmImage out;
  out.height = image.dim(0);
  out.width = image.dim(1);
  out.channels = image.dim(2);
  out.maxval = maxval;
  out.samples.resize(image.numel());
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    const double v = std::clamp(image[i], 0.0, 1.0);
    out.samples[i] = static_cast<std::uint16_t>(std::lround(v * maxval));
  }
  return out;
}

ImagePair LoadPair(const std::string& rgb_path, const std::string& depth_path) {
  PnmImage rgb = ReadPnm(rgb_path);
  if (rgb.channels != 3) throw ParseError(rgb_path + ": rgb image must be P6", 0);
  PnmImage depth = ReadPnm(depth_path);
  if (depth.channels != 1) throw ParseError(depth_path + ": depth image must be P5", 0);
  if (rgb.width != depth.width || rgb.height != depth.height) {
    Fail(ErrorKind::kData, "image pair size mismatch: " + rgb_path + " is " +
                               std::to_string(rgb.width) + "x" + std::to_string(rgb.height) +
                               ", " + depth_path + " is " + std::to_string(depth.width) + "x" +
                               std::to_string(depth.height));
  }
  return ImagePair{PnmToTensor(rgb), PnmToTensor(depth)};
}

void SavePair(const ImagePair& pair, const std::string& rgb_path, const std::string& depth_path,
              std::uint32_t depth_maxval) {
  WritePnm(rgb_path, TensorToPnm(pair.rgb, 255));
  WritePnm(depth_path, TensorToPnm(pair.depth, depth_maxval));
}

// ---- labels and manifest -------------------------------------------------------

namespace {

std::vector<std::string> SplitOn(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::vector<std::string> Lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::string ReadText(const std::string& path) {
  const auto bytes = ReadFileBytes(path);
  return std::string(bytes.begin(), bytes.end());
}

}  // namespace

LabelTable ParseLabelsCsv(const std::string& text) {
  const auto lines = Lines(text);
  Require(!lines.empty(), ErrorKind::kData, "labels.csv: missing header row");
  const auto header = SplitOn(lines[0], ',');
  Require(header.size() >= 2 && header[0] == "id", ErrorKind::kData,
          "labels.csv: header must be 'id,<AU>...'");
  LabelTable t;
  t.names.assign(header.begin() + 1, header.end());
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto cells = SplitOn(lines[i], ',');
    Require(cells.size() == header.size(), ErrorKind::kData,
            "labels.csv line " + std::to_string(i + 1) + ": expected " +
                std::to_string(header.size()) + " cells");
    t.ids.push_back(cells[0]);
    for (std::size_t k = 1; k < cells.size(); ++k) {
      Require(cells[k] == "0" || cells[k] == "1", ErrorKind::kData,
              "labels.csv line " + std::to_string(i + 1) + ": values must be 0 or 1");
      t.values.push_back(cells[k] == "1");
    }
  }
  return t;
}

std::string FormatLabelsCsv(const LabelTable& table) {
  std::string out = "id";
  for (const auto& n : table.names) out += "," + n;
  out += "\n";
  const std::size_t k = table.names.size();
  for (std::size_t i = 0; i < table.ids.size(); ++i) {
    out += table.ids[i];
    for (std::size_t j = 0; j < k; ++j) out += table.values[i * k + j] ? ",1" : ",0";
    out += "\n";
  }
  return out;
}

std::string DatasetManifest::Resolve(const std::string& relative) const {
  return (fs::path(root) / relative).string();
}

DatasetManifest LoadManifest(const std::string& path) {
  std::string text;
  try {
    text = ReadText(path);
  } catch (const Error&) {
    Fail(ErrorKind::kConfig, "manifest '" + path + "' cannot be opened");
  }
  DatasetManifest m;
  m.root = fs::path(path).parent_path().string();
  if (m.root.empty()) m.root = ".";
  const auto lines = Lines(text);
  Require(!lines.empty() && lines[0] == "mcm-manifest 1", ErrorKind::kData,
          path + ": first line must be 'mcm-manifest 1'");
  std::set<std::string> ids;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    if (line.empty() || line[0] == '#') continue;
    const auto f = SplitOn(line, ' ');
    const std::string where = path + " line " + std::to_string(i + 1);
    if (f[0] == "split" && f.size() == 2) {
      Require(f[1] == "train" || f[1] == "val", ErrorKind::kData, where + ": bad split tag");
      m.split = f[1];
    } else if (f[0] == "labels" && f.size() == 2) {
      m.labels = f[1];
    } else if (f[0] == "record" && f.size() == 5) {
      ManifestRecord r{f[1], f[2], f[3], std::nullopt};
      if (f[4] != "-") {
        std::size_t row = 0;
        try {
          row = std::stoul(f[4]);
        } catch (...) {
          Fail(ErrorKind::kData, where + ": bad label row '" + f[4] + "'");
        }
        r.label_row = row;
      }
      Require(ids.insert(r.id).second, ErrorKind::kData, where + ": duplicate id '" + r.id + "'");
      m.records.push_back(std::move(r));
    } else {
      Fail(ErrorKind::kData, where + ": unrecognized line '" + line + "'");
    }
  }
  for (const auto& r : m.records) {
    for (const auto* p : {&r.rgb, &r.depth}) {
      Require(fs::exists(m.Resolve(*p)), ErrorKind::kData,
              path + ": record '" + r.id + "' references missing file '" + *p + "'");
    }
  }
  if (!m.labels.empty()) {
    Require(fs::exists(m.Resolve(m.labels)), ErrorKind::kData,
            path + ": labels file '" + m.labels + "' does not exist");
  }
  std::sort(m.records.begin(), m.records.end(),
            [](const ManifestRecord& a, const ManifestRecord& b) { return a.id < b.id; });
  return m;
}

std::string FormatManifest(const DatasetManifest& manifest) {
  std::string out = "mcm-manifest 1\nsplit " + manifest.split + "\n";
  if (!manifest.labels.empty()) out += "labels " + manifest.labels + "\n";
  for (const auto& r : manifest.records) {
    out += "record " + r.id + " " + r.rgb + " " + r.depth + " " +
           (r.label_row ? std::to_string(*r.label_row) : std::string("-")) + "\n";
  }
  return out;
}

Dataset LoadDataset(const DatasetManifest& manifest, bool require_labels) {
  Dataset ds;
  for (const auto& r : manifest.records)
    ds.samples.push_back(Sample{r.id, LoadPair(manifest.Resolve(r.rgb), manifest.Resolve(r.depth))});
  if (!require_labels) return ds;
  Require(!manifest.labels.empty(), ErrorKind::kConfig, "dataset has no labels file");
  const LabelTable table = ParseLabelsCsv(ReadText(manifest.Resolve(manifest.labels)));
  const std::size_t k = table.names.size();
  std::vector<std::uint8_t> values;
  for (const auto& r : manifest.records) {
    Require(r.label_row.has_value(), ErrorKind::kData, "record '" + r.id + "' has no label row");
    const std::size_t row = *r.label_row;
    Require(row < table.ids.size() && table.ids[row] == r.id, ErrorKind::kData,
            "record '" + r.id + "': label row " + std::to_string(row) + " does not match its id");
    values.insert(values.end(), table.values.begin() + row * k, table.values.begin() + (row + 1) * k);
  }
  if (!manifest.records.empty())
    ds.labels = AuLabelMatrix(manifest.records.size(), k, std::move(values), table.names);
  return ds;
}

// ---- synthetic data ---------------------------------------------------------------

DatasetManifest SynthDataset(std::size_t n, std::size_t height, std::size_t width,
                             std::size_t num_aus, std::uint64_t seed, const std::string& out_dir) {
  Require(n >= 1, ErrorKind::kConfig, "synth: n must be at least 1");
  Require(height >= 1 && width >= 1, ErrorKind::kConfig, "synth: image size must be positive");
  Require(num_aus >= 1, ErrorKind::kConfig, "synth: num_aus must be at least 1");
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "rgb", ec);
  fs::create_directories(fs::path(out_dir) / "depth", ec);
  if (ec) Fail(ErrorKind::kIo, "synth: cannot create '" + out_dir + "': " + ec.message());

  const std::size_t k = num_aus;
  std::vector<std::uint8_t> labels(n * k);
  Rng label_rng(DeriveSeed(seed, StreamKind::kSynth, 0, 0));
  for (auto& v : labels) v = static_cast<std::uint8_t>(label_rng.UniformInt(2));
  // Every column gets both classes whenever n allows it.
  if (n >= 2) {
    for (std::size_t j = 0; j < k; ++j) {
      std::size_t pos = 0;
      for (std::size_t i = 0; i < n; ++i) pos += labels[i * k + j];
      if (pos == 0 || pos == n) labels[(j % n) * k + j] ^= 1;
    }
  }

  std::size_t grid = 1;
  while (grid * grid < k) ++grid;
  const double cell_h = static_cast<double>(height) / static_cast<double>(grid);
  const double cell_w = static_cast<double>(width) / static_cast<double>(grid);
  const std::size_t digits = std::max<std::size_t>(4, std::to_string(n - 1).size());

  DatasetManifest manifest;
  manifest.root = out_dir;
  manifest.labels = "labels.csv";
  LabelTable table;
  for (std::size_t j = 0; j < k; ++j) table.names.push_back("AU" + std::to_string(j + 1));

  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(DeriveSeed(seed, StreamKind::kSynth, 1, i));
    struct Blob {
      double cy, cx, sigma, height;
      double color[3];
    };
    std::vector<Blob> blobs;
    const double background = 0.05 + 0.1 * rng.Uniform();
    for (std::size_t j = 0; j < k; ++j) {
      if (!labels[i * k + j]) continue;
      const double r = static_cast<double>(j / grid), c = static_cast<double>(j % grid);
      Blob b;
      b.cy = (r + 0.3 + 0.4 * rng.Uniform()) * cell_h;
      b.cx = (c + 0.3 + 0.4 * rng.Uniform()) * cell_w;
      b.sigma = (0.35 + 0.15 * rng.Uniform()) * std::min(cell_h, cell_w);
      b.height = 0.6 + 0.4 * rng.Uniform();
      for (double& col : b.color) col = 0.5 + 0.5 * rng.Uniform();
      blobs.push_back(b);
    }
    std::vector<double> rgb(height * width * 3), depth(height * width);
    for (std::size_t y = 0; y < height; ++y)
      for (std::size_t x = 0; x < width; ++x) {
        double d = 0.0, col[3] = {background, background, background};
        for (const auto& b : blobs) {
          const double dy = static_cast<double>(y) + 0.5 - b.cy;
          const double dx = static_cast<double>(x) + 0.5 - b.cx;
          const double g = std::exp(-(dy * dy + dx * dx) / (2.0 * b.sigma * b.sigma));
          d += b.height * g;
          for (int ch = 0; ch < 3; ++ch) col[ch] += (1.0 - background) * b.color[ch] * g;
        }
        const std::size_t p = y * width + x;
        depth[p] = std::clamp(d, 0.0, 1.0);
        for (int ch = 0; ch < 3; ++ch)
          rgb[p * 3 + ch] = std::clamp(col[ch] + 0.02 * (rng.Uniform() - 0.5), 0.0, 1.0);
      }
    std::string id = std::to_string(i);
    id = "s" + std::string(digits - id.size(), '0') + id;
    const std::string rgb_rel = "rgb/" + id + ".ppm";
    const std::string depth_rel = "depth/" + id + ".pgm";
    SavePair(ImagePair{Tensor::FromData({height, width, 3}, std::move(rgb)),
                       Tensor::FromData({height, width, 1}, std::move(depth))},
             manifest.Resolve(rgb_rel), manifest.Resolve(depth_rel));
    manifest.records.push_back(ManifestRecord{id, rgb_rel, depth_rel, i});
    table.ids.push_back(id);
    table.values.insert(table.values.end(), labels.begin() + i * k, labels.begin() + (i + 1) * k);
  }
  WriteTextFile(manifest.Resolve("labels.csv"), FormatLabelsCsv(table));
  WriteTextFile(manifest.Resolve("manifest.txt"), FormatManifest(manifest));
  return manifest;
}

std::vector<std::vector<std::size_t>> MakeBatches(std::size_t n, std::size_t batch_size,
                                                  std::uint64_t seed, std::size_t epoch) {
  Require(batch_size >= 1, ErrorKind::kContract, "batch size must be at least 1");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(DeriveSeed(seed, StreamKind::kShuffle, epoch));
  for (std::size_t i = 0; i + 1 < n; ++i) std::swap(order[i], order[i + rng.UniformInt(n - i)]);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < n; i += batch_size)
    batches.emplace_back(order.begin() + i, order.begin() + std::min(n, i + batch_size));
  return batches;
}

std::vector<std::string> DumpReconstruction(const Tensor& mixed_patches, const Tensor& pred_rgb,
                                            const Tensor& pred_depth, const MaskPlan& mask,
                                            std::size_t height, std::size_t width,
                                            std::size_t patch, const std::string& out_prefix) {
  Require(mixed_patches.rank() == 2 && mixed_patches.dim(0) == mask.num_patches(),
          ErrorKind::kDimension, "dump_reconstruction: patch count does not match mask plan");
  std::vector<double> vis(mixed_patches.data().begin(), mixed_patches.data().end());
  const std::size_t w = mixed_patches.dim(1);
  for (std::size_t idx : mask.masked) std::fill_n(vis.begin() + idx * w, w, 0.5);
  const Tensor masked_img =
      Unpatchify(Tensor::FromData(mixed_patches.shape(), std::move(vis)), height, width, patch, 3);
  const Tensor rgb_img = Unpatchify(pred_rgb, height, width, patch, 3);
  const Tensor depth_img = Unpatchify(pred_depth, height, width, patch, 1);
  std::vector<std::string> paths = {out_prefix + "_masked.ppm", out_prefix + "_rgb.ppm",
                                    out_prefix + "_depth.pgm"};
  WritePnm(paths[0], TensorToPnm(masked_img));
  WritePnm(paths[1], TensorToPnm(rgb_img));
  WritePnm(paths[2], TensorToPnm(depth_img));
  return paths;
}

}  // namespace mcm
