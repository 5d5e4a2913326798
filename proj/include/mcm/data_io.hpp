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
#ifndef MCM_DATA_IO_HPP_
#define MCM_DATA_IO_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mcm/fusion.hpp"
#include "mcm/objectives.hpp"
#include "mcm/tensor.hpp"

namespace mcm {

// Binary Netpbm image: P6 (3 channels) or P5 (1 channel). Samples are stored
// row-major, channel-fastest; maxval above 255 means 16-bit big-endian
// samples on disk.
struct PnmImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;
  std::uint32_t maxval = 255;
  std::vector<std::uint16_t> samples;
};

// Header: magic, whitespace, width, height, maxval (comments allowed between
// tokens), then exactly one whitespace byte before the raster. Malformed
// input raises ParseError with the byte offset.
PnmImage ParsePnm(std::span<const std::uint8_t> bytes);
// Writes "P6\n<w> <h>\n<maxval>\n" (or P5) followed by the raster.
std::vector<std::uint8_t> EncodePnm(const PnmImage& image);
PnmImage ReadPnm(const std::string& path);
void WritePnm(const std::string& path, const PnmImage& image);

// sample / maxval, as [H x W x C].
Tensor PnmToTensor(const PnmImage& image);
// round(clamp(v, 0, 1) * maxval).
PnmImage TensorToPnm(const Tensor& image, std::uint32_t maxval = 255);

// rgb must be P6 and depth P5, both with the same size.
ImagePair LoadPair(const std::string& rgb_path, const std::string& depth_path);
void SavePair(const ImagePair& pair, const std::string& rgb_path, const std::string& depth_path,
              std::uint32_t depth_maxval = 255);

std::vector<std::uint8_t> ReadFileBytes(const std::string& path);
void WriteFileBytes(const std::string& path, std::span<const std::uint8_t> bytes);
void WriteTextFile(const std::string& path, const std::string& text);

// labels.csv: header "id,<AU name>..." then one "<id>,<0|1>..." row per image.
struct LabelTable {
  std::vector<std::string> names;
  std::vector<std::string> ids;
  std::vector<std::uint8_t> values;  // ids.size() x names.size()
};

LabelTable ParseLabelsCsv(const std::string& text);
std::string FormatLabelsCsv(const LabelTable& table);

// Line-oriented manifest, fields separated by single spaces:
//   mcm-manifest 1
//   split <train|val>
//   labels <relative path>                (optional)
//   record <id> <rgb path> <depth path> <label row | ->
// Paths are relative to the manifest's directory. Records are kept sorted
// by id.
struct ManifestRecord {
  std::string id;
  std::string rgb;
  std::string depth;
  std::optional<std::size_t> label_row;
};

struct DatasetManifest {
  std::string root;
  std::string split = "train";
  std::string labels;
  std::vector<ManifestRecord> records;

  std::string Resolve(const std::string& relative) const;
};

// Checks that every referenced file exists and ids are unique.
DatasetManifest LoadManifest(const std::string& path);
std::string FormatManifest(const DatasetManifest& manifest);

struct Sample {
  std::string id;
  ImagePair pair;
};

struct Dataset {
  std::vector<Sample> samples;
  std::optional<AuLabelMatrix> labels;  // rows aligned with samples
};

Dataset LoadDataset(const DatasetManifest& manifest, bool require_labels);

// Writes rgb/<id>.ppm, depth/<id>.pgm, labels.csv and manifest.txt under
// out_dir. Scenes are smooth Gaussian blobs on a dark background. Label k
// says whether a blob sits in zone k of a ceil(sqrt(K))-square grid; depth is
// the clamped sum of blob heights, so it tracks rgb brightness.
DatasetManifest SynthDataset(std::size_t n, std::size_t height, std::size_t width,
                             std::size_t num_aus, std::uint64_t seed, const std::string& out_dir);

// Fisher-Yates over 0..n-1 with Rng(DeriveSeed(seed, kShuffle, epoch)), then
// consecutive chunks of batch_size; the last chunk may be short.
std::vector<std::vector<std::size_t>> MakeBatches(std::size_t n, std::size_t batch_size,
                                                  std::uint64_t seed, std::size_t epoch);

// Three files per call: <prefix>_masked.ppm (mixed input with masked patches
// at mid-gray 0.5), <prefix>_rgb.ppm and <prefix>_depth.pgm. Values are
// clamped to [0, 1] and written as 8-bit. Returns the paths in that order.
std::vector<std::string> DumpReconstruction(const Tensor& mixed_patches, const Tensor& pred_rgb,
                                            const Tensor& pred_depth, const MaskPlan& mask,
                                            std::size_t height, std::size_t width,
                                            std::size_t patch, const std::string& out_prefix);

}  // namespace mcm

#endif  // MCM_DATA_IO_HPP_
