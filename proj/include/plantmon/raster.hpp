// Copyright 2026 The plantmon Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Multispectral cubes, foliar masks and the on-disk container format.
//
// A container is a directory holding `header.json` and `data.bin`:
//
//   header.json  {"width": W, "height": H, "channels": [...], "dtype": "f32le"}
//   data.bin     little-endian binary32, plane-major in header channel order,
//                row-major within each plane; exactly W*H*C*4 bytes.
//
// A mask uses the same container with a single channel named "mask" whose
// values are exactly 0.0 or 1.0.

#ifndef PLANTMON_RASTER_HPP_
#define PLANTMON_RASTER_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "plantmon/common.hpp"

namespace plantmon::raster {

// Channel names of the imager, in plane order. The tenth plane carries no
// agreed spectral meaning and defaults to kExtraChannelName.
inline constexpr std::array<std::string_view, 9> kNamedChannels = {
    "blue", "cyan",     "green",  "amber", "red",
    "deep_red", "far_red", "nir850", "nir940"};
inline constexpr std::string_view kExtraChannelName = "ch10";
inline constexpr std::string_view kMaskChannelName = "mask";

struct ChannelSpec {
  std::string name;
  std::size_t index = 0;

  bool operator==(const ChannelSpec&) const = default;
};

// Builds a channel list (indices 0..n-1) from names; names must be unique.
std::vector<ChannelSpec> make_channels(const std::vector<std::string>& names);

// The nine named channels followed by `extra_name`.
std::vector<ChannelSpec> default_channels(
    std::string_view extra_name = kExtraChannelName);

class MsiCube {
 public:
  // Planes must each hold width*height finite, non-negative values.
  MsiCube(std::size_t width, std::size_t height,
          std::vector<ChannelSpec> channels,
          std::vector<std::vector<float>> planes);

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t pixel_count() const { return width_ * height_; }
  std::size_t channel_count() const { return channels_.size(); }
  const std::vector<ChannelSpec>& channels() const { return channels_; }

  std::span<const float> plane(std::size_t channel) const {
    return planes_.at(channel);
  }
  float at(std::size_t channel, std::size_t x, std::size_t y) const {
    return planes_[channel][y * width_ + x];
  }
  std::optional<std::size_t> find_channel(std::string_view name) const;

 private:
  std::size_t width_;
  std::size_t height_;
  std::vector<ChannelSpec> channels_;
  std::vector<std::vector<float>> planes_;
};

class FoliarMask {
 public:
  FoliarMask(std::size_t width, std::size_t height, std::vector<bool> bits);

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  bool at(std::size_t x, std::size_t y) const { return bits_[y * width_ + x]; }
  const std::vector<bool>& bits() const { return bits_; }
  std::size_t true_count() const;

 private:
  std::size_t width_;
  std::size_t height_;
  std::vector<bool> bits_;
};

// Per-pixel channel tuples of the foliar surface of one plant on one day.
struct MaskedSample {
  std::string sample_id;
  int dat = 0;
  std::vector<ChannelSpec> channels;
  std::vector<float> values;  // pixel-major, channels.size() per pixel

  std::size_t pixel_count() const {
    return channels.empty() ? 0 : values.size() / channels.size();
  }
  std::span<const float> pixel(std::size_t i) const {
    return std::span<const float>(values).subspan(i * channels.size(),
                                                  channels.size());
  }
};

MsiCube load_cube(const std::filesystem::path& dir);
void save_cube(const MsiCube& cube, const std::filesystem::path& dir);

FoliarMask load_mask(const std::filesystem::path& dir);
void save_mask(const FoliarMask& mask, const std::filesystem::path& dir);

// Keeps the pixels under true mask bits, in row-major scan order.
MaskedSample apply_mask(const MsiCube& cube, const FoliarMask& mask,
                        std::string sample_id, int dat);

struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::array<std::vector<std::uint8_t>, 3> planes;  // r, g, b
};

// Linear percentile (interpolating between closest ranks) of `values`,
// q in [0, 1].
double percentile(std::span<const float> values, double q);

// Stretches the red, green and blue planes so that the 1st percentile maps
// to 0 and the 99th to 255, clamped. A plane with p1 == p99 maps to 0.
RgbImage to_pseudo_rgb(const MsiCube& cube);

// Binary PPM (P6).
void write_ppm(const RgbImage& image, const std::filesystem::path& path);

}  // namespace plantmon::raster

#endif  // PLANTMON_RASTER_HPP_
