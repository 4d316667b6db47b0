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

#include "plantmon/raster.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "plantmon/common.hpp"

namespace plantmon::raster {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr std::string_view kDtype = "f32le";

struct Header {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::string> channels;
};

Header read_header(const fs::path& dir) {
  const fs::path path = dir / "header.json";
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": malformed header: " + e.what());
  }
  auto bad = [&](const std::string& what) {
    return DataError(path.string() + ": malformed header: " + what);
  };
  if (!doc.is_object()) throw bad("not an object");
  for (const char* key : {"width", "height", "channels", "dtype"}) {
    if (!doc.contains(key)) throw bad(std::string("missing key '") + key + "'");
  }
  if (!doc["width"].is_number_unsigned() || !doc["height"].is_number_unsigned())
    throw bad("width/height must be non-negative integers");
  if (!doc["dtype"].is_string() || doc["dtype"].get<std::string>() != kDtype)
    throw bad("dtype must be \"f32le\"");
  if (!doc["channels"].is_array() || doc["channels"].empty())
    throw bad("channels must be a non-empty array");
  Header h;
  h.width = doc["width"].get<std::size_t>();
  h.height = doc["height"].get<std::size_t>();
  if (h.width == 0 || h.height == 0) throw bad("zero-sized raster");
  for (const auto& c : doc["channels"]) {
    if (!c.is_string()) throw bad("channel names must be strings");
    h.channels.push_back(c.get<std::string>());
  }
  return h;
}

void write_header(const fs::path& dir, std::size_t width, std::size_t height,
                  const std::vector<ChannelSpec>& channels) {
  json doc;
  doc["width"] = width;
  doc["height"] = height;
  json names = json::array();
  for (const auto& c : channels) names.push_back(c.name);
  doc["channels"] = names;
  doc["dtype"] = kDtype;
  std::ofstream out(dir / "header.json", std::ios::binary);
  if (!out) throw ConfigError("cannot write " + (dir / "header.json").string());
  out << doc.dump(2) << '\n';
}

// Reads data.bin into planes of width*height values each.
std::vector<std::vector<float>> read_blob(const fs::path& dir,
                                          const Header& h) {
  const fs::path path = dir / "data.bin";
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  const std::size_t plane_size = h.width * h.height;
  const std::size_t expected = plane_size * h.channels.size() * 4;
  in.seekg(0, std::ios::end);
  const auto actual = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  if (actual != expected) {
    throw DataError(path.string() + ": blob size " + std::to_string(actual) +
                    " bytes, expected " + std::to_string(expected));
  }
  std::vector<std::vector<float>> planes(h.channels.size());
  std::vector<std::uint32_t> raw(plane_size);
  for (auto& plane : planes) {
    in.read(reinterpret_cast<char*>(raw.data()),
            static_cast<std::streamsize>(plane_size * 4));
    if (!in) throw DataError(path.string() + ": short read");
    plane.resize(plane_size);
    for (std::size_t i = 0; i < plane_size; ++i) {
      std::uint32_t bits = raw[i];
      if constexpr (std::endian::native == std::endian::big) {
        bits = ((bits & 0xFFu) << 24) | ((bits & 0xFF00u) << 8) |
               ((bits >> 8) & 0xFF00u) | (bits >> 24);
      }
      plane[i] = std::bit_cast<float>(bits);
    }
  }
  return planes;
}

void write_blob(const fs::path& dir,
                const std::vector<std::span<const float>>& planes) {
  const fs::path path = dir / "data.bin";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  std::vector<std::uint32_t> raw;
  for (auto plane : planes) {
    raw.resize(plane.size());
    for (std::size_t i = 0; i < plane.size(); ++i) {
      std::uint32_t bits = std::bit_cast<std::uint32_t>(plane[i]);
      if constexpr (std::endian::native == std::endian::big) {
        bits = ((bits & 0xFFu) << 24) | ((bits & 0xFF00u) << 8) |
               ((bits >> 8) & 0xFF00u) | (bits >> 24);
      }
      raw[i] = bits;
    }
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(raw.size() * 4));
  }
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace

std::vector<ChannelSpec> make_channels(const std::vector<std::string>& names) {
  std::set<std::string> seen;
  std::vector<ChannelSpec> out;
  out.reserve(names.size());
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i].empty()) throw ConfigError("empty channel name");
    if (!seen.insert(names[i]).second) {
      throw ConfigError("duplicate channel name '" + names[i] + "'");
    }
    out.push_back({names[i], i});
  }
  return out;
}

std::vector<ChannelSpec> default_channels(std::string_view extra_name) {
  std::vector<std::string> names(kNamedChannels.begin(), kNamedChannels.end());
  names.emplace_back(extra_name);
  return make_channels(names);
}

MsiCube::MsiCube(std::size_t width, std::size_t height,
                 std::vector<ChannelSpec> channels,
                 std::vector<std::vector<float>> planes)
    : width_(width),
      height_(height),
      channels_(std::move(channels)),
      planes_(std::move(planes)) {
  if (width_ == 0 || height_ == 0) throw ConfigError("zero-sized cube");
  if (planes_.size() != channels_.size()) {
    throw ConfigError("cube has " + std::to_string(planes_.size()) +
                      " planes for " + std::to_string(channels_.size()) +
                      " channels");
  }
  std::set<std::string> seen;
  for (std::size_t i = 0; i < channels_.size(); ++i) {
    if (channels_[i].index != i) throw ConfigError("channel indices not 0..n-1");
    if (!seen.insert(channels_[i].name).second) {
      throw ConfigError("duplicate channel name '" + channels_[i].name + "'");
    }
  }
  for (std::size_t c = 0; c < planes_.size(); ++c) {
    if (planes_[c].size() != pixel_count()) {
      throw ConfigError("plane '" + channels_[c].name + "' has wrong size");
    }
    for (float v : planes_[c]) {
      if (!std::isfinite(v) || v < 0.0f) {
        throw DataError("plane '" + channels_[c].name +
                        "' holds a non-finite or negative value");
      }
    }
  }
}

std::optional<std::size_t> MsiCube::find_channel(std::string_view name) const {
  for (const auto& c : channels_) {
    if (c.name == name) return c.index;
  }
  return std::nullopt;
}

FoliarMask::FoliarMask(std::size_t width, std::size_t height,
                       std::vector<bool> bits)
    : width_(width), height_(height), bits_(std::move(bits)) {
  if (bits_.size() != width_ * height_) {
    throw ConfigError("mask bit count does not match its dimensions");
  }
}

std::size_t FoliarMask::true_count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), true));
}

MsiCube load_cube(const fs::path& dir) {
  const Header h = read_header(dir);
  auto channels = make_channels(h.channels);
  auto planes = read_blob(dir, h);
  return MsiCube(h.width, h.height, std::move(channels), std::move(planes));
}

void save_cube(const MsiCube& cube, const fs::path& dir) {
  fs::create_directories(dir);
  write_header(dir, cube.width(), cube.height(), cube.channels());
  std::vector<std::span<const float>> planes;
  for (std::size_t c = 0; c < cube.channel_count(); ++c) {
    planes.push_back(cube.plane(c));
  }
  write_blob(dir, planes);
}

FoliarMask load_mask(const fs::path& dir) {
  const Header h = read_header(dir);
  if (h.channels.size() != 1 || h.channels[0] != kMaskChannelName) {
    throw DataError(dir.string() + ": mask must have one channel named 'mask'");
  }
  auto planes = read_blob(dir, h);
  std::vector<bool> bits(h.width * h.height);
  for (std::size_t i = 0; i < bits.size(); ++i) {
    const float v = planes[0][i];
    if (v != 0.0f && v != 1.0f) {
      throw DataError(dir.string() + ": mask values must be 0.0 or 1.0");
    }
    bits[i] = v == 1.0f;
  }
  return FoliarMask(h.width, h.height, std::move(bits));
}

void save_mask(const FoliarMask& mask, const fs::path& dir) {
  fs::create_directories(dir);
  write_header(dir, mask.width(), mask.height(),
               {ChannelSpec{std::string(kMaskChannelName), 0}});
  std::vector<float> plane(mask.bits().size());
  for (std::size_t i = 0; i < plane.size(); ++i) {
    plane[i] = mask.bits()[i] ? 1.0f : 0.0f;
  }
  write_blob(dir, {std::span<const float>(plane)});
}

MaskedSample apply_mask(const MsiCube& cube, const FoliarMask& mask,
                        std::string sample_id, int dat) {
  if (mask.width() != cube.width() || mask.height() != cube.height()) {
    throw ConfigError("mask " + std::to_string(mask.width()) + "x" +
                      std::to_string(mask.height()) + " does not match cube " +
                      std::to_string(cube.width()) + "x" +
                      std::to_string(cube.height()));
  }
  const std::size_t count = mask.true_count();
  if (count == 0) throw DataError("empty mask for sample '" + sample_id + "'");
  MaskedSample out;
  out.sample_id = std::move(sample_id);
  out.dat = dat;
  out.channels = cube.channels();
  out.values.reserve(count * cube.channel_count());
  const auto& bits = mask.bits();
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (!bits[i]) continue;
    for (std::size_t c = 0; c < cube.channel_count(); ++c) {
      out.values.push_back(cube.plane(c)[i]);
    }
  }
  return out;
}

double percentile(std::span<const float> values, double q) {
  if (values.empty()) throw ConfigError("percentile of empty set");
  std::vector<float> v(values.begin(), values.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(lo),
                   v.end());
  const double a = v[lo];
  double b = a;
  if (hi != lo) {
    b = *std::min_element(v.begin() + static_cast<std::ptrdiff_t>(lo) + 1,
                          v.end());
  }
  return a + (pos - static_cast<double>(lo)) * (b - a);
}

RgbImage to_pseudo_rgb(const MsiCube& cube) {
  RgbImage img;
  img.width = cube.width();
  img.height = cube.height();
  constexpr std::array<std::string_view, 3> kRgb = {"red", "green", "blue"};
  for (std::size_t k = 0; k < 3; ++k) {
    const auto channel = cube.find_channel(kRgb[k]);
    if (!channel) {
      throw ConfigError("cube lacks a '" + std::string(kRgb[k]) + "' channel");
    }
    const auto plane = cube.plane(*channel);
    const double p1 = percentile(plane, 0.01);
    const double p99 = percentile(plane, 0.99);
    auto& out = img.planes[k];
    out.assign(plane.size(), 0);
    if (p99 == p1) continue;
    const double scale = 255.0 / (p99 - p1);
    for (std::size_t i = 0; i < plane.size(); ++i) {
      const double v = std::round((plane[i] - p1) * scale);
      out[i] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
    }
  }
  return img;
}

void write_ppm(const RgbImage& image, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  const std::size_t n = image.width * image.height;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < 3; ++k) {
      out.put(static_cast<char>(image.planes[k][i]));
    }
  }
}

}  // namespace plantmon::raster
