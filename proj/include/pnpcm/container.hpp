// SPDX-License-Identifier: Apache-2.0
//
// pnpcm - plug-and-play consistency-model channel estimation
// Copyright (C) 2026 pnpcm contributors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef PNPCM_CONTAINER_HPP
#define PNPCM_CONTAINER_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace pnpcm {

// Single-file container used for datasets, observation bundles, checkpoints
// and estimate dumps:
//
//   bytes 0..7   magic "PNPCBLOB"
//   bytes 8..11  container version (u32 little-endian, currently 1)
//   bytes 12..19 JSON header length (u64 little-endian)
//   ...          JSON header (UTF-8)
//   ...          raw little-endian payload, described by header["blobs"]
//
// Each entry of header["blobs"] is {"name", "dtype" ("f64"|"f32"),
// "count", "offset"} with offset in bytes from the start of the payload.
class ContainerWriter {
  public:
    nlohmann::json meta;

    void add_f64(const std::string &name, const double *data, std::size_t count);
    void add_f32(const std::string &name, const float *data, std::size_t count);
    void write(const std::string &path) const;

  private:
    nlohmann::json blobs_ = nlohmann::json::array();
    std::vector<char> payload_;
};

class ContainerReader {
  public:
    explicit ContainerReader(const std::string &path);

    const nlohmann::json &meta() const { return meta_; }
    bool has(const std::string &name) const;
    std::size_t blob_count(const std::string &name) const;
    std::vector<double> read_f64(const std::string &name) const;
    std::vector<float> read_f32(const std::string &name) const;

  private:
    const nlohmann::json &find(const std::string &name) const;

    nlohmann::json meta_;
    nlohmann::json blobs_;
    std::vector<char> payload_;
};

inline constexpr std::uint32_t kContainerVersion = 1;

} // namespace pnpcm

#endif
