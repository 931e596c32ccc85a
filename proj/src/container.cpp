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

#include "pnpcm/container.hpp"

#include <cstring>
#include <fstream>

#include "pnpcm/errors.hpp"

namespace pnpcm {

namespace {
constexpr char kMagic[8] = {'P', 'N', 'P', 'C', 'B', 'L', 'O', 'B'};

template <typename T> void append_le(std::vector<char> &out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.insert(out.end(), buf, buf + sizeof(T));
}
} // namespace

void ContainerWriter::add_f64(const std::string &name, const double *data, std::size_t count) {
    blobs_.push_back({{"name", name},
                      {"dtype", "f64"},
                      {"count", count},
                      {"offset", payload_.size()}});
    const char *p = reinterpret_cast<const char *>(data);
    payload_.insert(payload_.end(), p, p + count * sizeof(double));
}

void ContainerWriter::add_f32(const std::string &name, const float *data, std::size_t count) {
    blobs_.push_back({{"name", name},
                      {"dtype", "f32"},
                      {"count", count},
                      {"offset", payload_.size()}});
    const char *p = reinterpret_cast<const char *>(data);
    payload_.insert(payload_.end(), p, p + count * sizeof(float));
}

void ContainerWriter::write(const std::string &path) const {
    nlohmann::json header = meta;
    header["blobs"] = blobs_;
    std::string json = header.dump();

    std::vector<char> out;
    out.reserve(20 + json.size() + payload_.size());
    out.insert(out.end(), kMagic, kMagic + 8);
    append_le<std::uint32_t>(out, kContainerVersion);
    append_le<std::uint64_t>(out, json.size());
    out.insert(out.end(), json.begin(), json.end());
    out.insert(out.end(), payload_.begin(), payload_.end());

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    require(f.good(), errc::io_error, "cannot open for writing: " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    require(f.good(), errc::io_error, "short write: " + path);
}

ContainerReader::ContainerReader(const std::string &path) {
    std::ifstream f(path, std::ios::binary);
    require(f.good(), errc::io_error, "cannot open: " + path);
    std::vector<char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    require(bytes.size() >= 20, errc::parse_error, "truncated container: " + path);
    require(std::memcmp(bytes.data(), kMagic, 8) == 0, errc::parse_error,
            "bad magic, not a pnpcm container: " + path);
    std::uint32_t version = 0;
    std::memcpy(&version, bytes.data() + 8, 4);
    require(version == kContainerVersion, errc::version_mismatch,
            "container version " + std::to_string(version) + " unsupported: " + path);
    std::uint64_t json_len = 0;
    std::memcpy(&json_len, bytes.data() + 12, 8);
    require(bytes.size() >= 20 + json_len, errc::parse_error, "truncated header: " + path);

    try {
        meta_ = nlohmann::json::parse(bytes.begin() + 20, bytes.begin() + 20 + json_len);
    } catch (const nlohmann::json::exception &e) {
        fail(errc::parse_error, "container header: " + std::string(e.what()));
    }
    require(meta_.contains("blobs"), errc::parse_error, "container header lacks blobs: " + path);
    blobs_ = meta_["blobs"];
    payload_.assign(bytes.begin() + 20 + json_len, bytes.end());

    for (const auto &b : blobs_) {
        std::size_t width = b.at("dtype") == "f64" ? 8 : 4;
        std::size_t end = b.at("offset").get<std::size_t>() + b.at("count").get<std::size_t>() * width;
        require(end <= payload_.size(), errc::parse_error,
                "blob extends past payload: " + b.at("name").get<std::string>());
    }
}

const nlohmann::json &ContainerReader::find(const std::string &name) const {
    for (const auto &b : blobs_)
        if (b.at("name") == name)
            return b;
    fail(errc::parse_error, "missing blob: " + name);
}

bool ContainerReader::has(const std::string &name) const {
    for (const auto &b : blobs_)
        if (b.at("name") == name)
            return true;
    return false;
}

std::size_t ContainerReader::blob_count(const std::string &name) const {
    return find(name).at("count").get<std::size_t>();
}

std::vector<double> ContainerReader::read_f64(const std::string &name) const {
    const auto &b = find(name);
    require(b.at("dtype") == "f64", errc::parse_error, "blob is not f64: " + name);
    std::size_t count = b.at("count").get<std::size_t>();
    std::vector<double> out(count);
    std::memcpy(out.data(), payload_.data() + b.at("offset").get<std::size_t>(),
                count * sizeof(double));
    return out;
}

std::vector<float> ContainerReader::read_f32(const std::string &name) const {
    const auto &b = find(name);
    require(b.at("dtype") == "f32", errc::parse_error, "blob is not f32: " + name);
    std::size_t count = b.at("count").get<std::size_t>();
    std::vector<float> out(count);
    std::memcpy(out.data(), payload_.data() + b.at("offset").get<std::size_t>(),
                count * sizeof(float));
    return out;
}

} // namespace pnpcm
