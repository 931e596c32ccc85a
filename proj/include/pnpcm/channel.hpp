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

#ifndef PNPCM_CHANNEL_HPP
#define PNPCM_CHANNEL_HPP

#include <string>
#include <utility>
#include <vector>

#include "pnpcm/linalg.hpp"
#include "pnpcm/rng.hpp"

namespace pnpcm {

// Uniform planar array. Elements are indexed vertical-major project-wide:
// element (p, q) with horizontal index p and vertical index q lives at
// flat position q * n_horizontal + p.
struct ArrayGeometry {
    int n_horizontal = 1;
    int n_vertical = 1;
    double spacing = 0.5; // in wavelengths

    int size() const { return n_horizontal * n_vertical; }
    void validate() const;
    bool operator==(const ArrayGeometry &) const = default;
};

struct PathParams {
    double power = 0.0; // linear, >= 0
    double phase = 0.0; // radians
    double aoa_az = 0.0;
    double aoa_el = 0.0;
    double aod_az = 0.0;
    double aod_el = 0.0;
};

struct ChannelSample {
    MatC spatial; // H, n_r x n_t
    MatC angular; // H_a = F_r^H H F_t
    std::vector<PathParams> paths;
    std::string sample_id;
};

struct DftDictionary {
    MatC matrix; // unitary, Kronecker of the per-axis DFTs
};

// Unit-norm UPA response. Entry for element (p, q) has phase
// 2*pi*spacing*(p*sin(az)*cos(el) + q*sin(el)) and magnitude 1/sqrt(n_h*n_v).
VecC steering_vector(const ArrayGeometry &geom, double azimuth, double elevation);

// F = F_vertical (x) F_horizontal, each axis a unitary DFT, matching the
// vertical-major element order of steering_vector.
DftDictionary build_dictionary(const ArrayGeometry &geom);

MatC to_angular(const MatC &h, const DftDictionary &f_r, const DftDictionary &f_t);
MatC to_spatial(const MatC &h_a, const DftDictionary &f_r, const DftDictionary &f_t);

// H = sqrt(N_t*N_r/L) * sum_l alpha_l a_r(aoa) a_t(aod)^H with
// alpha_l = sqrt(power_l) * exp(j*phase_l).
ChannelSample synthesize_channel(const ArrayGeometry &geom_t, const ArrayGeometry &geom_r,
                                 const std::vector<PathParams> &paths,
                                 const std::string &sample_id = "");

// CSV format: header sample_id,power,phase,aoa_az,aoa_el,aod_az,aod_el;
// one path per row, angles in radians. Groups are returned in order of
// first appearance; path order within a group is preserved.
std::vector<std::pair<std::string, std::vector<PathParams>>>
load_path_file(const std::string &path);

struct SyntheticPathConfig {
    int l_min = 1;
    int l_max = 6;
    double power_decay = 0.5; // geometric ratio of successive path powers
};

// L uniform in [l_min, l_max]; azimuths uniform in [-pi/2, pi/2], elevations
// in [-pi/4, pi/4]; phases uniform in [0, 2pi); powers decay geometrically
// and are normalized to sum to one.
std::vector<PathParams> sample_synthetic_paths(Rng &rng, const SyntheticPathConfig &config);

// Channel dataset persisted as a pnpcm container of interleaved re/im
// float64 spatial matrices (column-major). The angular matrices are
// recomputed on load; path metadata is not persisted.
struct ChannelDataset {
    ArrayGeometry tx, rx;
    std::vector<ChannelSample> samples;

    int n_r() const { return rx.size(); }
    int n_t() const { return tx.size(); }

    void save(const std::string &path) const;
    static ChannelDataset load(const std::string &path);
};

struct DatasetGenConfig {
    ArrayGeometry tx{8, 8, 0.5};
    ArrayGeometry rx{4, 4, 0.5};
    SyntheticPathConfig paths;
    int count = 100;
    std::string id_prefix = "syn";
};

ChannelDataset generate_dataset(Rng &rng, const DatasetGenConfig &config);

// Builds a dataset from a path-parameter CSV (one sample per sample_id).
ChannelDataset dataset_from_path_file(const std::string &csv_path, const ArrayGeometry &tx,
                                      const ArrayGeometry &rx);

} // namespace pnpcm

#endif
