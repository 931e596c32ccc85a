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

#include "pnpcm/channel.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "pnpcm/container.hpp"

namespace pnpcm {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

void ArrayGeometry::validate() const {
    require(n_horizontal >= 1 && n_vertical >= 1, errc::invalid_argument,
            "array dimensions must be positive");
    require(spacing > 0.0, errc::invalid_argument, "element spacing must be positive");
}

VecC steering_vector(const ArrayGeometry &geom, double azimuth, double elevation) {
    geom.validate();
    const int nh = geom.n_horizontal;
    const int nv = geom.n_vertical;
    const double scale = 1.0 / std::sqrt(static_cast<double>(nh) * nv);
    const double kh = kTwoPi * geom.spacing * std::sin(azimuth) * std::cos(elevation);
    const double kv = kTwoPi * geom.spacing * std::sin(elevation);

    VecC a(static_cast<Eigen::Index>(nh) * nv);
    for (int q = 0; q < nv; ++q)
        for (int p = 0; p < nh; ++p)
            a[static_cast<Eigen::Index>(q) * nh + p] =
                scale * std::polar(1.0, p * kh + q * kv);
    return a;
}

namespace {
MatC unitary_dft(int n) {
    MatC f(n, n);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c)
            f(r, c) = scale * std::polar(1.0, -kTwoPi * r * c / n);
    return f;
}
} // namespace

DftDictionary build_dictionary(const ArrayGeometry &geom) {
    geom.validate();
    const MatC fv = unitary_dft(geom.n_vertical);
    const MatC fh = unitary_dft(geom.n_horizontal);
    const int nh = geom.n_horizontal;
    const int nv = geom.n_vertical;
    MatC f(geom.size(), geom.size());
    for (int qr = 0; qr < nv; ++qr)
        for (int qc = 0; qc < nv; ++qc)
            f.block(static_cast<Eigen::Index>(qr) * nh, static_cast<Eigen::Index>(qc) * nh, nh,
                    nh) = fv(qr, qc) * fh;
    return DftDictionary{std::move(f)};
}

MatC to_angular(const MatC &h, const DftDictionary &f_r, const DftDictionary &f_t) {
    require(f_r.matrix.rows() == h.rows() && f_t.matrix.rows() == h.cols(),
            errc::dimension_mismatch, "to_angular: dictionary/channel shapes disagree");
    return f_r.matrix.adjoint() * h * f_t.matrix;
}

MatC to_spatial(const MatC &h_a, const DftDictionary &f_r, const DftDictionary &f_t) {
    require(f_r.matrix.rows() == h_a.rows() && f_t.matrix.rows() == h_a.cols(),
            errc::dimension_mismatch, "to_spatial: dictionary/channel shapes disagree");
    return f_r.matrix * h_a * f_t.matrix.adjoint();
}

ChannelSample synthesize_channel(const ArrayGeometry &geom_t, const ArrayGeometry &geom_r,
                                 const std::vector<PathParams> &paths,
                                 const std::string &sample_id) {
    require(!paths.empty(), errc::empty_path_list, "synthesize_channel: no paths");
    geom_t.validate();
    geom_r.validate();

    const int n_t = geom_t.size();
    const int n_r = geom_r.size();
    MatC h = MatC::Zero(n_r, n_t);
    for (const auto &p : paths) {
        require(p.power >= 0.0, errc::invalid_argument, "path power must be nonnegative");
        const cxd alpha = std::polar(std::sqrt(p.power), p.phase);
        h.noalias() += alpha * steering_vector(geom_r, p.aoa_az, p.aoa_el) *
                       steering_vector(geom_t, p.aod_az, p.aod_el).adjoint();
    }
    h *= std::sqrt(static_cast<double>(n_t) * n_r / static_cast<double>(paths.size()));

    ChannelSample s;
    s.spatial = std::move(h);
    s.angular = to_angular(s.spatial, build_dictionary(geom_r), build_dictionary(geom_t));
    s.paths = paths;
    s.sample_id = sample_id;
    return s;
}

namespace {
double parse_field(const std::string &field, const char *col, int line_no) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(field, &pos);
    } catch (const std::exception &) {
        fail(errc::parse_error,
             "line " + std::to_string(line_no) + ": bad " + col + " value '" + field + "'");
    }
    require(pos == field.size(), errc::parse_error,
            "line " + std::to_string(line_no) + ": trailing characters in " + col + " '" + field +
                "'");
    require(std::isfinite(v), errc::parse_error,
            "line " + std::to_string(line_no) + ": non-finite " + col);
    return v;
}

std::vector<std::string> split_csv(const std::string &line) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(line);
    while (std::getline(ss, cur, ','))
        out.push_back(cur);
    if (!line.empty() && line.back() == ',')
        out.emplace_back();
    return out;
}
} // namespace

std::vector<std::pair<std::string, std::vector<PathParams>>>
load_path_file(const std::string &path) {
    std::ifstream f(path);
    require(f.good(), errc::io_error, "cannot open path file: " + path);

    static const std::vector<std::string> kColumns = {
        "sample_id", "power", "phase", "aoa_az", "aoa_el", "aod_az", "aod_el"};

    std::string line;
    require(static_cast<bool>(std::getline(f, line)), errc::parse_error,
            "empty path file: " + path);
    if (!line.empty() && line.back() == '\r')
        line.pop_back();
    auto header = split_csv(line);
    for (const auto &col : kColumns) {
        bool found = false;
        for (const auto &h : header)
            if (h == col)
                found = true;
        require(found, errc::missing_column, "path file lacks column '" + col + "'");
    }
    require(header == kColumns, errc::missing_column,
            "path file columns must be exactly: sample_id,power,phase,aoa_az,aoa_el,aod_az,aod_el");

    std::vector<std::pair<std::string, std::vector<PathParams>>> groups;
    std::map<std::string, std::size_t> index;
    int line_no = 1;
    while (std::getline(f, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        auto fields = split_csv(line);
        require(fields.size() == kColumns.size(), errc::parse_error,
                "line " + std::to_string(line_no) + ": expected " +
                    std::to_string(kColumns.size()) + " fields, got " +
                    std::to_string(fields.size()));
        PathParams p;
        p.power = parse_field(fields[1], "power", line_no);
        require(p.power >= 0.0, errc::parse_error,
                "line " + std::to_string(line_no) + ": negative power");
        p.phase = parse_field(fields[2], "phase", line_no);
        p.aoa_az = parse_field(fields[3], "aoa_az", line_no);
        p.aoa_el = parse_field(fields[4], "aoa_el", line_no);
        p.aod_az = parse_field(fields[5], "aod_az", line_no);
        p.aod_el = parse_field(fields[6], "aod_el", line_no);

        auto it = index.find(fields[0]);
        if (it == index.end()) {
            index.emplace(fields[0], groups.size());
            groups.emplace_back(fields[0], std::vector<PathParams>{p});
        } else {
            groups[it->second].second.push_back(p);
        }
    }
    return groups;
}

std::vector<PathParams> sample_synthetic_paths(Rng &rng, const SyntheticPathConfig &config) {
    require(config.l_min >= 1 && config.l_max <= 64 && config.l_min <= config.l_max,
            errc::invalid_range, "L range must satisfy 1 <= l_min <= l_max <= 64");
    require(config.power_decay > 0.0 && config.power_decay <= 1.0, errc::invalid_range,
            "power_decay must lie in (0, 1]");

    const int l = config.l_min +
                  static_cast<int>(rng.uniform_int(
                      static_cast<std::uint64_t>(config.l_max - config.l_min) + 1));
    std::vector<PathParams> paths(l);
    double total = 0.0;
    double w = 1.0;
    for (int i = 0; i < l; ++i) {
        paths[i].power = w;
        total += w;
        w *= config.power_decay;
    }
    for (auto &p : paths) {
        p.power /= total;
        p.phase = rng.uniform(0.0, kTwoPi);
        p.aoa_az = rng.uniform(-std::numbers::pi / 2, std::numbers::pi / 2);
        p.aoa_el = rng.uniform(-std::numbers::pi / 4, std::numbers::pi / 4);
        p.aod_az = rng.uniform(-std::numbers::pi / 2, std::numbers::pi / 2);
        p.aod_el = rng.uniform(-std::numbers::pi / 4, std::numbers::pi / 4);
    }
    return paths;
}

void ChannelDataset::save(const std::string &path) const {
    ContainerWriter w;
    w.meta["kind"] = "channel_dataset";
    w.meta["format_version"] = 1;
    w.meta["n_r"] = n_r();
    w.meta["n_t"] = n_t();
    w.meta["count"] = samples.size();
    w.meta["layout"] = "colmajor_interleaved_f64";
    w.meta["tx"] = {{"n_horizontal", tx.n_horizontal},
                    {"n_vertical", tx.n_vertical},
                    {"spacing", tx.spacing}};
    w.meta["rx"] = {{"n_horizontal", rx.n_horizontal},
                    {"n_vertical", rx.n_vertical},
                    {"spacing", rx.spacing}};
    auto ids = nlohmann::json::array();
    for (const auto &s : samples)
        ids.push_back(s.sample_id);
    w.meta["sample_ids"] = ids;

    std::vector<double> blob;
    blob.reserve(samples.size() * static_cast<std::size_t>(n_r()) * n_t() * 2);
    for (const auto &s : samples) {
        require(s.spatial.rows() == n_r() && s.spatial.cols() == n_t(), errc::dimension_mismatch,
                "dataset sample has inconsistent shape: " + s.sample_id);
        for (Eigen::Index c = 0; c < s.spatial.cols(); ++c)
            for (Eigen::Index r = 0; r < s.spatial.rows(); ++r) {
                blob.push_back(s.spatial(r, c).real());
                blob.push_back(s.spatial(r, c).imag());
            }
    }
    w.add_f64("spatial", blob.data(), blob.size());
    w.write(path);
}

ChannelDataset ChannelDataset::load(const std::string &path) {
    ContainerReader r(path);
    const auto &m = r.meta();
    require(m.value("kind", "") == "channel_dataset", errc::parse_error,
            "not a channel dataset: " + path);
    require(m.value("format_version", 0) == 1, errc::version_mismatch,
            "unsupported dataset format version in " + path);

    ChannelDataset ds;
    ds.tx = {m["tx"]["n_horizontal"], m["tx"]["n_vertical"], m["tx"]["spacing"]};
    ds.rx = {m["rx"]["n_horizontal"], m["rx"]["n_vertical"], m["rx"]["spacing"]};
    const int nr = m["n_r"], nt = m["n_t"];
    require(nr == ds.rx.size() && nt == ds.tx.size(), errc::parse_error,
            "dataset geometry/shape disagree in " + path);
    const std::size_t count = m["count"];

    auto blob = r.read_f64("spatial");
    require(blob.size() == count * static_cast<std::size_t>(nr) * nt * 2, errc::parse_error,
            "dataset payload size mismatch in " + path);

    const DftDictionary f_t = build_dictionary(ds.tx);
    const DftDictionary f_r = build_dictionary(ds.rx);
    std::size_t k = 0;
    ds.samples.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        MatC h(nr, nt);
        for (int c = 0; c < nt; ++c)
            for (int rr = 0; rr < nr; ++rr) {
                h(rr, c) = cxd(blob[k], blob[k + 1]);
                k += 2;
            }
        ds.samples[i].spatial = std::move(h);
        ds.samples[i].angular = to_angular(ds.samples[i].spatial, f_r, f_t);
        ds.samples[i].sample_id = m["sample_ids"][i].get<std::string>();
    }
    return ds;
}

ChannelDataset generate_dataset(Rng &rng, const DatasetGenConfig &config) {
    require(config.count >= 1, errc::invalid_argument, "dataset count must be positive");
    ChannelDataset ds;
    ds.tx = config.tx;
    ds.rx = config.rx;
    ds.samples.reserve(config.count);
    for (int i = 0; i < config.count; ++i) {
        Rng sample_rng = rng.fork(static_cast<std::uint64_t>(i));
        auto paths = sample_synthetic_paths(sample_rng, config.paths);
        ds.samples.push_back(synthesize_channel(config.tx, config.rx, paths,
                                                config.id_prefix + std::to_string(i)));
    }
    return ds;
}

ChannelDataset dataset_from_path_file(const std::string &csv_path, const ArrayGeometry &tx,
                                      const ArrayGeometry &rx) {
    ChannelDataset ds;
    ds.tx = tx;
    ds.rx = rx;
    for (auto &[id, paths] : load_path_file(csv_path))
        ds.samples.push_back(synthesize_channel(tx, rx, paths, id));
    return ds;
}

} // namespace pnpcm
