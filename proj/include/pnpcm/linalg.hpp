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

#ifndef PNPCM_LINALG_HPP
#define PNPCM_LINALG_HPP

#include <Eigen/Dense>
#include <complex>

#include "pnpcm/errors.hpp"

namespace pnpcm {

using cxd = std::complex<double>;
using MatC = Eigen::MatrixXcd;
using VecC = Eigen::VectorXcd;
using VecD = Eigen::VectorXd;

// vec(.) is column-major everywhere in this codebase.
inline VecC vec(const MatC &m) { return Eigen::Map<const VecC>(m.data(), m.size()); }

inline MatC unvec(const VecC &v, Eigen::Index rows, Eigen::Index cols) {
    require(v.size() == rows * cols, errc::dimension_mismatch,
            "unvec: vector length " + std::to_string(v.size()) + " != " + std::to_string(rows) +
                "x" + std::to_string(cols));
    return Eigen::Map<const MatC>(v.data(), rows, cols);
}

inline bool all_finite(const VecC &v) { return v.allFinite(); }

} // namespace pnpcm

#endif
