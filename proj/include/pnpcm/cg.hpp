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

#ifndef PNPCM_CG_HPP
#define PNPCM_CG_HPP

#include "pnpcm/linalg.hpp"
#include "pnpcm/measurement.hpp"

namespace pnpcm {

struct CgSettings {
    int max_iters = 80;
    double tolerance = 1e-6;          // relative residual ||Bz - b|| / ||b||
    const VecC *initial_guess = nullptr; // optional warm start
};

struct CgResult {
    VecC z;
    int iters = 0;
    double residual = 0.0; // independently recomputed relative residual
};

// Conjugate gradient on the Hermitian positive-definite normal operator
// B = A^H A + rho I, matrix-free. Returns once the relative residual drops
// below the tolerance or the iteration budget is exhausted; the reported
// residual is always recomputed from the returned iterate.
CgResult solve_regularized_normal(const MeasurementOperator &op, double rho, const VecC &b,
                                  const CgSettings &settings);

// z = argmin ||y - A z||^2 + rho ||z - (x_hat - u_hat)||^2, i.e. the solve
// above with b = A^H y + rho (x_hat - u_hat).
CgResult data_consistency_update(const MeasurementOperator &op, const VecC &y, double rho,
                                 const VecC &x_hat, const VecC &u_hat,
                                 const CgSettings &settings);

} // namespace pnpcm

#endif
