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

#include "pnpcm/cg.hpp"

#include <cmath>

namespace pnpcm {

namespace {
VecC normal_apply(const MeasurementOperator &op, double rho, const VecC &z) {
    return op.adjoint_apply(op.apply(z)) + rho * z;
}
} // namespace

CgResult solve_regularized_normal(const MeasurementOperator &op, double rho, const VecC &b,
                                  const CgSettings &settings) {
    require(rho > 0.0, errc::invalid_argument, "cg: rho must be positive");
    require(b.size() == op.cols(), errc::dimension_mismatch, "cg: rhs length != operator cols");
    require(settings.max_iters >= 1 && settings.tolerance > 0.0, errc::invalid_argument,
            "cg: bad settings");

    const double b_norm = b.norm();
    if (b_norm == 0.0)
        return {VecC::Zero(b.size()), 0, 0.0};

    VecC z;
    if (settings.initial_guess != nullptr) {
        require(settings.initial_guess->size() == b.size(), errc::dimension_mismatch,
                "cg: warm start length mismatch");
        z = *settings.initial_guess;
    } else {
        z = VecC::Zero(b.size());
    }

    VecC r = b - normal_apply(op, rho, z);
    VecC p = r;
    double rr = r.squaredNorm();
    int iters = 0;

    // The recurrence residual drives the stopping test; on (apparent)
    // convergence the true residual is recomputed and iteration resumes if
    // the recurrence has drifted.
    while (iters < settings.max_iters) {
        if (std::sqrt(rr) <= settings.tolerance * b_norm) {
            r = b - normal_apply(op, rho, z);
            rr = r.squaredNorm();
            if (std::sqrt(rr) <= settings.tolerance * b_norm)
                break;
            p = r;
        }
        VecC q = normal_apply(op, rho, p);
        const double pq = std::real(p.dot(q)); // p.dot(q) = p^H q, real for Hermitian B
        if (!(pq > 0.0) || !std::isfinite(pq))
            fail(errc::non_finite, "cg: curvature " + std::to_string(pq) + " at iteration " +
                                       std::to_string(iters));
        const double alpha = rr / pq;
        z += alpha * p;
        r -= alpha * q;
        const double rr_new = r.squaredNorm();
        if (!std::isfinite(rr_new))
            fail(errc::non_finite, "cg: non-finite residual at iteration " + std::to_string(iters));
        p = r + (rr_new / rr) * p;
        rr = rr_new;
        ++iters;
    }

    CgResult result;
    result.z = std::move(z);
    result.iters = iters;
    result.residual = (b - normal_apply(op, rho, result.z)).norm() / b_norm;
    require(std::isfinite(result.residual), errc::non_finite, "cg: non-finite final residual");
    return result;
}

CgResult data_consistency_update(const MeasurementOperator &op, const VecC &y, double rho,
                                 const VecC &x_hat, const VecC &u_hat,
                                 const CgSettings &settings) {
    require(y.size() == op.rows(), errc::dimension_mismatch, "data consistency: bad y length");
    require(x_hat.size() == op.cols() && u_hat.size() == op.cols(), errc::dimension_mismatch,
            "data consistency: bad state length");
    VecC b = op.adjoint_apply(y) + rho * (x_hat - u_hat);
    return solve_regularized_normal(op, rho, b, settings);
}

} // namespace pnpcm
