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

#include "pnpcm/errors.hpp"

namespace pnpcm {

const char *errc_name(errc c) {
    switch (c) {
    case errc::ok: return "Ok";
    case errc::invalid_argument: return "InvalidArgument";
    case errc::dimension_mismatch: return "DimensionMismatch";
    case errc::shape_mismatch: return "ShapeMismatch";
    case errc::parse_error: return "ParseError";
    case errc::missing_column: return "MissingColumn";
    case errc::empty_path_list: return "EmptyPathList";
    case errc::invalid_range: return "InvalidRange";
    case errc::zero_signal: return "ZeroSignal";
    case errc::zero_truth: return "ZeroTruth";
    case errc::non_finite: return "NonFiniteEncountered";
    case errc::noise_level_out_of_range: return "NoiseLevelOutOfRange";
    case errc::missing_checkpoint: return "MissingCheckpoint";
    case errc::corrupt_checkpoint: return "CorruptCheckpoint";
    case errc::version_mismatch: return "VersionMismatch";
    case errc::empty_validation_set: return "EmptyValidationSet";
    case errc::io_error: return "IoError";
    case errc::internal: return "Internal";
    }
    return "Unknown";
}

} // namespace pnpcm
