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

#ifndef PNPCM_ERRORS_HPP
#define PNPCM_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace pnpcm {

enum class errc {
    ok = 0,
    invalid_argument,
    dimension_mismatch,
    shape_mismatch,
    parse_error,
    missing_column,
    empty_path_list,
    invalid_range,
    zero_signal,
    zero_truth,
    non_finite,
    noise_level_out_of_range,
    missing_checkpoint,
    corrupt_checkpoint,
    version_mismatch,
    empty_validation_set,
    io_error,
    internal,
};

const char *errc_name(errc c);

class Error : public std::runtime_error {
  public:
    Error(errc code, const std::string &msg)
        : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}
    errc code() const noexcept { return code_; }

  private:
    errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string &msg) { throw Error(code, msg); }

inline void require(bool cond, errc code, const std::string &msg) {
    if (!cond)
        fail(code, msg);
}

} // namespace pnpcm

#endif
