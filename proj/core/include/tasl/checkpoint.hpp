// Copyright (c) 2026 the tasl authors
// SPDX-License-Identifier: Apache-2.0
//
// Binary model persistence. Layout, all integers little-endian:
//
//   bytes 0-7   magic "TASLCKPT"
//   u32         format version (currently 1)
//   u32         architecture block length, then that many bytes of
//               key=value lines describing the architecture
//   per tensor  u32 name length, name bytes, u32 ndim, u32 per dim,
//               then the row-major values as IEEE-754 binary64
//
// Tensors are written in declaration order and a file must contain every
// tensor of its architecture exactly once, so save/load roundtrips are
// byte-identical.

#pragma once

#include <filesystem>

#include "tasl/model.hpp"

namespace tasl {

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Model& model, const std::filesystem::path& path);

/// Throws DataError on wrong magic/version, truncation, or tensors that do
/// not match the declared architecture.
Model load_checkpoint(const std::filesystem::path& path);

} // namespace tasl
