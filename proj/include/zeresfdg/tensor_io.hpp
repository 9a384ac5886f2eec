#pragma once

// On-disk tensor format: raw little-endian float32 in storage order, plus a
// JSON sidecar {"shape":[n,c,h,w]} next to it (same path, .json extension).
// Round-trips are byte-exact.

#include <filesystem>

#include "zeresfdg/tensor.hpp"

namespace zeresfdg {

std::filesystem::path sidecar_path(const std::filesystem::path& raw_path);

void save_tensor(const Tensor4& t, const std::filesystem::path& raw_path);
Tensor4 load_tensor(const std::filesystem::path& raw_path);

}  // namespace zeresfdg
