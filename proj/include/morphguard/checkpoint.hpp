#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "morphguard/encoder.hpp"

namespace morphguard {

/// Binary little-endian checkpoint:
///   "MGCKPT01", u32 input_dim, u32 d, u32 C, u32 layer_count,
///   per layer: u32 rows, u32 cols, f64[rows*cols] weights (row-major), f64[rows] bias,
///   f64[C*d] head1, f64[C*d] head2.
std::string encode_checkpoint(const DualHeadModel& model);

/// Throws FormatError with the byte offset of the first inconsistency.
DualHeadModel decode_checkpoint(std::string_view bytes);

void save_checkpoint(const DualHeadModel& model, const std::filesystem::path& path);
DualHeadModel load_checkpoint(const std::filesystem::path& path);

}  // namespace morphguard
