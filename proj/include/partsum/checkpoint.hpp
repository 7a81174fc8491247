#pragma once

#include <string>

#include "partsum/tensor.hpp"

namespace partsum {

// Single-file parameter checkpoint. Layout (all integers and floats
// little-endian regardless of host byte order):
//
//   magic   "PSCKPT1\n"                      8 bytes
//   count   u64                              number of parameters
//   entry*  repeated `count` times, in registration order:
//     name_len u64, name bytes (no NUL)
//     ndim     u64, extents as u64 each
//     data     f64 * numel, row-major IEEE-754 bit patterns
//
// save writes every parameter of the store; load requires an exact match of
// names and shapes (same model config) and overwrites values in place.
void save_checkpoint(const ParameterStore& params, const std::string& path);
void load_checkpoint(ParameterStore& params, const std::string& path);

}  // namespace partsum
