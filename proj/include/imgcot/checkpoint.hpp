#pragma once

#include <map>
#include <string>

#include "imgcot/optim.hpp"
#include "imgcot/tensor.hpp"

namespace imgcot {

// Versioned binary checkpoint: a named parameter table plus string metadata.
//
// Layout (all integers little-endian):
//   magic   "ICKP" (4 bytes)
//   version u32 (currently 1)
//   n_meta  u32, then per entry: key u16+bytes, value u16+bytes
//   n_param u32, then per entry:
//     name  u16 length + bytes
//     ndim  u32, dims u32 each
//     data  float64 little-endian, row-major, prod(dims) values
//
// Values are stored bit-exactly; save followed by load round-trips every
// parameter bitwise.

constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const ParamStore& params,
                     const std::map<std::string, std::string>& meta = {});

struct Checkpoint {
    std::map<std::string, std::string> meta;
    ParamStore params;
};

// Throws ParseError on malformed files (with byte offset) and ConfigError on
// version mismatch.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace imgcot
