#pragma once

#include <string>

#include "certiprob/model.hpp"

namespace certiprob {

/// Checkpoint layout (all integers little-endian u64, all reals little-endian
/// IEEE-754 f64):
///
///   "CPRB1"
///   json_length, json bytes     canonical ModelSpec JSON; an optional
///                               "provenance" object is carried alongside
///   tensor_count
///   per tensor: rank, dims[rank], values[prod(dims)]
struct Checkpoint {
  ModelSpec spec;
  Parameters params;
  std::string provenance;  // JSON object text, empty when absent
};

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace certiprob
