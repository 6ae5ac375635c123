#pragma once

#include "dgpmp/learn/network.hpp"

#include <json.hpp>

#include <iosfwd>
#include <string>

namespace dgpmp::learn {

nlohmann::json to_json(const NetworkSpec& spec);
NetworkSpec network_spec_from_json(const nlohmann::json& j);

/// Binary checkpoint, version 1:
///   "DGPMPNET" | u32 version | u32 spec_len | spec JSON
///   | u32 n_params | tensors | u32 n_buffers | tensors
/// tensor = u32 name_len | name | u32 ndim | i32 dims[ndim] | u64 count | f64 LE data
void write_checkpoint(std::ostream& os, const Network& net);
Network read_checkpoint(std::istream& is);

void save_checkpoint(const std::string& path, const Network& net);
Network load_checkpoint(const std::string& path);

}  // namespace dgpmp::learn
