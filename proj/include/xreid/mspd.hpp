#pragma once

#include <string>
#include <utility>
#include <vector>

#include "xreid/tensor.hpp"

namespace xreid {

// A plain host-side tensor: shape plus row-major float32 payload. This is the
// unit of the on-disk MSPD format (magic "MSPD", u32 version 1, u32 rank,
// rank x u32 extents, then float32 little-endian data).
struct HostTensor {
  Shape shape;
  std::vector<float> data;
};

void save_mspd(const std::string& path, const Shape& shape, const std::vector<float>& data);
HostTensor load_mspd(const std::string& path);

// A checkpoint is a directory of MSPD files plus a manifest text file mapping
// parameter names to file names, one "name file" pair per line.
void save_checkpoint(const std::string& dir,
                     const std::vector<std::pair<std::string, HostTensor>>& params);
std::vector<std::pair<std::string, HostTensor>> load_checkpoint(const std::string& dir);

}  // namespace xreid
