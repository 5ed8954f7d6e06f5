#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "streamrec/nn.hpp"

namespace streamrec::nn {

/// Self-describing text archive of named tensors:
///
///   streamrec-tensors 1
///   meta <key> <value>          (zero or more)
///   tensor <name> <rows> <cols>
///   <row values, one row per line, %.17g>
///   end
///
/// Values round-trip exactly.
struct TensorArchive {
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<Tensor> tensors;

  const std::string* find_meta(const std::string& key) const;
  const Tensor* find_tensor(const std::string& name) const;
};

void write_archive(std::ostream& out, const std::vector<std::pair<std::string, std::string>>& meta,
                   const ConstParameterList& tensors);

/// Throws std::runtime_error on malformed input.
TensorArchive read_archive(std::istream& in);

}  // namespace streamrec::nn
