#include "streamrec/tensor_archive.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace streamrec::nn {

namespace {
constexpr const char* kMagic = "streamrec-tensors";
constexpr int kVersion = 1;
}  // namespace

const std::string* TensorArchive::find_meta(const std::string& key) const {
  for (const auto& [k, v] : meta) {
    if (k == key) return &v;
  }
  return nullptr;
}

const Tensor* TensorArchive::find_tensor(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

void write_archive(std::ostream& out, const std::vector<std::pair<std::string, std::string>>& meta,
                   const ConstParameterList& tensors) {
  out << kMagic << ' ' << kVersion << '\n';
  for (const auto& [k, v] : meta) out << "meta " << k << ' ' << v << '\n';
  char buf[32];
  for (const auto* t : tensors) {
    out << "tensor " << t->name << ' ' << t->rows << ' ' << t->cols << '\n';
    for (std::size_t r = 0; r < t->rows; ++r) {
      for (std::size_t c = 0; c < t->cols; ++c) {
        std::snprintf(buf, sizeof buf, "%.17g", (*t)(r, c));
        out << (c ? " " : "") << buf;
      }
      out << '\n';
    }
  }
  out << "end\n";
}

TensorArchive read_archive(std::istream& in) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != kMagic || version != kVersion) {
    throw std::runtime_error("not a streamrec tensor archive");
  }
  TensorArchive archive;
  std::string word;
  while (in >> word) {
    if (word == "end") return archive;
    if (word == "meta") {
      std::string key;
      std::string value;
      in >> key;
      std::getline(in >> std::ws, value);
      archive.meta.emplace_back(key, value);
    } else if (word == "tensor") {
      std::string name;
      std::size_t rows = 0;
      std::size_t cols = 0;
      if (!(in >> name >> rows >> cols)) throw std::runtime_error("archive: bad tensor header");
      Tensor t(name, rows, cols);
      for (auto& x : t.data) {
        if (!(in >> x)) throw std::runtime_error("archive: truncated tensor " + name);
      }
      archive.tensors.push_back(std::move(t));
    } else {
      throw std::runtime_error("archive: unexpected token '" + word + "'");
    }
  }
  throw std::runtime_error("archive: missing end marker");
}

}  // namespace streamrec::nn
