#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "otfwi/error.hpp"

namespace otfwi {

class NpyMagicError : public IoError {
 public:
  using IoError::IoError;
};
/// Unsupported dtype, memory order, version or rank.
class NpyUnsupportedError : public IoError {
 public:
  using IoError::IoError;
};
class NpyTruncatedError : public IoError {
 public:
  using IoError::IoError;
};

enum class NpyDtype { f4, f8 };

struct NpyArray {
  std::vector<std::size_t> shape;
  std::vector<double> data;  // C order
  NpyDtype dtype = NpyDtype::f8;

  std::size_t count() const noexcept;
};

/// Magic, version 1.0, header length and the padded dict, aligned to 64 bytes.
std::string npy_header(const std::vector<std::size_t>& shape, NpyDtype dtype);

NpyArray npy_parse(const std::string& bytes);
std::string npy_serialize(const NpyArray& array);

NpyArray npy_read(const std::filesystem::path& path);
void npy_write(const std::filesystem::path& path, const NpyArray& array);

}  // namespace otfwi
