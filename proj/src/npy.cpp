#include "otfwi/npy.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace otfwi {

static_assert(std::endian::native == std::endian::little, "NPY I/O assumes a little-endian host");

namespace {

constexpr char kMagic[] = "\x93NUMPY";

std::size_t item_size(NpyDtype d) { return d == NpyDtype::f4 ? 4 : 8; }

// Value following 'key': in a header dict, up to the next top-level comma.
std::string dict_value(const std::string& dict, const std::string& key) {
  const std::string needle = "'" + key + "'";
  auto pos = dict.find(needle);
  if (pos == std::string::npos) throw NpyUnsupportedError("NPY header lacks '" + key + "'");
  pos = dict.find(':', pos + needle.size());
  if (pos == std::string::npos) throw NpyUnsupportedError("malformed NPY header");
  ++pos;
  while (pos < dict.size() && dict[pos] == ' ') ++pos;
  std::size_t end = pos;
  int depth = 0;
  while (end < dict.size()) {
    const char c = dict[end];
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if ((c == ',' && depth == 0) || c == '}') break;
    ++end;
  }
  std::string v = dict.substr(pos, end - pos);
  while (!v.empty() && v.back() == ' ') v.pop_back();
  return v;
}

std::vector<std::size_t> parse_shape(const std::string& s) {
  if (s.size() < 2 || s.front() != '(' || s.back() != ')') throw NpyUnsupportedError("malformed NPY shape " + s);
  std::vector<std::size_t> shape;
  std::stringstream in(s.substr(1, s.size() - 2));
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(' ');
    if (b == std::string::npos) continue;
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(item.substr(b), &used);
      shape.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw NpyUnsupportedError("malformed NPY shape " + s);
    }
  }
  return shape;
}

}  // namespace

std::size_t NpyArray::count() const noexcept {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string npy_header(const std::vector<std::size_t>& shape, NpyDtype dtype) {
  std::string dict = "{'descr': '";
  dict += dtype == NpyDtype::f4 ? "<f4" : "<f8";
  dict += "', 'fortran_order': False, 'shape': (";
  for (std::size_t k = 0; k < shape.size(); ++k) {
    dict += std::to_string(shape[k]);
    if (shape.size() == 1 || k + 1 < shape.size()) dict += ",";
    if (k + 1 < shape.size()) dict += " ";
  }
  dict += "), }";
  const std::size_t unpadded = 10 + dict.size() + 1;
  dict.append((64 - unpadded % 64) % 64, ' ');
  dict += '\n';
  std::string out(kMagic, 6);
  out += '\x01';
  out += '\x00';
  const auto len = static_cast<std::uint16_t>(dict.size());
  out += static_cast<char>(len & 0xff);
  out += static_cast<char>(len >> 8);
  return out + dict;
}

NpyArray npy_parse(const std::string& bytes) {
  if (bytes.size() < 6 || bytes.compare(0, 6, kMagic, 6) != 0) throw NpyMagicError("not an NPY file (bad magic)");
  if (bytes.size() < 10) throw NpyTruncatedError("NPY header truncated");
  if (bytes[6] != 1 || bytes[7] != 0) throw NpyUnsupportedError("only NPY version 1.0 is supported");
  const std::size_t hlen =
      static_cast<unsigned char>(bytes[8]) | (static_cast<std::size_t>(static_cast<unsigned char>(bytes[9])) << 8);
  if (bytes.size() < 10 + hlen) throw NpyTruncatedError("NPY header truncated");
  const std::string dict = bytes.substr(10, hlen);

  NpyArray a;
  const std::string descr = dict_value(dict, "descr");
  if (descr == "'<f4'")
    a.dtype = NpyDtype::f4;
  else if (descr == "'<f8'")
    a.dtype = NpyDtype::f8;
  else
    throw NpyUnsupportedError("unsupported NPY dtype " + descr);
  const std::string order = dict_value(dict, "fortran_order");
  if (order == "True") throw NpyUnsupportedError("Fortran-ordered NPY arrays are not supported");
  if (order != "False") throw NpyUnsupportedError("malformed fortran_order " + order);
  a.shape = parse_shape(dict_value(dict, "shape"));
  if (a.shape.size() < 2 || a.shape.size() > 3) throw NpyUnsupportedError("only 2D and 3D NPY arrays are supported");

  const std::size_t n = a.count(), isz = item_size(a.dtype);
  if (bytes.size() - 10 - hlen < n * isz) throw NpyTruncatedError("NPY payload truncated");
  const char* p = bytes.data() + 10 + hlen;
  a.data.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    if (a.dtype == NpyDtype::f4) {
      float f;
      std::memcpy(&f, p + 4 * j, 4);
      a.data[j] = f;
    } else {
      std::memcpy(&a.data[j], p + 8 * j, 8);
    }
  }
  return a;
}

std::string npy_serialize(const NpyArray& a) {
  if (a.data.size() != a.count()) throw InvalidArgument("NPY data size does not match its shape");
  std::string out = npy_header(a.shape, a.dtype);
  const std::size_t isz = item_size(a.dtype);
  const std::size_t base = out.size();
  out.resize(base + a.data.size() * isz);
  for (std::size_t j = 0; j < a.data.size(); ++j) {
    if (a.dtype == NpyDtype::f4) {
      const float f = static_cast<float>(a.data[j]);
      std::memcpy(out.data() + base + 4 * j, &f, 4);
    } else {
      std::memcpy(out.data() + base + 8 * j, &a.data[j], 8);
    }
  }
  return out;
}

NpyArray npy_read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return npy_parse(buf.str());
}

void npy_write(const std::filesystem::path& path, const NpyArray& array) {
  const std::string bytes = npy_serialize(array);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace otfwi
