#include "flowsense/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "flowsense/errors.hpp"

namespace flowsense::neural {

namespace {

constexpr char kMagic[4] = {'F', 'S', 'T', 'A'};
constexpr uint32_t kVersion = 1;

void put_u32(std::string& out, uint32_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
  out.push_back(static_cast<char>((v >> 16) & 0xFF));
  out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

void put_f64(std::string& out, double d) {
  uint64_t bits;
  std::memcpy(&bits, &d, sizeof(bits));
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
  }
}

class Reader {
 public:
  Reader(const std::string& bytes, const std::string& path)
      : bytes_(bytes), path_(path) {}

  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i]))
           << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  double f64() {
    need(8);
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) {
      bits |= static_cast<uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i]))
              << (8 * i);
    }
    pos_ += 8;
    double d;
    std::memcpy(&d, &bits, sizeof(d));
    return d;
  }

  std::string str(uint32_t len) {
    need(len);
    std::string s = bytes_.substr(pos_, len);
    pos_ += len;
    return s;
  }

  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(size_t n) {
    if (pos_ + n > bytes_.size()) {
      throw ValidationError("truncated tensor archive: " + path_);
    }
  }

  const std::string& bytes_;
  std::string path_;
  size_t pos_ = 0;
};

}  // namespace

void save_tensors(const std::string& path,
                  const std::vector<NamedTensor>& tensors) {
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<uint32_t>(tensors.size()));
  for (const NamedTensor& nt : tensors) {
    put_u32(out, static_cast<uint32_t>(nt.name.size()));
    out.append(nt.name);
    const auto& shape = nt.tensor.shape();
    put_u32(out, static_cast<uint32_t>(shape.size()));
    for (int d : shape) put_u32(out, static_cast<uint32_t>(d));
    for (int64_t i = 0; i < nt.tensor.size(); ++i) put_f64(out, nt.tensor.at(i));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ValidationError("cannot open for writing: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw ValidationError("write failed: " + path);
}

std::vector<NamedTensor> load_tensors(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot open tensor archive: " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)),
                    std::istreambuf_iterator<char>());
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw ValidationError("not a tensor archive (bad magic): " + path);
  }
  Reader r(bytes, path);
  r.str(4);  // magic
  const uint32_t version = r.u32();
  if (version != kVersion) {
    throw ValidationError("unsupported tensor archive version " +
                          std::to_string(version) + " in " + path);
  }
  const uint32_t count = r.u32();
  std::vector<NamedTensor> out;
  out.reserve(count);
  for (uint32_t t = 0; t < count; ++t) {
    const uint32_t name_len = r.u32();
    std::string name = r.str(name_len);
    const uint32_t ndim = r.u32();
    if (ndim > 8) {
      throw ValidationError("implausible tensor rank in archive: " + path);
    }
    std::vector<int> shape(ndim);
    int64_t n = 1;
    for (uint32_t d = 0; d < ndim; ++d) {
      shape[d] = static_cast<int>(r.u32());
      n *= shape[d];
    }
    std::vector<double> values(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) values[static_cast<size_t>(i)] = r.f64();
    out.push_back({std::move(name), Tensor(std::move(shape), std::move(values))});
  }
  if (!r.at_end()) {
    throw ValidationError("trailing bytes in tensor archive: " + path);
  }
  return out;
}

}  // namespace flowsense::neural
