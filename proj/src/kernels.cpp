#include "flowsense/kernels.hpp"

#include <cstdlib>
#include <cstring>

#include "flowsense/errors.hpp"

namespace flowsense::kernels {

namespace {

const Backend& select_backend() {
  const char* wanted = std::getenv("FLOWSENSE_KERNELS");
  if (wanted != nullptr && *wanted != '\0') {
    if (std::strcmp(wanted, "scalar") == 0) return scalar_backend();
    if (std::strcmp(wanted, "avx2") == 0) {
      const Backend* b = avx2_backend();
      if (b == nullptr) {
        throw ConfigError("FLOWSENSE_KERNELS=avx2 requested but AVX2/FMA is "
                          "not available on this CPU/build");
      }
      return *b;
    }
    throw ConfigError(std::string("unknown FLOWSENSE_KERNELS value: ") + wanted);
  }
  const Backend* b = avx2_backend();
  return b != nullptr ? *b : scalar_backend();
}

}  // namespace

const Backend& active_backend() {
  static const Backend& chosen = select_backend();
  return chosen;
}

std::vector<const Backend*> available_backends() {
  std::vector<const Backend*> out{&scalar_backend()};
  if (const Backend* b = avx2_backend()) out.push_back(b);
  return out;
}

}  // namespace flowsense::kernels
