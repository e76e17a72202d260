#include "qsb/hash.hpp"

#include <openssl/evp.h>

#include "qsb/bits.hpp"
#include "qsb/errors.hpp"

namespace qsb {

Digest256 sha256(std::span<const uint8_t> data) {
  Digest256 out{};
  unsigned int len = 0;
  int rc = EVP_Digest(data.data(), data.size(), out.data(), &len,
                      EVP_sha256(), nullptr);
  require(rc == 1 && len == out.size(), Errc::internal_error,
          "EVP_Digest failed");
  return out;
}

std::string hex_digest(const Digest256& digest) { return to_hex(digest); }

}  // namespace qsb
