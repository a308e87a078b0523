#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

// Thin wrappers over libcrypto: AES-128-CBC with PKCS#7, HMAC-SHA256 and
// the text encodings used on the wire.
namespace coffeescan::crypto {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

inline constexpr std::size_t kAesKeySize = 16;
inline constexpr std::size_t kAesBlockSize = 16;
inline constexpr std::size_t kMacSize = 32;

class CryptoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Throws CryptoError when key or iv is not 16 bytes.
Bytes aes128_cbc_encrypt(ByteView key, ByteView iv, ByteView plaintext);

/// nullopt when the ciphertext length or the padding is invalid.
std::optional<Bytes> aes128_cbc_decrypt(ByteView key, ByteView iv, ByteView ciphertext);

Bytes hmac_sha256(ByteView key, ByteView message);

bool constant_time_equal(ByteView a, ByteView b);

std::string base64_encode(ByteView data);
std::optional<Bytes> base64_decode(std::string_view text);

std::string hex_encode(ByteView data);
std::optional<Bytes> hex_decode(std::string_view text);

inline ByteView as_bytes(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}
inline std::string as_string(ByteView b) { return {b.begin(), b.end()}; }

}  // namespace coffeescan::crypto
