#include "sscgan/hash.hpp"

#include <openssl/evp.h>

#include <memory>
#include <string_view>
#include <vector>

#include "sscgan/error.hpp"
#include "sscgan/params.hpp"
#include "sscgan/voxcore.hpp"

namespace sscgan {

namespace {

class Digest {
 public:
  explicit Digest(const EVP_MD* md) : ctx_(EVP_MD_CTX_new(), EVP_MD_CTX_free) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), md, nullptr) != 1) throw Error("digest init failed");
  }
  void update(const void* data, std::size_t n) {
    if (n && EVP_DigestUpdate(ctx_.get(), data, n) != 1) throw Error("digest update failed");
  }
  std::string hex() {
    unsigned char out[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx_.get(), out, &len) != 1) throw Error("digest final failed");
    static const char* kHex = "0123456789abcdef";
    std::string s;
    for (unsigned int i = 0; i < len; ++i) {
      s += kHex[out[i] >> 4];
      s += kHex[out[i] & 15];
    }
    return s;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

}  // namespace

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  Digest d(EVP_sha256());
  d.update(bytes.data(), bytes.size());
  return d.hex();
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_file_bytes(path)); }

std::string git_blob_sha1(std::span<const std::uint8_t> bytes) {
  Digest d(EVP_sha1());
  const std::string header = "blob " + std::to_string(bytes.size());
  d.update(header.data(), header.size() + 1);  // includes the terminating NUL
  d.update(bytes.data(), bytes.size());
  return d.hex();
}

namespace nn {

template <class T>
std::string digest(const ParamStore<T>& store) {
  Digest d(EVP_sha256());
  for (const auto& p : store.entries()) {
    d.update(p.name.data(), p.name.size() + 1);
    for (int s : p.value.shape()) d.update(&s, sizeof s);
    d.update(p.value.data(), p.value.size() * sizeof(T));
  }
  return d.hex();
}

template std::string digest<float>(const ParamStore<float>&);
template std::string digest<double>(const ParamStore<double>&);

}  // namespace nn

}  // namespace sscgan
