#pragma once
// Thin wrapper over OpenSSL EVP message digests.  The graph id scheme is
// parameterized by hash function; SHA-1 is the interoperable default and
// SHA-256 is available for stores that want longer ids.

#include <openssl/evp.h>

#include <memory>
#include <string>
#include <string_view>

#include "errors.hpp"

namespace prov {

struct HashSpec {
    std::string name;   // "sha1" or "sha256"
    size_t len = 0;     // digest size in bytes
};

inline const HashSpec& hash_spec(std::string_view name) {
    static const HashSpec sha1{"sha1", 20};
    static const HashSpec sha256{"sha256", 32};
    if (name == "sha1") return sha1;
    if (name == "sha256") return sha256;
    raise(Errc::invalid_argument, "unsupported hash function: " + std::string(name));
}

class Hasher {
public:
    explicit Hasher(const HashSpec& spec)
        : spec_(&spec), ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free) {
        const EVP_MD* md = spec.name == "sha1" ? EVP_sha1() : EVP_sha256();
        if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), md, nullptr) != 1)
            raise(Errc::io_failure, "digest init failed");
    }

    Hasher& update(std::string_view bytes) {
        if (EVP_DigestUpdate(ctx_.get(), bytes.data(), bytes.size()) != 1)
            raise(Errc::io_failure, "digest update failed");
        return *this;
    }

    // Finalizes and returns the raw digest bytes.
    std::string finish() {
        unsigned char buf[EVP_MAX_MD_SIZE];
        unsigned int n = 0;
        if (EVP_DigestFinal_ex(ctx_.get(), buf, &n) != 1)
            raise(Errc::io_failure, "digest final failed");
        if (n != spec_->len)
            raise(Errc::io_failure, "digest length mismatch");
        return std::string(reinterpret_cast<char*>(buf), n);
    }

private:
    const HashSpec* spec_;
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

inline std::string digest_bytes(const HashSpec& spec, std::string_view bytes) {
    Hasher h(spec);
    h.update(bytes);
    return h.finish();
}

} // namespace prov
