#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace cplab {

/// Incremental SHA-256, used to pin frozen model parameters and checkpoint
/// payloads. Hex digests compare as plain strings.
class Sha256 {
public:
    Sha256();
    ~Sha256();
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    void update(const void* data, size_t len);
    void update(std::span<const std::uint8_t> bytes) { update(bytes.data(), bytes.size()); }
    void update(const std::string& s) { update(s.data(), s.size()); }

    template <typename S>
    void update_values(std::span<const S> values) {
        update(values.data(), values.size() * sizeof(S));
    }

    /// Finalizes and returns the lowercase hex digest; the object is spent.
    std::string hex();

private:
    void* ctx_;
};

std::string sha256_hex(const void* data, size_t len);
std::string sha256_hex(const std::string& s);

}  // namespace cplab
