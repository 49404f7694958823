#include "onionlink/base58.hpp"

#include "onionlink/errors.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cstring>

namespace onionlink {

namespace {

constexpr std::string_view k_alphabet =
    "123456789ABCDEFGHJKLMNPQRSTUVWXYZabcdefghijkmnopqrstuvwxyz";

// -1 for characters outside the alphabet, else the base58 digit value.
constexpr std::array<int8_t, 256> make_digit_table() {
    std::array<int8_t, 256> t{};
    for (auto& v : t) v = -1;
    for (size_t i = 0; i < k_alphabet.size(); ++i)
        t[static_cast<unsigned char>(k_alphabet[i])] = static_cast<int8_t>(i);
    return t;
}

constexpr std::array<int8_t, 256> k_digit = make_digit_table();

} // namespace

const char* to_string(AddressError e) {
    switch (e) {
    case AddressError::none: return "none";
    case AddressError::bad_alphabet: return "bad-alphabet";
    case AddressError::bad_length: return "bad-length";
    case AddressError::bad_version: return "bad-version";
    case AddressError::bad_checksum: return "bad-checksum";
    }
    throw InternalError("unknown AddressError");
}

bool is_base58_char(char c) {
    return k_digit[static_cast<unsigned char>(c)] >= 0;
}

std::string_view base58_alphabet() { return k_alphabet; }

std::array<uint8_t, 32> sha256(std::span<const uint8_t> data) {
    std::array<uint8_t, 32> out{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 ||
        len != out.size())
        throw InternalError("sha256 digest failed");
    return out;
}

std::array<uint8_t, 32> sha256d(std::span<const uint8_t> data) {
    auto first = sha256(data);
    return sha256(first);
}

std::string base58_encode(std::span<const uint8_t> bytes) {
    // Count leading zero bytes; each maps to a leading '1'.
    size_t zeros = 0;
    while (zeros < bytes.size() && bytes[zeros] == 0) ++zeros;

    // Big-integer base conversion, digits little-endian in `digits`.
    std::vector<uint8_t> digits;
    digits.reserve(bytes.size() * 138 / 100 + 1);
    for (size_t i = zeros; i < bytes.size(); ++i) {
        unsigned carry = bytes[i];
        for (auto& d : digits) {
            carry += static_cast<unsigned>(d) << 8;
            d = static_cast<uint8_t>(carry % 58);
            carry /= 58;
        }
        while (carry) {
            digits.push_back(static_cast<uint8_t>(carry % 58));
            carry /= 58;
        }
    }

    std::string out(zeros, '1');
    out.reserve(zeros + digits.size());
    for (auto it = digits.rbegin(); it != digits.rend(); ++it)
        out.push_back(k_alphabet[*it]);
    return out;
}

bool base58_decode(std::string_view s, std::vector<uint8_t>& out) {
    out.clear();

    size_t ones = 0;
    while (ones < s.size() && s[ones] == '1') ++ones;

    std::vector<uint8_t> bytes; // little-endian
    bytes.reserve(s.size() * 733 / 1000 + 1);
    for (size_t i = ones; i < s.size(); ++i) {
        int8_t digit = k_digit[static_cast<unsigned char>(s[i])];
        if (digit < 0) return false;
        unsigned carry = static_cast<unsigned>(digit);
        for (auto& b : bytes) {
            carry += static_cast<unsigned>(b) * 58;
            b = static_cast<uint8_t>(carry & 0xff);
            carry >>= 8;
        }
        while (carry) {
            bytes.push_back(static_cast<uint8_t>(carry & 0xff));
            carry >>= 8;
        }
    }
    // But leading '1's in the middle of the count above must still be
    // alphabet-checked for the degenerate all-'1' string: '1' is in the
    // alphabet, so nothing more to do.

    out.assign(ones, 0);
    out.insert(out.end(), bytes.rbegin(), bytes.rend());
    return true;
}

std::string base58check_encode(uint8_t version, std::span<const uint8_t> payload20) {
    if (payload20.size() != 20)
        throw InternalError("base58check payload must be 20 bytes");
    std::array<uint8_t, 25> full{};
    full[0] = version;
    std::memcpy(full.data() + 1, payload20.data(), 20);
    auto digest = sha256d(std::span<const uint8_t>(full.data(), 21));
    std::memcpy(full.data() + 21, digest.data(), 4);
    return base58_encode(full);
}

AddressCheck validate_address(std::string_view candidate) {
    AddressCheck result;

    // 1. Alphabet: every character must be a base58 digit.
    for (char c : candidate) {
        if (!is_base58_char(c)) {
            result.error = AddressError::bad_alphabet;
            return result;
        }
    }

    // 2. Length: 26-35 characters and the decode must give exactly 25 bytes.
    if (candidate.size() < 26 || candidate.size() > 35) {
        result.error = AddressError::bad_length;
        return result;
    }
    std::vector<uint8_t> bytes;
    if (!base58_decode(candidate, bytes)) {
        // unreachable after the alphabet pass, but keep the order honest
        result.error = AddressError::bad_alphabet;
        return result;
    }
    if (bytes.size() != 25) {
        result.error = AddressError::bad_length;
        return result;
    }

    // 3. Version byte, consistent with the leading character.
    uint8_t version = bytes[0];
    char lead = candidate.front();
    if (version == 0x00) {
        if (lead != '1') {
            result.error = AddressError::bad_version;
            return result;
        }
    } else if (version == 0x05) {
        if (lead != '3') {
            result.error = AddressError::bad_version;
            return result;
        }
    } else {
        result.error = AddressError::bad_version;
        return result;
    }

    // 4. Checksum: last 4 bytes == first 4 of sha256d(first 21 bytes).
    auto digest = sha256d(std::span<const uint8_t>(bytes.data(), 21));
    if (!std::equal(digest.begin(), digest.begin() + 4, bytes.begin() + 21)) {
        result.error = AddressError::bad_checksum;
        return result;
    }

    result.address.raw = std::string(candidate);
    result.address.version =
        version == 0x00 ? AddressVersion::p2pkh : AddressVersion::p2sh;
    return result;
}

} // namespace onionlink
