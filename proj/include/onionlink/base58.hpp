#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace onionlink {

// A validated base58check payment address. The decoded form is a version
// byte plus a 20-byte payload plus a 4-byte double-SHA256 checksum.
enum class AddressVersion : uint8_t {
    p2pkh = 0x00, // leading '1'
    p2sh = 0x05,  // leading '3'
};

struct Address {
    std::string raw;
    AddressVersion version = AddressVersion::p2pkh;

    bool operator==(const Address&) const = default;
};

enum class AddressError {
    none,
    bad_alphabet,
    bad_length,
    bad_version,
    bad_checksum,
};

const char* to_string(AddressError e);

struct AddressCheck {
    AddressError error = AddressError::none;
    Address address;

    bool ok() const { return error == AddressError::none; }
};

// Checks a candidate string against the full base58check contract:
// alphabet, 26-35 char length decoding to exactly 25 bytes, version byte
// consistent with the leading '1'/'3', and the 4-byte checksum.
AddressCheck validate_address(std::string_view candidate);

bool is_base58_char(char c);

// The 58-character alphabet in digit-value order.
std::string_view base58_alphabet();

// Raw base58 big-integer codec. decode returns false on a non-alphabet char.
std::string base58_encode(std::span<const uint8_t> bytes);
bool base58_decode(std::string_view s, std::vector<uint8_t>& out);

// version byte + 20-byte payload -> checksummed address string
std::string base58check_encode(uint8_t version, std::span<const uint8_t> payload20);

std::array<uint8_t, 32> sha256(std::span<const uint8_t> data);
std::array<uint8_t, 32> sha256d(std::span<const uint8_t> data);

} // namespace onionlink
