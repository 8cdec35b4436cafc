#pragma once

// Framing shared by the EMB1, SAE1 and CRD1 files:
//   4-byte magic | u32 little-endian header length L | L bytes UTF-8 JSON | payload

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace steerlens::container {

struct Framed {
    std::string header;  // JSON text
    std::string payload; // raw bytes following the header
};

Framed read_framed(const std::filesystem::path& path, std::string_view magic);
void write_framed(const std::filesystem::path& path, std::string_view magic,
                  std::string_view header, std::string_view payload);

// Byte-wise little-endian encoding, independent of host byte order.
void append_f32_le(std::string& out, float value);
void append_f32_le(std::string& out, std::span<const float> values);
void append_u32_le(std::string& out, std::uint32_t value);
float load_f32_le(const char* bytes);
std::uint32_t load_u32_le(const char* bytes);

// Decodes `count` floats from payload starting at byte `offset`.
std::vector<float> decode_f32_le(std::string_view payload, std::size_t offset, std::size_t count);

} // namespace steerlens::container
