#include "steerlens/container.hpp"

#include "steerlens/error.hpp"

#include <bit>
#include <fstream>
#include <iterator>

namespace steerlens::container {

void append_u32_le(std::string& out, std::uint32_t value) {
    for (int shift = 0; shift < 32; shift += 8) {
        out.push_back(static_cast<char>((value >> shift) & 0xFFu));
    }
}

void append_f32_le(std::string& out, float value) {
    append_u32_le(out, std::bit_cast<std::uint32_t>(value));
}

void append_f32_le(std::string& out, std::span<const float> values) {
    out.reserve(out.size() + values.size() * 4);
    for (float v : values) {
        append_f32_le(out, v);
    }
}

std::uint32_t load_u32_le(const char* bytes) {
    std::uint32_t value = 0;
    for (int i = 0; i < 4; ++i) {
        value |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[i])) << (8 * i);
    }
    return value;
}

float load_f32_le(const char* bytes) {
    return std::bit_cast<float>(load_u32_le(bytes));
}

std::vector<float> decode_f32_le(std::string_view payload, std::size_t offset, std::size_t count) {
    if (offset + count * 4 > payload.size()) {
        throw Error(ErrorCode::DimMismatch, "payload too short for declared tensor shape");
    }
    std::vector<float> values(count);
    for (std::size_t i = 0; i < count; ++i) {
        values[i] = load_f32_le(payload.data() + offset + 4 * i);
    }
    return values;
}

Framed read_framed(const std::filesystem::path& path, std::string_view magic) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
    }
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) {
        throw Error(ErrorCode::IoFailure, "read failed: " + path.string());
    }
    if (bytes.size() < magic.size() || std::string_view(bytes).substr(0, magic.size()) != magic) {
        throw Error(ErrorCode::BadMagic,
                    path.string() + ": expected magic \"" + std::string(magic) + "\"");
    }
    const std::size_t prefix = magic.size() + 4;
    if (bytes.size() < prefix) {
        throw Error(ErrorCode::MalformedHeader, path.string() + ": truncated header length");
    }
    const std::uint32_t header_len = load_u32_le(bytes.data() + magic.size());
    if (bytes.size() - prefix < header_len) {
        throw Error(ErrorCode::MalformedHeader, path.string() + ": truncated JSON header");
    }
    Framed framed;
    framed.header = bytes.substr(prefix, header_len);
    framed.payload = bytes.substr(prefix + header_len);
    return framed;
}

void write_framed(const std::filesystem::path& path, std::string_view magic,
                  std::string_view header, std::string_view payload) {
    if (header.size() > UINT32_MAX) {
        throw Error(ErrorCode::IoFailure, "header too large");
    }
    std::string prefix(magic);
    append_u32_le(prefix, static_cast<std::uint32_t>(header.size()));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorCode::IoFailure, "cannot open for writing: " + path.string());
    }
    out.write(prefix.data(), static_cast<std::streamsize>(prefix.size()));
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    out.flush();
    if (!out) {
        throw Error(ErrorCode::IoFailure, "write failed: " + path.string());
    }
}

} // namespace steerlens::container
