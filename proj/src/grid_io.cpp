#include "tge/grid_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace tge {

namespace {

constexpr char kMagic[4] = {'T', 'G', 'R', '1'};
constexpr uint16_t kVersion = 1;

void put_u16(std::string& out, uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint16_t get_u16(const unsigned char* p) {
    return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

uint32_t get_u32(const unsigned char* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

[[noreturn]] void format_error(const std::filesystem::path& path, std::size_t offset,
                               const std::string& what) {
    throw Error(ErrorKind::format,
                path.string() + ": " + what + " at byte offset " + std::to_string(offset));
}

}  // namespace

void save_grid(const TokenGrid& grid, const std::filesystem::path& path) {
    if (grid.tag().size() > 0xffff) {
        throw Error(ErrorKind::input, "grid tag longer than 65535 bytes");
    }
    std::string header;
    header.append(kMagic, 4);
    put_u16(header, kVersion);
    put_u32(header, grid.rows());
    put_u32(header, grid.cols());
    put_u32(header, grid.dim());
    put_u16(header, static_cast<uint16_t>(grid.tag().size()));
    header.append(grid.tag());

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorKind::io, "cannot open " + path.string() + " for writing");
    }
    out.write(header.data(), static_cast<std::streamsize>(header.size()));

    std::string payload;
    payload.reserve(grid.data().size() * 4);
    for (float f : grid.data()) {
        const uint32_t bits = std::bit_cast<uint32_t>(f);
        put_u32(payload, bits);
    }
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) {
        throw Error(ErrorKind::io, "write failed for " + path.string());
    }
}

TokenGrid load_grid(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::io, "cannot open " + path.string());
    }
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    const std::size_t size = bytes.size();

    if (size < 4 || std::memcmp(p, kMagic, 4) != 0) {
        format_error(path, 0, "bad magic (expected \"TGR1\")");
    }
    if (size < 6) format_error(path, 4, "truncated header: missing version");
    const uint16_t version = get_u16(p + 4);
    if (version != kVersion) {
        format_error(path, 4, "unsupported version " + std::to_string(version));
    }
    if (size < 20) format_error(path, size, "truncated header");
    const uint32_t rows = get_u32(p + 6);
    const uint32_t cols = get_u32(p + 10);
    const uint32_t dim = get_u32(p + 14);
    if (rows == 0 || cols == 0 || dim == 0) {
        format_error(path, 6, "rows, cols and dim must be positive");
    }
    const uint16_t tag_len = get_u16(p + 18);
    if (size < 20u + tag_len) format_error(path, 20, "truncated tag");
    std::string tag(bytes.data() + 20, tag_len);

    const std::size_t payload_offset = 20u + tag_len;
    const std::size_t expected_floats = static_cast<std::size_t>(rows) * cols * dim;
    const std::size_t available = size - payload_offset;
    if (available < expected_floats * 4) {
        format_error(path, payload_offset + available,
                     "truncated payload: header declares " + std::to_string(expected_floats) +
                         " floats (" + std::to_string(expected_floats * 4) + " bytes), found " +
                         std::to_string(available) + " bytes");
    }

    std::vector<float> data(expected_floats);
    const unsigned char* q = p + payload_offset;
    for (std::size_t i = 0; i < expected_floats; ++i, q += 4) {
        const float f = std::bit_cast<float>(get_u32(q));
        if (!std::isfinite(f)) {
            format_error(path, payload_offset + i * 4, "non-finite component");
        }
        data[i] = f;
    }
    return TokenGrid(rows, cols, dim, std::move(data), std::move(tag));
}

}  // namespace tge
