// Little-endian scalar I/O for snapshot and checkpoint files.

#ifndef DRIFTMOE_BINARY_IO_HPP
#define DRIFTMOE_BINARY_IO_HPP

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace driftmoe::binio {

inline void write_u64(std::ostream& out, std::uint64_t v) {
    char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out.write(bytes, 8);
}

inline void write_f64(std::ostream& out, double v) { write_u64(out, std::bit_cast<std::uint64_t>(v)); }

inline void write_string(std::ostream& out, const std::string& s) {
    write_u64(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::uint64_t read_u64(std::istream& in) {
    unsigned char bytes[8];
    if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw std::runtime_error("binary read: unexpected end of input");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    return v;
}

inline double read_f64(std::istream& in) { return std::bit_cast<double>(read_u64(in)); }

inline std::string read_string(std::istream& in, std::uint64_t max_len = 1u << 30) {
    const std::uint64_t n = read_u64(in);
    if (n > max_len) throw std::runtime_error("binary read: string too long");
    std::string s(n, '\0');
    if (!in.read(s.data(), static_cast<std::streamsize>(n))) {
        throw std::runtime_error("binary read: unexpected end of input");
    }
    return s;
}

inline void expect_magic(std::istream& in, std::uint64_t magic, const char* what) {
    if (read_u64(in) != magic) throw std::runtime_error(std::string(what) + ": bad magic number");
}

}  // namespace driftmoe::binio

#endif  // DRIFTMOE_BINARY_IO_HPP
