#pragma once

// MARF binary array format:
//   "MARF" | version u8 | dtype u8 (0 = f32, 1 = f64) | rank u8 |
//   rank x u32 extents (LE) | values (LE)

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "mar/core/error.hpp"
#include "mar/tensor/tensor.hpp"

namespace mar::marf {

inline constexpr std::array<char, 4> kMagic = {'M', 'A', 'R', 'F'};
inline constexpr std::uint8_t kVersion = 1;

enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

static_assert(std::endian::native == std::endian::little, "MARF I/O assumes a little-endian host");

struct Array {
    ad::Shape shape;
    DType dtype = DType::f64;
    std::vector<double> values;
};

template <typename T>
constexpr DType dtype_of() {
    static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
    return std::is_same_v<T, float> ? DType::f32 : DType::f64;
}

template <typename T>
std::string encode(const ad::Shape& shape, std::span<const T> values) {
    if (ad::numel(shape) != values.size()) throw UsageError("MARF: shape does not match value count");
    if (shape.size() > 255) throw UsageError("MARF: rank above 255");
    std::string out(kMagic.begin(), kMagic.end());
    out.push_back(static_cast<char>(kVersion));
    out.push_back(static_cast<char>(dtype_of<T>()));
    out.push_back(static_cast<char>(shape.size()));
    for (auto extent : shape) {
        if (extent > 0xffffffffULL) throw UsageError("MARF: extent exceeds u32");
        const auto e = static_cast<std::uint32_t>(extent);
        out.append(reinterpret_cast<const char*>(&e), sizeof e);
    }
    out.append(reinterpret_cast<const char*>(values.data()), values.size() * sizeof(T));
    return out;
}

inline Array decode(std::string_view bytes) {
    auto fail = [](const std::string& why) { return ConfigError("MARF: " + why); };
    if (bytes.size() < 7 || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) throw fail("bad magic");
    if (static_cast<std::uint8_t>(bytes[4]) != kVersion) throw fail("unsupported version");
    const auto dtype_byte = static_cast<std::uint8_t>(bytes[5]);
    if (dtype_byte > 1) throw fail("unknown dtype");
    const std::size_t rank = static_cast<std::uint8_t>(bytes[6]);
    std::size_t pos = 7;
    if (bytes.size() < pos + 4 * rank) throw fail("truncated header");
    Array arr;
    arr.dtype = static_cast<DType>(dtype_byte);
    for (std::size_t i = 0; i < rank; ++i) {
        std::uint32_t e;
        std::memcpy(&e, bytes.data() + pos, sizeof e);
        arr.shape.push_back(e);
        pos += 4;
    }
    const std::size_t count = ad::numel(arr.shape);
    const std::size_t width = arr.dtype == DType::f32 ? 4 : 8;
    if (bytes.size() != pos + count * width) throw fail("payload size does not match shape");
    arr.values.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        if (arr.dtype == DType::f32) {
            float f;
            std::memcpy(&f, bytes.data() + pos + i * 4, 4);
            arr.values[i] = f;
        } else {
            std::memcpy(&arr.values[i], bytes.data() + pos + i * 8, 8);
        }
    }
    return arr;
}

/// Writes to a temporary sibling then renames, so readers never see a partial file.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!os) throw std::runtime_error("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot open " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

template <typename T>
void save(const std::filesystem::path& path, const ad::Shape& shape, std::span<const T> values) {
    write_file_atomic(path, encode<T>(shape, values));
}

template <typename T>
void save(const std::filesystem::path& path, const ad::Tensor<T>& t) {
    save<T>(path, t.shape(), t.data());
}

inline Array load(const std::filesystem::path& path) { return decode(read_file(path)); }

template <typename T>
ad::Tensor<T> load_tensor(const std::filesystem::path& path, bool requires_grad = false) {
    auto arr = load(path);
    std::vector<T> v(arr.values.begin(), arr.values.end());
    return ad::Tensor<T>(arr.shape, std::move(v), requires_grad);
}

}  // namespace mar::marf
