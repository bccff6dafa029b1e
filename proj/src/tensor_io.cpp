#include "logicdiag/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace logicdiag {

namespace {

constexpr char kMagic[4] = {'L', 'D', 'T', '1'};
constexpr std::size_t kMaxDims = 16;

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_u64(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

std::uint32_t get_u32(const std::uint8_t* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
}

std::size_t product(const std::vector<std::uint64_t>& dims) {
    std::uint64_t n = 1;
    for (auto d : dims) {
        if (d != 0 && n > UINT64_MAX / d) {
            throw TensorFormatError(TensorFormatError::Kind::DimMismatch, "tensor dims overflow");
        }
        n *= d;
    }
    return static_cast<std::size_t>(n);
}

}  // namespace

std::size_t dtype_size(DType t) {
    switch (t) {
        case DType::Float32:
        case DType::Int32:
            return 4;
        case DType::Bool8:
            return 1;
    }
    return 0;
}

DType Tensor::dtype() const {
    switch (data.index()) {
        case 0:
            return DType::Float32;
        case 1:
            return DType::Int32;
        default:
            return DType::Bool8;
    }
}

std::size_t Tensor::num_elements() const {
    return std::visit([](const auto& v) { return v.size(); }, data);
}

Tensor Tensor::f32(std::vector<std::uint64_t> dims, std::vector<float> values) {
    return Tensor{std::move(dims), std::move(values)};
}

Tensor Tensor::i32(std::vector<std::uint64_t> dims, std::vector<std::int32_t> values) {
    return Tensor{std::move(dims), std::move(values)};
}

Tensor Tensor::u8(std::vector<std::uint64_t> dims, std::vector<std::uint8_t> values) {
    return Tensor{std::move(dims), std::move(values)};
}

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
    if (t.dims.size() > kMaxDims) {
        throw TensorFormatError(TensorFormatError::Kind::DimMismatch, "too many tensor dims");
    }
    if (product(t.dims) != t.num_elements()) {
        throw TensorFormatError(TensorFormatError::Kind::DimMismatch,
                                "tensor dims describe " + std::to_string(product(t.dims)) + " elements but " +
                                    std::to_string(t.num_elements()) + " are present");
    }
    std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
    out.push_back(static_cast<std::uint8_t>(t.dtype()));
    out.push_back(static_cast<std::uint8_t>(t.dims.size()));
    for (auto d : t.dims) put_u64(out, d);
    out.reserve(out.size() + t.num_elements() * dtype_size(t.dtype()));
    std::visit(
        [&](const auto& values) {
            using T = typename std::decay_t<decltype(values)>::value_type;
            for (T v : values) {
                if constexpr (std::is_same_v<T, float>) {
                    put_u32(out, std::bit_cast<std::uint32_t>(v));
                } else if constexpr (std::is_same_v<T, std::int32_t>) {
                    put_u32(out, static_cast<std::uint32_t>(v));
                } else {
                    out.push_back(v);
                }
            }
        },
        t.data);
    return out;
}

Tensor decode_tensor(const std::vector<std::uint8_t>& bytes) {
    using Kind = TensorFormatError::Kind;
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw TensorFormatError(Kind::BadMagic, "not an LDT1 tensor file (bad magic bytes)");
    }
    if (bytes.size() < 6) {
        throw TensorFormatError(Kind::Truncated, "tensor header truncated after magic bytes");
    }
    const auto code = bytes[4];
    if (code < 1 || code > 3) {
        throw TensorFormatError(Kind::BadDtype, "unknown tensor dtype code " + std::to_string(code));
    }
    const auto dtype = static_cast<DType>(code);
    const std::size_t ndim = bytes[5];
    if (ndim > kMaxDims) {
        throw TensorFormatError(Kind::DimMismatch, "tensor declares " + std::to_string(ndim) + " dims");
    }
    const std::size_t header = 6 + 8 * ndim;
    if (bytes.size() < header) {
        throw TensorFormatError(Kind::Truncated, "tensor header truncated: dims need " + std::to_string(header) +
                                                     " bytes, file has " + std::to_string(bytes.size()));
    }
    Tensor t;
    for (std::size_t i = 0; i < ndim; ++i) t.dims.push_back(get_u64(bytes.data() + 6 + 8 * i));

    const std::size_t n = product(t.dims);
    const std::size_t elem = dtype_size(dtype);
    const std::size_t available = bytes.size() - header;
    if (n > available / elem) {
        throw TensorFormatError(Kind::Truncated, "tensor payload truncated: dims declare " + std::to_string(n) +
                                                     " elements, payload holds " +
                                                     std::to_string(available / elem));
    }
    if (n * elem != available) {
        throw TensorFormatError(Kind::DimMismatch, "tensor payload has " + std::to_string(available - n * elem) +
                                                       " trailing bytes beyond the declared dims");
    }
    const std::uint8_t* p = bytes.data() + header;
    switch (dtype) {
        case DType::Float32: {
            std::vector<float> v(n);
            for (std::size_t i = 0; i < n; ++i) v[i] = std::bit_cast<float>(get_u32(p + 4 * i));
            t.data = std::move(v);
            break;
        }
        case DType::Int32: {
            std::vector<std::int32_t> v(n);
            for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<std::int32_t>(get_u32(p + 4 * i));
            t.data = std::move(v);
            break;
        }
        case DType::Bool8:
            t.data = std::vector<std::uint8_t>(p, p + n);
            break;
    }
    return t;
}

void write_tensor(const std::string& path, const Tensor& t) {
    const auto bytes = encode_tensor(t);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw TensorFormatError(TensorFormatError::Kind::Io, "cannot open " + path + " for writing");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw TensorFormatError(TensorFormatError::Kind::Io, "failed writing " + path);
    }
}

Tensor read_tensor_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw TensorFormatError(TensorFormatError::Kind::Io, "cannot open tensor file " + path);
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_tensor(bytes);
}

}  // namespace logicdiag
