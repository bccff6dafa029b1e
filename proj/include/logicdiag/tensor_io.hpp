#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "logicdiag/error.hpp"

namespace logicdiag {

// LDT1 tensor files:
//
//   offset  size        field
//   0       4           magic "LDT1"
//   4       1           dtype code (1 = float32, 2 = int32, 3 = u8 boolean)
//   5       1           ndim
//   6       8 * ndim    dims, u64 little-endian
//   ...                 row-major payload, little-endian elements
//
// The payload must be exactly prod(dims) elements long.
enum class DType : std::uint8_t { Float32 = 1, Int32 = 2, Bool8 = 3 };

std::size_t dtype_size(DType t);

class TensorFormatError : public DataError {
public:
    enum class Kind { BadMagic, BadDtype, DimMismatch, Truncated, Io };

    TensorFormatError(Kind kind, const std::string& msg) : DataError(msg), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

struct Tensor {
    using Data = std::variant<std::vector<float>, std::vector<std::int32_t>, std::vector<std::uint8_t>>;

    std::vector<std::uint64_t> dims;
    Data data;

    DType dtype() const;
    std::size_t num_elements() const;

    static Tensor f32(std::vector<std::uint64_t> dims, std::vector<float> values);
    static Tensor i32(std::vector<std::uint64_t> dims, std::vector<std::int32_t> values);
    static Tensor u8(std::vector<std::uint64_t> dims, std::vector<std::uint8_t> values);
};

std::vector<std::uint8_t> encode_tensor(const Tensor& t);
Tensor decode_tensor(const std::vector<std::uint8_t>& bytes);

void write_tensor(const std::string& path, const Tensor& t);
Tensor read_tensor_file(const std::string& path);

}  // namespace logicdiag
