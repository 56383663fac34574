#pragma once

#include <string>

#include "omnivid/tensor.hpp"

namespace omnivid {

// TOMN container: magic "TOMN", format version u16 LE, rank u8, dims u32 LE,
// then row-major little-endian payload. Version 1 carries float32 payloads;
// version 2 carries u8 payloads (validity / boolean masks).
void tomn_write(const std::string& path, const Tensor<float>& t);
void tomn_write_u8(const std::string& path, const Tensor<uint8_t>& t);
Tensor<float> tomn_read(const std::string& path);
Tensor<uint8_t> tomn_read_u8(const std::string& path);

}  // namespace omnivid
