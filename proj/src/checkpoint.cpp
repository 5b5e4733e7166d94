#include <cstring>
#include <fstream>
#include <sstream>

#include "memdep/tensor/tensor.hpp"
#include "memdep/util/common.hpp"

namespace memdep::tensor {

namespace {

std::string shape_token(const Tensor& t) {
  std::string s;
  for (size_t i = 0; i < t.shape().size(); ++i) {
    if (i) s += 'x';
    s += std::to_string(t.shape()[i]);
  }
  return s;
}

std::vector<int> parse_shape_token(std::string_view s) {
  std::vector<int> shape;
  for (const auto& part : memdep::split(s, 'x'))
    shape.push_back(static_cast<int>(memdep::parse_int(part)));
  return shape;
}

void put_f32_le(std::string& out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  out.push_back(static_cast<char>(bits & 0xff));
  out.push_back(static_cast<char>((bits >> 8) & 0xff));
  out.push_back(static_cast<char>((bits >> 16) & 0xff));
  out.push_back(static_cast<char>((bits >> 24) & 0xff));
}

float get_f32_le(const std::string& data, size_t off) {
  uint32_t bits = (static_cast<uint32_t>(static_cast<unsigned char>(data[off]))) |
                  (static_cast<uint32_t>(static_cast<unsigned char>(data[off + 1])) << 8) |
                  (static_cast<uint32_t>(static_cast<unsigned char>(data[off + 2])) << 16) |
                  (static_cast<uint32_t>(static_cast<unsigned char>(data[off + 3])) << 24);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& base, const ParamStore& params) {
  std::string manifest, payload;
  for (const auto& name : params.names()) {
    const Tensor& t = params.get(name);
    manifest += name;
    manifest += ' ';
    manifest += shape_token(t);
    manifest += '\n';
    for (int64_t i = 0; i < t.numel(); ++i) put_f32_le(payload, static_cast<float>(t.at(i)));
  }
  memdep::write_file(base + ".manifest", manifest);
  memdep::write_file(base + ".bin", payload);
}

void load_checkpoint(const std::string& base, ParamStore& params) {
  std::string manifest = memdep::read_file(base + ".manifest");
  std::string payload = memdep::read_file(base + ".bin");
  size_t off = 0;
  for (const auto& raw : memdep::split(manifest, '\n')) {
    std::string_view line = memdep::trim(raw);
    if (line.empty()) continue;
    auto fields = memdep::split(line, ' ');
    if (fields.size() != 2)
      throw std::runtime_error("checkpoint manifest: bad line: " + std::string(line));
    if (!params.has(fields[0]))
      throw std::runtime_error("checkpoint manifest: unknown parameter " + fields[0]);
    Tensor& t = params.get(fields[0]);
    auto shape = parse_shape_token(fields[1]);
    if (shape != t.shape())
      throw std::runtime_error("checkpoint manifest: shape mismatch for " + fields[0]);
    if (off + 4 * static_cast<size_t>(t.numel()) > payload.size())
      throw std::runtime_error("checkpoint payload truncated");
    for (int64_t i = 0; i < t.numel(); ++i) {
      t.at(i) = static_cast<double>(get_f32_le(payload, off));
      off += 4;
    }
  }
  if (off != payload.size()) throw std::runtime_error("checkpoint payload has trailing bytes");
}

}  // namespace memdep::tensor
