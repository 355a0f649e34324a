#include "slidemil/mil/checkpoint.hpp"

#include "slidemil/common/binary.hpp"
#include "slidemil/common/files.hpp"

namespace slidemil::mil {

namespace {
constexpr std::string_view kMagic = "MILCKPT";
constexpr std::uint32_t kVersion = 1;
}  // namespace

std::vector<unsigned char> encode_checkpoint(const MilModelParams& params) {
  validate(params);
  ByteWriter w;
  w.bytes(kMagic);
  w.u32(kVersion);
  w.u64(params.input_dim);
  w.u64(params.attention_dim);
  w.u8(params.has_instance_classifier() ? 1 : 0);
  for (const Matrix* t : params.tensors()) {
    w.u64(t->rows());
    w.u64(t->cols());
    for (double v : t->values()) w.f64(v);
  }
  return w.take();
}

MilModelParams decode_checkpoint(std::span<const unsigned char> bytes) {
  ByteReader r(bytes);
  if (r.remaining() < kMagic.size() || r.bytes(kMagic.size()) != kMagic)
    throw InputError("not a model checkpoint (bad magic)");
  if (std::uint32_t v = r.u32(); v != kVersion)
    throw InputError("unsupported checkpoint version " + std::to_string(v));
  const std::uint64_t d = r.u64();
  const std::uint64_t l = r.u64();
  const bool inst = r.u8() != 0;
  if (d == 0 || d > (1u << 24) || l < 2 || l % 2 != 0 || l > (1u << 16))
    throw InputError("checkpoint has invalid dimensions");

  MilModelParams p = MilModelParams::initialize(d, l, inst, 0);
  for (Matrix* t : p.tensors()) {
    const std::uint64_t rows = r.u64();
    const std::uint64_t cols = r.u64();
    if (rows != t->rows() || cols != t->cols()) throw InputError("checkpoint tensor shape mismatch");
    for (double& v : t->values()) v = r.f64();
  }
  if (r.remaining() != 0) throw InputError("trailing bytes after checkpoint payload");
  validate(p);
  return p;
}

void write_checkpoint(const std::filesystem::path& path, const MilModelParams& params) {
  write_file_atomic(path, encode_checkpoint(params));
}

MilModelParams read_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file_bytes(path));
}

}  // namespace slidemil::mil
