#include "slidemil/bagio/bag.hpp"

#include <charconv>
#include <sstream>
#include <unordered_map>

#include "slidemil/common/binary.hpp"
#include "slidemil/common/files.hpp"

namespace slidemil::bagio {

namespace {
constexpr std::string_view kMagic = "FBAG";
constexpr char kVersion = '1';
constexpr std::uint8_t kUnlabeled = 255;
}  // namespace

std::string to_string(Label label) { return label == Label::effective ? "effective" : "invalid"; }

Label parse_label(const std::string& text) {
  if (text == "effective" || text == "1") return Label::effective;
  if (text == "invalid" || text == "0") return Label::invalid;
  throw InputError("unknown label '" + text + "' (expected effective/invalid/1/0)");
}

void validate(const FeatureBag& bag) {
  if (bag.size() == 0) throw InputError("bag '" + bag.slide_id + "' has no regions");
  if (bag.dim() == 0) throw InputError("bag '" + bag.slide_id + "' has zero feature dimension");
  if (bag.coords.size() != bag.size())
    throw InputError("bag '" + bag.slide_id + "' has " + std::to_string(bag.coords.size()) + " coords for " +
                          std::to_string(bag.size()) + " regions");
  if (!bag.features.all_finite()) throw InputError("bag '" + bag.slide_id + "' has non-finite features");
}

std::vector<unsigned char> encode_bag(const FeatureBag& bag) {
  validate(bag);
  ByteWriter w;
  w.bytes(kMagic);
  w.u8(kVersion);
  w.str32(bag.slide_id);
  w.str32(bag.patient_id);
  w.u8(bag.label ? static_cast<std::uint8_t>(*bag.label) : kUnlabeled);
  w.u64(bag.size());
  w.u64(bag.dim());
  for (const auto& c : bag.coords) {
    w.i64(c.x);
    w.i64(c.y);
    w.i64(c.region_size);
  }
  for (double v : bag.features.values()) w.f32(static_cast<float>(v));
  return w.take();
}

FeatureBag decode_bag(std::span<const unsigned char> bytes) {
  try {
    ByteReader r(bytes);
    if (r.remaining() < kMagic.size() + 1) throw BagIoError(BagErrorCode::truncated, "bag file shorter than header");
    if (r.bytes(kMagic.size()) != kMagic) throw BagIoError(BagErrorCode::bad_magic, "not a feature bag (bad magic)");
    if (const char v = static_cast<char>(r.u8()); v != kVersion)
      throw BagIoError(BagErrorCode::version_mismatch, std::string("unsupported bag version '") + v + "'");

    FeatureBag bag;
    bag.slide_id = r.str32();
    bag.patient_id = r.str32();
    const std::uint8_t label = r.u8();
    if (label == kUnlabeled)
      bag.label.reset();
    else if (label <= 1)
      bag.label = static_cast<Label>(label);
    else
      throw BagIoError(BagErrorCode::malformed, "bad label byte " + std::to_string(label));

    const std::uint64_t n = r.u64();
    const std::uint64_t d = r.u64();
    if (n == 0 || d == 0) throw BagIoError(BagErrorCode::malformed, "bag declares zero regions or dimensions");
    std::uint64_t cells = 0, feature_bytes = 0, coord_bytes = 0, payload = 0;
    if (__builtin_mul_overflow(n, d, &cells) || __builtin_mul_overflow(cells, 4, &feature_bytes) ||
        __builtin_mul_overflow(n, 24, &coord_bytes) || __builtin_add_overflow(feature_bytes, coord_bytes, &payload))
      throw BagIoError(BagErrorCode::size_overflow, "bag dimensions overflow (N=" + std::to_string(n) +
                                                        ", D=" + std::to_string(d) + ")");
    if (payload > r.remaining()) throw BagIoError(BagErrorCode::truncated, "bag payload truncated");

    bag.coords.resize(n);
    for (auto& c : bag.coords) {
      c.x = r.i64();
      c.y = r.i64();
      c.region_size = r.i64();
    }
    bag.features = nn::Matrix(n, d);
    for (double& v : bag.features.values()) v = static_cast<double>(r.f32());
    if (r.remaining() != 0) throw BagIoError(BagErrorCode::malformed, "trailing bytes after bag payload");
    return bag;
  } catch (const TruncatedError& e) {
    throw BagIoError(BagErrorCode::truncated, std::string("bag file truncated: ") + e.what());
  }
}

void write_bag(const std::filesystem::path& path, const FeatureBag& bag) { write_file_atomic(path, encode_bag(bag)); }

FeatureBag read_bag(const std::filesystem::path& path) {
  try {
    return decode_bag(read_file_bytes(path));
  } catch (const BagIoError& e) {
    throw BagIoError(e.code(), path.string() + ": " + e.what());
  }
}

namespace {

template <typename T>
T parse_field(const std::string& s, std::size_t line, const char* what) {
  T v{};
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw InputError("csv line " + std::to_string(line) + ": bad " + what + " '" + s + "'");
  return v;
}

}  // namespace

std::vector<FeatureBag> import_csv(const std::string& text, std::int64_t region_size) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw InputError("feature csv is empty");
  const auto header = split_csv_line(line);
  if (header.size() < 6 || header[0] != "slide_id" || header[1] != "patient_id" || header[2] != "label" ||
      header[3] != "x" || header[4] != "y")
    throw InputError("feature csv header must start with slide_id,patient_id,label,x,y and name >= 1 feature column");
  const std::size_t d = header.size() - 5;

  std::vector<FeatureBag> bags;
  std::vector<std::vector<double>> rows;
  std::unordered_map<std::string, std::size_t> index;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size())
      throw InputError("csv line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                       " fields, got " + std::to_string(f.size()));
    std::optional<Label> label;
    if (!f[2].empty()) label = parse_label(f[2]);

    auto [it, inserted] = index.try_emplace(f[0], bags.size());
    if (inserted) {
      bags.push_back({f[0], f[1], label, {}, {}});
      rows.emplace_back();
    }
    FeatureBag& bag = bags[it->second];
    if (bag.patient_id != f[1] || bag.label != label)
      throw InputError("csv line " + std::to_string(line_no) + ": slide '" + f[0] +
                       "' changes patient or label between rows");
    bag.coords.push_back({parse_field<std::int64_t>(f[3], line_no, "x"), parse_field<std::int64_t>(f[4], line_no, "y"),
                          region_size});
    auto& values = rows[it->second];
    for (std::size_t j = 0; j < d; ++j) values.push_back(parse_field<double>(f[5 + j], line_no, "feature"));
  }
  for (std::size_t i = 0; i < bags.size(); ++i) {
    bags[i].features = nn::Matrix(bags[i].coords.size(), d, std::move(rows[i]));
    validate(bags[i]);
  }
  return bags;
}

}  // namespace slidemil::bagio
