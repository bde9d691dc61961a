#include "cascadet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

namespace cascadet {

namespace {

void put_u32(std::vector<char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

class Reader {
 public:
  explicit Reader(const std::vector<char>& bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::string str(std::size_t n) {
    need(n);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw std::runtime_error("checkpoint truncated at byte " + std::to_string(pos_));
  }

  const std::vector<char>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<char> encode_checkpoint(const std::vector<ParamRecord>& params) {
  std::vector<char> out(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    if (static_cast<std::int64_t>(p.values.size()) != shape_numel(p.shape)) {
      throw std::invalid_argument("checkpoint record '" + p.name + "' has inconsistent shape");
    }
    put_u32(out, static_cast<std::uint32_t>(p.name.size()));
    out.insert(out.end(), p.name.begin(), p.name.end());
    put_u32(out, static_cast<std::uint32_t>(p.shape.size()));
    for (auto e : p.shape) put_u32(out, static_cast<std::uint32_t>(e));
    for (float v : p.values) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

std::vector<ParamRecord> decode_checkpoint(const std::vector<char>& bytes) {
  Reader in(bytes);
  if (in.str(sizeof(kCheckpointMagic)) != std::string(kCheckpointMagic, sizeof(kCheckpointMagic))) {
    throw std::runtime_error("not a checkpoint file (bad magic)");
  }
  const std::uint32_t version = in.u32();
  if (version != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t count = in.u32();
  std::vector<ParamRecord> params;
  params.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    ParamRecord rec;
    rec.name = in.str(in.u32());
    const std::uint32_t rank = in.u32();
    for (std::uint32_t d = 0; d < rank; ++d) rec.shape.push_back(in.u32());
    rec.values.resize(static_cast<std::size_t>(shape_numel(rec.shape)));
    for (auto& v : rec.values) v = std::bit_cast<float>(in.u32());
    params.push_back(std::move(rec));
  }
  if (!in.done()) throw std::runtime_error("trailing bytes after checkpoint records");
  return params;
}

void save_checkpoint(const std::filesystem::path& path, const std::vector<ParamRecord>& params) {
  const auto bytes = encode_checkpoint(params);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("short write to checkpoint " + path.string());
}

std::vector<ParamRecord> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_checkpoint(bytes);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

}  // namespace cascadet
