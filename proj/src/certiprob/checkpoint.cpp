#include "certiprob/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <iterator>
#include <json.hpp>

#include "certiprob/error.hpp"

namespace certiprob {
namespace {

constexpr char kMagic[] = "CPRB1";
constexpr std::size_t kMagicLen = 5;


void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double d) { put_u64(out, std::bit_cast<std::uint64_t>(d)); }

class Reader {
 public:
  explicit Reader(const std::string& b) : bytes_(b) {}

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    require(bytes_.size() - pos_ >= n, ErrorCode::kFormat, "checkpoint: truncated payload");
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
  ckpt.spec.validate();
  check_parameters(ckpt.spec, ckpt.params);
  std::string json_text = ckpt.spec.to_json();
  if (!ckpt.provenance.empty()) {
    auto j = nlohmann::json::parse(json_text);
    j["provenance"] = nlohmann::json::parse(ckpt.provenance);
    json_text = j.dump();
  }
  std::string out(kMagic, kMagicLen);
  put_u64(out, json_text.size());
  out += json_text;
  put_u64(out, ckpt.params.tensors.size());
  for (const Tensor& t : ckpt.params.tensors) {
    put_u64(out, t.rank());
    for (auto d : t.shape()) put_u64(out, d);
    for (double v : t.data()) put_f64(out, v);
  }
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  require(bytes.size() >= kMagicLen && bytes.compare(0, kMagicLen, kMagic) == 0, ErrorCode::kFormat,
          "checkpoint: bad magic (expected CPRB1)");
  Reader r(bytes);
  r.str(kMagicLen);
  Checkpoint ck;
  const std::string json_text = r.str(r.u64());
  try {
    auto j = nlohmann::json::parse(json_text);
    if (j.contains("provenance")) {
      ck.provenance = j["provenance"].dump();
      j.erase("provenance");
    }
    ck.spec = ModelSpec::from_json(j.dump());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("checkpoint: ") + e.what());
  }
  const std::uint64_t count = r.u64();
  require(count < (1u << 20), ErrorCode::kFormat, "checkpoint: implausible tensor count");
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint64_t rank = r.u64();
    require(rank <= 8, ErrorCode::kFormat, "checkpoint: implausible tensor rank");
    Shape shape(rank);
    for (auto& d : shape) d = r.u64();
    std::vector<double> data(shape_numel(shape));
    for (double& v : data) v = r.f64();
    ck.params.tensors.emplace_back(std::move(shape), std::move(data));
  }
  require(r.done(), ErrorCode::kFormat, "checkpoint: trailing bytes");
  check_parameters(ck.spec, ck.params);
  return ck;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  const std::string bytes = encode_checkpoint(ckpt);
  std::ofstream f(path, std::ios::binary);
  require(f.good(), ErrorCode::kIo, "cannot open '" + path + "' for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  require(f.good(), ErrorCode::kIo, "write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), ErrorCode::kIo, "cannot open checkpoint '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  try {
    return decode_checkpoint(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

}  // namespace certiprob
