#include "oed/policy_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <ostream>

#include "oed/csv.hpp"
#include "oed/errors.hpp"
#include "oed/summary.hpp"

namespace oed {

namespace {

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int k = 0; k < 4; ++k) buf.push_back(static_cast<unsigned char>(v >> (8 * k)));
  }
  void u64(std::uint64_t v) {
    for (int k = 0; k < 8; ++k) buf.push_back(static_cast<unsigned char>(v >> (8 * k)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    buf.insert(buf.end(), c, c + n);
  }
  std::vector<unsigned char> buf;
};

class Reader {
 public:
  explicit Reader(std::span<const unsigned char> b) : b_(b) {}
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(b_[pos_++]) << (8 * k);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(b_[pos_++]) << (8 * k);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::span<const unsigned char> take(std::size_t n) {
    need(n);
    auto s = b_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > b_.size()) throw FormatError("policy file truncated");
  }
  std::span<const unsigned char> b_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint64_t fnv1a64(std::span<const unsigned char> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::vector<unsigned char> encode_policy(const PolicyTable& p) {
  if (p.table.size() != p.steps * static_cast<std::size_t>(p.grid.size()))
    throw std::invalid_argument("encode_policy: table size does not match steps x cells");
  Writer w;
  w.bytes("OEDP", 4);
  w.u32(kPolicyFormatVersion);
  w.u32(static_cast<std::uint32_t>(p.model.size()));
  w.bytes(p.model.data(), p.model.size());
  w.u32(static_cast<std::uint32_t>(p.grid.dim()));
  for (const auto& a : p.grid.axes()) {
    w.f64(a.lo);
    w.f64(a.hi);
    w.u32(static_cast<std::uint32_t>(a.n));
  }
  w.f64(p.dt);
  w.u32(static_cast<std::uint32_t>(p.controls.size()));
  for (double u : p.controls.values()) w.f64(u);
  w.u32(static_cast<std::uint32_t>(p.prior.size()));
  for (double t : p.prior.theta()) w.f64(t);
  for (double q : p.prior.weights()) w.f64(q);
  w.u32(static_cast<std::uint32_t>(p.steps));
  w.bytes(p.table.data(), p.table.size());
  w.u64(fnv1a64(w.buf));
  return std::move(w.buf);
}

PolicyTable decode_policy(std::span<const unsigned char> bytes) {
  if (bytes.size() < 16) throw FormatError("policy file truncated");
  const auto payload = bytes.first(bytes.size() - 8);
  Reader tail(bytes.last(8));
  if (tail.u64() != fnv1a64(payload)) throw FormatError("policy file checksum mismatch");

  Reader r(payload);
  const auto magic = r.take(4);
  if (std::memcmp(magic.data(), "OEDP", 4) != 0) throw FormatError("not a policy file (bad magic)");
  if (const auto v = r.u32(); v != kPolicyFormatVersion)
    throw FormatError("unsupported policy format version " + std::to_string(v));
  PolicyTable p;
  const auto name = r.take(r.u32());
  p.model.assign(name.begin(), name.end());
  const std::uint32_t dim = r.u32();
  if (dim < 1 || dim > static_cast<std::uint32_t>(Grid::kMaxDim)) throw FormatError("policy file: bad grid dimension");
  std::vector<GridAxis> axes;
  for (std::uint32_t d = 0; d < dim; ++d) {
    GridAxis a;
    a.lo = r.f64();
    a.hi = r.f64();
    a.n = static_cast<int>(r.u32());
    axes.push_back(a);
  }
  try {
    p.grid = Grid(std::move(axes));
    p.dt = r.f64();
    std::vector<double> controls(r.u32());
    for (double& u : controls) u = r.f64();
    p.controls = ControlSet(std::move(controls));
    std::vector<double> theta(r.u32()), weights(theta.size());
    for (double& t : theta) t = r.f64();
    for (double& q : weights) q = r.f64();
    p.prior = PriorGrid(std::move(theta), std::move(weights));
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("policy file: ") + e.what());
  }
  p.steps = r.u32();
  const auto table = r.take(p.steps * static_cast<std::size_t>(p.grid.size()));
  p.table.assign(table.begin(), table.end());
  if (r.pos() != payload.size()) throw FormatError("policy file: trailing bytes");
  for (std::uint8_t k : p.table)
    if (k >= p.controls.size()) throw FormatError("policy file: control index out of range");
  return p;
}

void save_policy(const PolicyTable& policy, const std::string& path) {
  const auto bytes = encode_policy(policy);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("write failed for '" + path + "'");
}

PolicyTable load_policy(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "'");
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_policy(bytes);
}

void check_policy_matches(const PolicyTable& policy, const std::string& model, const Grid& grid) {
  if (policy.model != model) throw FormatError("policy was built for model '" + policy.model + "', not '" + model + "'");
  if (!(policy.grid == grid)) throw FormatError("policy grid differs from the configured grid");
}

void describe_policy(const PolicyTable& p, std::ostream& os) {
  os << "model: " << p.model << '\n';
  os << "format version: " << kPolicyFormatVersion << '\n';
  for (int d = 0; d < p.grid.dim(); ++d) {
    const auto& a = p.grid.axis(d);
    os << "axis " << d << ": lo = " << format_shortest(a.lo) << ", hi = " << format_shortest(a.hi) << ", n = " << a.n
       << ", h = " << format_shortest(a.spacing()) << '\n';
  }
  os << "cells: " << p.grid.size() << '\n';
  os << "dt: " << format_shortest(p.dt) << '\n';
  os << "steps: " << p.steps << " (horizon " << format_shortest(p.horizon()) << ")\n";
  os << "controls:";
  for (double u : p.controls.values()) os << ' ' << format_shortest(u);
  os << "\nprior:";
  for (std::size_t k = 0; k < p.prior.size(); ++k)
    os << ' ' << format_shortest(p.prior.theta()[k]) << '(' << format_significant(p.prior.weights()[k]) << ')';
  os << '\n';
}

}  // namespace oed
