#include <bfekf/filter.hpp>

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <istream>
#include <ostream>

namespace bfekf {

namespace {

constexpr std::array<char, 8> kMagic = {'B', 'F', 'E', 'K', 'F', 'S', 'N', '1'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <class T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  } else {
    return v;
  }
}

template <class T>
void put(std::ostream& out, T v) {
  v = to_little(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  T v;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw Error("snapshot is truncated");
  return to_little(v);
}

void put_matrix(std::ostream& out, const Mat& m) {
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) put(out, m(i, j));
  }
}

Mat get_matrix(std::istream& in, Index rows, Index cols) {
  Mat m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = get<double>(in);
  }
  return m;
}

}  // namespace

void write_snapshot(std::ostream& out, const FilterState& state, std::uint64_t outputs) {
  state.check_shapes();
  out.write(kMagic.data(), kMagic.size());
  put(out, kVersion);
  put(out, static_cast<std::uint64_t>(state.state_dim()));
  put(out, static_cast<std::uint64_t>(state.weight_count()));
  put(out, outputs);
  for (Index i = 0; i < state.x.size(); ++i) put(out, state.x(i));
  for (Index i = 0; i < state.theta.size(); ++i) put(out, state.theta(i));
  put_matrix(out, state.Px);
  put_matrix(out, state.Pxt);
  put_matrix(out, state.Ptt);
  if (!out) throw Error("snapshot write failed");
}

FilterState read_snapshot(std::istream& in, std::uint64_t* outputs) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) throw Error("not a filter snapshot");
  if (get<std::uint32_t>(in) != kVersion) throw Error("unsupported snapshot version");
  const auto nx = get<std::uint64_t>(in);
  const auto nw = get<std::uint64_t>(in);
  const auto J = get<std::uint64_t>(in);
  // Guards against allocating from a corrupt header.
  if (nx > (1u << 20) || nw > (1u << 24)) throw Error("snapshot dimensions are implausible");
  if (outputs) *outputs = J;
  FilterState s;
  s.x.resize(static_cast<Index>(nx));
  for (Index i = 0; i < s.x.size(); ++i) s.x(i) = get<double>(in);
  s.theta.resize(static_cast<Index>(nw));
  for (Index i = 0; i < s.theta.size(); ++i) s.theta(i) = get<double>(in);
  s.Px = get_matrix(in, static_cast<Index>(nx), static_cast<Index>(nx));
  s.Pxt = get_matrix(in, static_cast<Index>(nx), static_cast<Index>(nw));
  s.Ptt = get_matrix(in, static_cast<Index>(nw), static_cast<Index>(nw));
  return s;
}

}  // namespace bfekf
