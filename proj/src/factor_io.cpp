#include "opfactor/factor_io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <vector>

namespace opfactor {

namespace {

constexpr char kMagic[8] = {'O', 'P', 'F', 'A', 'C', 'T', 'R', '1'};

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void write_array(std::ofstream& out, const T* data, size_t count) {
  out.write(reinterpret_cast<const char*>(data), sizeof(T) * count);
}

template <typename T>
T read_pod(std::ifstream& in, const std::string& path) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error("factor file '" + path + "' is truncated");
  return v;
}

template <typename T>
void read_array(std::ifstream& in, T* data, size_t count, const std::string& path) {
  in.read(reinterpret_cast<char*>(data), sizeof(T) * count);
  if (!in) throw Error("factor file '" + path + "' is truncated");
}

}  // namespace

void write_factor(const SparseFactor& factor, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out.write(kMagic, sizeof(kMagic));
  write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(factor.n));
  write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(factor.cols));
  write_pod<std::uint8_t>(out, factor.provenance.supernodal ? 1 : 0);
  write_pod<std::uint8_t>(out, factor.provenance.diagConsistent ? 1 : 0);
  const std::uint8_t pad[6] = {0, 0, 0, 0, 0, 0};
  write_array(out, pad, 6);
  write_pod<double>(out, factor.provenance.rho);
  write_pod<std::int64_t>(out, static_cast<std::int64_t>(factor.provenance.matvecs));

  std::vector<std::uint64_t> perm(factor.perm.begin(), factor.perm.end());
  write_array(out, perm.data(), perm.size());

  const auto* outer = factor.L.outerIndexPtr();
  const auto* inner = factor.L.innerIndexPtr();
  const auto* values = factor.L.valuePtr();
  std::vector<std::uint64_t> colptr(factor.cols + 1);
  for (Index c = 0; c <= factor.cols; ++c) colptr[c] = static_cast<std::uint64_t>(outer[c]);
  write_array(out, colptr.data(), colptr.size());
  const std::uint64_t nnz = colptr[factor.cols];
  std::vector<std::uint64_t> rowind(nnz);
  for (std::uint64_t e = 0; e < nnz; ++e) rowind[e] = static_cast<std::uint64_t>(inner[e]);
  write_array(out, rowind.data(), rowind.size());
  write_array(out, values, nnz);
  if (!out) throw Error("failed while writing '" + path + "'");
}

SparseFactor read_factor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open factor file '" + path + "'");
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw Error("'" + path + "' is not a factor container (bad magic)");

  SparseFactor factor;
  factor.n = static_cast<Index>(read_pod<std::uint64_t>(in, path));
  factor.cols = static_cast<Index>(read_pod<std::uint64_t>(in, path));
  factor.provenance.supernodal = read_pod<std::uint8_t>(in, path) != 0;
  factor.provenance.diagConsistent = read_pod<std::uint8_t>(in, path) != 0;
  std::uint8_t pad[6];
  read_array(in, pad, 6, path);
  factor.provenance.rho = read_pod<double>(in, path);
  factor.provenance.matvecs = static_cast<long>(read_pod<std::int64_t>(in, path));
  if (factor.n < 0 || factor.cols < 0 || factor.cols > factor.n)
    throw Error("factor file '" + path + "': inconsistent dimensions");

  std::vector<std::uint64_t> perm(factor.n);
  read_array(in, perm.data(), perm.size(), path);
  factor.perm.resize(factor.n);
  factor.pos.assign(factor.n, -1);
  for (Index p = 0; p < factor.n; ++p) {
    const Index b = static_cast<Index>(perm[p]);
    if (b < 0 || b >= factor.n || factor.pos[b] != -1)
      throw Error("factor file '" + path + "': ordering is not a permutation");
    factor.perm[p] = b;
    factor.pos[b] = p;
  }

  std::vector<std::uint64_t> colptr(factor.cols + 1);
  read_array(in, colptr.data(), colptr.size(), path);
  const std::uint64_t nnz = colptr[factor.cols];
  std::vector<std::uint64_t> rowind(nnz);
  read_array(in, rowind.data(), rowind.size(), path);
  std::vector<double> values(nnz);
  read_array(in, values.data(), values.size(), path);

  factor.L.resize(factor.n, factor.cols);
  factor.L.reserve(static_cast<Index>(nnz));
  for (Index c = 0; c < factor.cols; ++c) {
    if (colptr[c + 1] < colptr[c]) throw Error("factor file '" + path + "': bad column pointers");
    factor.L.startVec(c);
    Index prev = -1;
    for (std::uint64_t e = colptr[c]; e < colptr[c + 1]; ++e) {
      const Index r = static_cast<Index>(rowind[e]);
      if (r < 0 || r >= factor.n || r <= prev)
        throw Error("factor file '" + path + "': row indices out of range or unsorted");
      prev = r;
      factor.L.insertBack(r, c) = values[e];
    }
  }
  factor.L.finalize();
  factor.L.makeCompressed();

  factor.diag.setConstant(factor.cols, std::numeric_limits<double>::quiet_NaN());
  for (Index c = 0; c < factor.cols; ++c)
    for (SparseMatrix::InnerIterator it(factor.L, c); it; ++it)
      if (it.row() == c) factor.diag(c) = it.value();
  factor.finalize();
  return factor;
}

}  // namespace opfactor
