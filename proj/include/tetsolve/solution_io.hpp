#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "tetsolve/io_util.hpp"
#include "tetsolve/vector_batch.hpp"

namespace tetsolve {

/// Solution vector file: 8 text header lines then the raw 64-bit array in
/// (node, axis, batch) order, batch innermost, little endian.
inline void write_solution(const VectorBatch64& u, const std::string& path) {
  atomic_write(path, [&](std::ostream& os) {
    os << "TSVEC 1\n";
    os << "nodes " << u.n_nodes << "\n";
    os << "axes 3\n";
    os << "batch " << u.batch << "\n";
    os << "precision float64\n";
    os << "endian little\n";
    os << "order node_axis_batch\n";
    os << "DATA\n";
    os.write(reinterpret_cast<const char*>(u.data.data()),
             static_cast<std::streamsize>(u.data.size() * sizeof(double)));
  });
}

inline VectorBatch64 read_solution(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open solution file: " + path);
  std::string line;
  long lineno = 0;
  auto expect = [&](const std::string& what) {
    if (!std::getline(is, line)) throw ParseError(path, lineno + 1, "unexpected end of file");
    ++lineno;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key != what) throw ParseError(path, lineno, "expected '" + what + "' header line");
    return ls;
  };
  {
    auto ls = expect("TSVEC");
    int ver = 0;
    ls >> ver;
    if (ver != 1) throw ParseError(path, lineno, "unsupported version");
  }
  int64_t nodes = -1, batch = -1;
  expect("nodes") >> nodes;
  {
    auto ls = expect("axes");
    int axes = 0;
    ls >> axes;
    if (axes != 3) throw ParseError(path, lineno, "expected 3 axes");
  }
  expect("batch") >> batch;
  {
    auto ls = expect("precision");
    std::string p;
    ls >> p;
    if (p != "float64") throw ParseError(path, lineno, "expected float64 precision");
  }
  {
    auto ls = expect("endian");
    std::string e;
    ls >> e;
    if (e != "little") throw ParseError(path, lineno, "expected little endian");
  }
  {
    auto ls = expect("order");
    std::string o;
    ls >> o;
    if (o != "node_axis_batch") throw ParseError(path, lineno, "unexpected layout order");
  }
  expect("DATA");
  if (nodes < 0 || batch < 1) throw ParseError(path, lineno, "bad dimensions");
  VectorBatch64 u(static_cast<int32_t>(nodes), static_cast<int32_t>(batch));
  is.read(reinterpret_cast<char*>(u.data.data()),
          static_cast<std::streamsize>(u.data.size() * sizeof(double)));
  if (is.gcount() != static_cast<std::streamsize>(u.data.size() * sizeof(double)))
    throw ParseError(path, lineno + 1, "truncated binary payload");
  return u;
}

} // namespace tetsolve
