#include <istream>
#include <ostream>
#include <sstream>

#include "cvxrobust/conic.hpp"
#include "cvxrobust/error.hpp"

namespace cvxrobust::conic {

namespace {

void write_dense_as_sparse(std::ostream& out, const char* tag, const Eigen::VectorXd& v) {
  Index nnz = 0;
  for (Index i = 0; i < v.size(); ++i) nnz += v[i] != 0.0;
  out << tag << ' ' << nnz << '\n';
  for (Index i = 0; i < v.size(); ++i) {
    if (v[i] != 0.0) out << i << ' ' << v[i] << '\n';
  }
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::istringstream next_line() {
    std::string line;
    while (std::getline(in_, line)) {
      ++lineno_;
      if (line.empty() || line[0] == '#') continue;
      return std::istringstream(line);
    }
    throw ParseError("conic format: unexpected end of input", lineno_);
  }

  template <typename T>
  T keyed(const std::string& key) {
    auto ls = next_line();
    std::string k;
    T value{};
    if (!(ls >> k >> value) || k != key) {
      throw ParseError("conic format: expected '" + key + "' at line " + std::to_string(lineno_), lineno_);
    }
    return value;
  }

  std::size_t line() const { return lineno_; }

 private:
  std::istream& in_;
  std::size_t lineno_ = 0;
};

Eigen::VectorXd read_sparse_vector(Reader& r, const std::string& key, Index size) {
  const auto nnz = r.keyed<Index>(key);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(size);
  for (Index k = 0; k < nnz; ++k) {
    auto ls = r.next_line();
    Index i = 0;
    double value = 0.0;
    if (!(ls >> i >> value) || i < 0 || i >= size) {
      throw ParseError("conic format: bad '" + key + "' entry at line " + std::to_string(r.line()), r.line());
    }
    v[i] = value;
  }
  return v;
}

}  // namespace

void write_program(const ConicProgram& program, std::ostream& out) {
  program.validate();
  const auto old_precision = out.precision(17);
  out << "conic-program v1\n";
  out << "variables " << program.c.size() << '\n';
  out << "rows " << program.b.size() << '\n';
  out << "zero " << program.cones.zero << '\n';
  out << "nonneg " << program.cones.nonneg << '\n';
  out << "psd " << program.cones.psd.size();
  for (const Index s : program.cones.psd) out << ' ' << s;
  out << '\n';
  write_dense_as_sparse(out, "c", program.c);
  write_dense_as_sparse(out, "b", program.b);
  out << "A " << program.A.nonZeros() << '\n';
  for (Index j = 0; j < program.A.outerSize(); ++j) {
    for (SparseMatrix::InnerIterator it(program.A, j); it; ++it) {
      out << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
    }
  }
  out << "names " << program.variables.size() << '\n';
  for (const auto& [name, range] : program.variables) {
    out << name << ' ' << range.offset << ' ' << range.size << '\n';
  }
  out << "end\n";
  out.precision(old_precision);
}

ConicProgram read_program(std::istream& in) {
  Reader r(in);
  {
    auto ls = r.next_line();
    std::string magic, version;
    ls >> magic >> version;
    if (magic != "conic-program" || version != "v1") {
      throw ParseError("conic format: missing 'conic-program v1' header", r.line());
    }
  }
  ConicProgram prog;
  const auto n = r.keyed<Index>("variables");
  const auto m = r.keyed<Index>("rows");
  prog.cones.zero = r.keyed<Index>("zero");
  prog.cones.nonneg = r.keyed<Index>("nonneg");
  {
    auto ls = r.next_line();
    std::string key;
    Index count = 0;
    if (!(ls >> key >> count) || key != "psd") throw ParseError("conic format: expected 'psd'", r.line());
    for (Index k = 0; k < count; ++k) {
      Index s = 0;
      if (!(ls >> s)) throw ParseError("conic format: truncated psd list", r.line());
      prog.cones.psd.push_back(s);
    }
  }
  prog.c = read_sparse_vector(r, "c", n);
  prog.b = read_sparse_vector(r, "b", m);
  const auto nnz = r.keyed<Index>("A");
  std::vector<Eigen::Triplet<double, Index>> trip;
  trip.reserve(static_cast<std::size_t>(nnz));
  for (Index k = 0; k < nnz; ++k) {
    auto ls = r.next_line();
    Index i = 0, j = 0;
    double v = 0.0;
    if (!(ls >> i >> j >> v) || i < 0 || i >= m || j < 0 || j >= n) {
      throw ParseError("conic format: bad 'A' entry at line " + std::to_string(r.line()), r.line());
    }
    trip.emplace_back(i, j, v);
  }
  prog.A.resize(m, n);
  prog.A.setFromTriplets(trip.begin(), trip.end());
  prog.A.makeCompressed();
  const auto names = r.keyed<Index>("names");
  for (Index k = 0; k < names; ++k) {
    auto ls = r.next_line();
    std::string name;
    VariableRange range;
    if (!(ls >> name >> range.offset >> range.size)) {
      throw ParseError("conic format: bad 'names' entry", r.line());
    }
    prog.variables[name] = range;
  }
  prog.validate();
  return prog;
}

}  // namespace cvxrobust::conic
