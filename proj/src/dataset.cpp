#include "optree/dataset.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace optree {

Transform Transform::identity(int p) {
  Transform tf;
  tf.scale.assign(static_cast<size_t>(p), 1.0);
  tf.offset.assign(static_cast<size_t>(p), 0.0);
  return tf;
}

void Transform::to_unit(const double* raw, double* unit) const {
  for (size_t j = 0; j < scale.size(); ++j) unit[j] = raw[j] * scale[j] + offset[j];
}

void Transform::to_data(const double* unit, double* raw) const {
  for (size_t j = 0; j < scale.size(); ++j) raw[j] = (unit[j] - offset[j]) / scale[j];
}

double Transform::log_jacobian() const {
  double s = 0.0;
  for (double v : scale) s += std::log(v);
  return s;
}

SampleSet::SampleSet(std::vector<double> unit, int n, int p, Transform tf)
    : n_(n), p_(p), unit_(std::move(unit)), tf_(std::move(tf)) {}

namespace {

void check_finite(const std::vector<double>& raw, int n, int p) {
  if (n < 1 || p < 1) throw DataError("ingest: empty input (need n >= 1, p >= 1)");
  if (raw.size() != static_cast<size_t>(n) * static_cast<size_t>(p))
    throw DataError("ingest: matrix size does not match n*p");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) {
      double v = raw[static_cast<size_t>(i) * p + j];
      if (!std::isfinite(v))
        throw DataError("ingest: non-finite entry at row " + std::to_string(i + 1) +
                        ", column " + std::to_string(j + 1));
    }
}

}  // namespace

SampleSet SampleSet::ingest(const std::vector<double>& raw, int n, int p) {
  check_finite(raw, n, p);
  std::vector<double> lo(static_cast<size_t>(p), std::numeric_limits<double>::infinity());
  std::vector<double> hi(static_cast<size_t>(p), -std::numeric_limits<double>::infinity());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) {
      double v = raw[static_cast<size_t>(i) * p + j];
      lo[static_cast<size_t>(j)] = std::min(lo[static_cast<size_t>(j)], v);
      hi[static_cast<size_t>(j)] = std::max(hi[static_cast<size_t>(j)], v);
    }
  for (int j = 0; j < p; ++j) {
    if (lo[static_cast<size_t>(j)] == hi[static_cast<size_t>(j)]) {
      // Degenerate column: pad to a tiny symmetric width.
      double v = lo[static_cast<size_t>(j)];
      double w = 1e-9 * std::max(1.0, std::abs(v));
      lo[static_cast<size_t>(j)] = v - 0.5 * w;
      hi[static_cast<size_t>(j)] = v + 0.5 * w;
    }
  }
  return ingest_with_box(raw, n, p, lo, hi);
}

SampleSet SampleSet::ingest_with_box(const std::vector<double>& raw, int n, int p,
                                     const std::vector<double>& lo,
                                     const std::vector<double>& hi) {
  check_finite(raw, n, p);
  if (lo.size() != static_cast<size_t>(p) || hi.size() != static_cast<size_t>(p))
    throw ConfigError("ingest: bounding box dimension mismatch");
  Transform tf;
  tf.scale.resize(static_cast<size_t>(p));
  tf.offset.resize(static_cast<size_t>(p));
  for (int j = 0; j < p; ++j) {
    double w = hi[static_cast<size_t>(j)] - lo[static_cast<size_t>(j)];
    if (!(w > 0.0)) throw ConfigError("ingest: bounding box has nonpositive width in column " +
                                      std::to_string(j + 1));
    tf.scale[static_cast<size_t>(j)] = 1.0 / w;
    tf.offset[static_cast<size_t>(j)] = -lo[static_cast<size_t>(j)] / w;
  }
  std::vector<double> unit(raw.size());
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) {
      double u = raw[static_cast<size_t>(i) * p + j] * tf.scale[static_cast<size_t>(j)] +
                 tf.offset[static_cast<size_t>(j)];
      if (u < 0.0 || u > 1.0) {
        // Clamp pure rounding noise; reject anything real.
        if (u < -1e-12 || u > 1.0 + 1e-12)
          throw DataError("ingest: sample at row " + std::to_string(i + 1) +
                          " falls outside the bounding box in column " + std::to_string(j + 1));
        u = std::min(1.0, std::max(0.0, u));
      }
      unit[static_cast<size_t>(i) * p + j] = u;
    }
  }
  return SampleSet(std::move(unit), n, p, std::move(tf));
}

std::vector<int> SampleSet::all_indices() const {
  std::vector<int> idx(static_cast<size_t>(n_));
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

std::vector<SplitCounts> count_children(const Region& region, const std::vector<int>& members,
                                        const SampleSet& samples) {
  const int p = region.dim();
  if (samples.dim() != p) throw InternalError("count_children: dimension mismatch");
  std::vector<double> mid(static_cast<size_t>(p));
  for (int j = 0; j < p; ++j) mid[static_cast<size_t>(j)] = region.mid(j);
  std::vector<SplitCounts> out(static_cast<size_t>(p));
  for (int i : members) {
    const double* x = samples.row(i);
    if (!region.contains(x))
      throw InternalError("count_children: member " + std::to_string(i) +
                          " lies outside region " + region.encode());
    for (int j = 0; j < p; ++j) {
      // Midpoint goes right: left child is the strict lower half.
      int side = x[j] < mid[static_cast<size_t>(j)] ? 0 : 1;
      auto& sc = out[static_cast<size_t>(j)];
      ++sc.count[static_cast<size_t>(side)];
      sc.members[static_cast<size_t>(side)].push_back(i);
    }
  }
  return out;
}

CsvMatrix read_csv(const std::string& path, char delimiter) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open input file: " + path);
  CsvMatrix m;
  std::string line;
  int lineno = 0;
  bool first_content = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, delimiter)) fields.push_back(field);
    if (!line.empty() && line.back() == delimiter) fields.push_back("");
    if (first_content) {
      // Header detection: any field that fails numeric parse.
      bool numeric = true;
      for (const auto& f : fields) {
        size_t pos = 0;
        try {
          std::stod(f, &pos);
        } catch (...) {
          numeric = false;
          break;
        }
        if (pos != f.size()) {
          numeric = false;
          break;
        }
      }
      m.cols = static_cast<int>(fields.size());
      first_content = false;
      if (!numeric) {
        m.header = fields;
        continue;
      }
    }
    if (static_cast<int>(fields.size()) != m.cols)
      throw ParseError(path + ":" + std::to_string(lineno) + ": expected " +
                       std::to_string(m.cols) + " fields, got " + std::to_string(fields.size()));
    for (const auto& f : fields) {
      size_t pos = 0;
      double v;
      try {
        v = std::stod(f, &pos);
      } catch (...) {
        throw ParseError(path + ":" + std::to_string(lineno) + ": not a number: '" + f + "'");
      }
      if (pos != f.size())
        throw ParseError(path + ":" + std::to_string(lineno) + ": not a number: '" + f + "'");
      m.values.push_back(v);
    }
    ++m.rows;
  }
  if (m.rows == 0) throw DataError(path + ": no data rows");
  return m;
}

void write_csv(const std::string& path, const std::vector<double>& values, int rows, int cols,
               const std::vector<std::string>& header, char delimiter) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open output file: " + path);
  out.precision(17);
  if (!header.empty()) {
    for (size_t j = 0; j < header.size(); ++j) {
      if (j > 0) out << delimiter;
      out << header[j];
    }
    out << '\n';
  }
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      if (j > 0) out << delimiter;
      out << values[static_cast<size_t>(i) * cols + j];
    }
    out << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

}  // namespace optree
