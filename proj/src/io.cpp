#include "histlearn/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace histlearn::io {

namespace {

std::string join_ranges(const std::vector<std::int64_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct Metadata {
  int dims = 0;
  std::vector<std::int64_t> domain;
  std::vector<std::int64_t> padded;
  std::int64_t total = -1;
};

[[noreturn]] void parse_fail(const std::string& path, std::int64_t lineno,
                             const std::string& what) {
  throw std::runtime_error(path + " line " + std::to_string(lineno) + ": " + what);
}

std::vector<std::int64_t> parse_int_list(const std::string& s) {
  std::vector<std::int64_t> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const std::size_t c = s.find(',', pos);
    const std::string tok = s.substr(pos, c == std::string::npos ? std::string::npos : c - pos);
    std::size_t used = 0;
    out.push_back(std::stoll(tok, &used));
    if (used != tok.size()) throw std::invalid_argument("bad integer: " + tok);
    if (c == std::string::npos) break;
    pos = c + 1;
  }
  return out;
}

Metadata parse_metadata(const std::string& path, const std::string& line) {
  if (line.empty() || line[0] != '#') {
    throw std::runtime_error(path + ": missing metadata line");
  }
  Metadata md;
  std::istringstream ss(line.substr(1));
  std::string tok;
  while (ss >> tok) {
    const std::size_t eq = tok.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = tok.substr(0, eq);
    const std::string value = tok.substr(eq + 1);
    try {
      if (key == "dims") {
        md.dims = static_cast<int>(std::stoll(value));
      } else if (key == "domain") {
        md.domain = parse_int_list(value);
      } else if (key == "padded") {
        md.padded = parse_int_list(value);
      } else if (key == "total") {
        md.total = std::stoll(value);
      }
    } catch (const std::exception&) {
      throw std::runtime_error(path + ": bad metadata field " + tok);
    }
  }
  if (md.dims <= 0 || static_cast<int>(md.domain.size()) != md.dims) {
    throw std::runtime_error(path + ": metadata needs dims and a matching domain list");
  }
  return md;
}

struct CsvReader {
  std::ifstream in;
  std::string path;
  std::int64_t lineno = 0;

  explicit CsvReader(const std::string& p) : in(p), path(p) {
    if (!in) throw std::runtime_error("cannot open " + p);
  }

  Metadata metadata() {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
    ++lineno;
    return parse_metadata(path, line);
  }

  /// Next data row split on commas; false at end of file.
  bool row(std::vector<std::string>& fields) {
    std::string line;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty() || line[0] == '#') continue;
      fields.clear();
      std::size_t pos = 0;
      while (pos <= line.size()) {
        const std::size_t c = line.find(',', pos);
        fields.push_back(
            line.substr(pos, c == std::string::npos ? std::string::npos : c - pos));
        if (c == std::string::npos) break;
        pos = c + 1;
      }
      return true;
    }
    return false;
  }

  std::int64_t as_int(const std::string& tok) {
    try {
      std::size_t used = 0;
      const std::int64_t v = std::stoll(tok, &used);
      if (used != tok.size()) parse_fail(path, lineno, "bad integer '" + tok + "'");
      return v;
    } catch (const std::runtime_error&) {
      throw;
    } catch (const std::exception&) {
      parse_fail(path, lineno, "bad integer '" + tok + "'");
    }
  }

  double as_double(const std::string& tok) {
    try {
      std::size_t used = 0;
      const double v = std::stod(tok, &used);
      if (used != tok.size()) parse_fail(path, lineno, "bad number '" + tok + "'");
      return v;
    } catch (const std::runtime_error&) {
      throw;
    } catch (const std::exception&) {
      parse_fail(path, lineno, "bad number '" + tok + "'");
    }
  }
};

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

void finish(std::ofstream& out, const std::string& path) {
  out.close();
  if (!out) throw std::runtime_error("write failed: " + path);
}

RangeQuery row_query(CsvReader& r, const std::vector<std::string>& f, int d) {
  std::vector<Interval> bounds(d);
  for (int i = 0; i < d; ++i) {
    bounds[i] = {r.as_int(f[2 * i]), r.as_int(f[2 * i + 1])};
  }
  return RangeQuery(std::move(bounds));
}

}  // namespace

void write_dataset(const std::string& path, const FrequencyTensor& freq) {
  std::ofstream out = open_out(path);
  const auto& dom = freq.domain();
  out << "# dims=" << dom.dims() << " domain=" << join_ranges(dom.ranges)
      << " total=" << freq.total() << '\n';
  const auto counts = freq.counts();
  const int d = dom.dims();
  std::vector<std::int64_t> cur(d, 1);
  for (std::int64_t flat = 0; flat < static_cast<std::int64_t>(counts.size()); ++flat) {
    if (counts[flat] != 0) {
      for (int i = 0; i < d; ++i) out << cur[i] << ',';
      out << counts[flat] << '\n';
    }
    int axis = d - 1;
    while (axis >= 0 && cur[axis] == dom.ranges[axis]) {
      cur[axis] = 1;
      --axis;
    }
    if (axis >= 0) ++cur[axis];
  }
  finish(out, path);
}

FrequencyTensor read_dataset(const std::string& path) {
  CsvReader r(path);
  const Metadata md = r.metadata();
  FrequencyTensor freq(AttributeDomain{md.domain});
  std::vector<std::string> f;
  std::vector<std::int64_t> cell(md.dims);
  while (r.row(f)) {
    if (static_cast<int>(f.size()) != md.dims + 1) {
      parse_fail(path, r.lineno, "expected " + std::to_string(md.dims + 1) + " columns");
    }
    for (int i = 0; i < md.dims; ++i) cell[i] = r.as_int(f[i]);
    freq.add(cell, r.as_int(f[md.dims]));
  }
  if (md.total >= 0 && freq.total() != md.total) {
    throw std::runtime_error(path + ": total does not match the metadata line");
  }
  return freq;
}

void write_queries(const std::string& path, const AttributeDomain& dom,
                   std::span<const RangeQuery> queries) {
  std::ofstream out = open_out(path);
  out << "# dims=" << dom.dims() << " domain=" << join_ranges(dom.ranges) << '\n';
  for (const RangeQuery& q : queries) {
    for (int i = 0; i < dom.dims(); ++i) {
      out << q.bounds[i].lo << ',' << q.bounds[i].hi;
      out << (i + 1 < dom.dims() ? ',' : '\n');
    }
  }
  finish(out, path);
}

std::pair<AttributeDomain, std::vector<RangeQuery>> read_queries(const std::string& path) {
  CsvReader r(path);
  const Metadata md = r.metadata();
  const AttributeDomain dom{md.domain};
  std::vector<RangeQuery> queries;
  std::vector<std::string> f;
  while (r.row(f)) {
    const int n = static_cast<int>(f.size());
    if (n != 2 * md.dims && n != 2 * md.dims + 1) {
      parse_fail(path, r.lineno, "expected " + std::to_string(2 * md.dims) + " columns");
    }
    RangeQuery q = row_query(r, f, md.dims);
    q.check_within(dom);
    queries.push_back(std::move(q));
  }
  return {dom, std::move(queries)};
}

void write_qfrs(const std::string& path, const AttributeDomain& dom,
                std::span<const QueryFeedbackRecord> qfrs) {
  std::ofstream out = open_out(path);
  out << "# dims=" << dom.dims() << " domain=" << join_ranges(dom.ranges) << '\n';
  for (const QueryFeedbackRecord& rec : qfrs) {
    for (int i = 0; i < dom.dims(); ++i) {
      out << rec.query.bounds[i].lo << ',' << rec.query.bounds[i].hi << ',';
    }
    out << fmt_double(rec.cardinality) << '\n';
  }
  finish(out, path);
}

std::pair<AttributeDomain, std::vector<QueryFeedbackRecord>> read_qfrs(
    const std::string& path) {
  CsvReader r(path);
  const Metadata md = r.metadata();
  const AttributeDomain dom{md.domain};
  std::vector<QueryFeedbackRecord> qfrs;
  std::vector<std::string> f;
  while (r.row(f)) {
    if (static_cast<int>(f.size()) != 2 * md.dims + 1) {
      parse_fail(path, r.lineno, "expected " + std::to_string(2 * md.dims + 1) + " columns");
    }
    QueryFeedbackRecord rec;
    rec.query = row_query(r, f, md.dims);
    rec.query.check_within(dom);
    rec.cardinality = r.as_double(f[2 * md.dims]);
    if (rec.cardinality < 0) parse_fail(path, r.lineno, "negative cardinality");
    qfrs.push_back(std::move(rec));
  }
  return {dom, std::move(qfrs)};
}

void write_histogram(const std::string& path, const BucketHistogram& h) {
  std::ofstream out = open_out(path);
  const auto& dom = h.domain();
  out << "# dims=" << dom.dims() << " domain=" << join_ranges(dom.ranges) << '\n';
  for (const Bucket& b : h.buckets()) {
    for (int i = 0; i < dom.dims(); ++i) {
      out << b.box.bounds[i].lo << ',' << b.box.bounds[i].hi << ',';
    }
    out << fmt_double(b.count) << '\n';
  }
  finish(out, path);
}

BucketHistogram read_histogram(const std::string& path) {
  CsvReader r(path);
  const Metadata md = r.metadata();
  const AttributeDomain dom{md.domain};
  std::vector<Bucket> buckets;
  std::vector<std::string> f;
  while (r.row(f)) {
    if (static_cast<int>(f.size()) != 2 * md.dims + 1) {
      parse_fail(path, r.lineno, "expected " + std::to_string(2 * md.dims + 1) + " columns");
    }
    Bucket b;
    b.box = row_query(r, f, md.dims);
    b.count = r.as_double(f[2 * md.dims]);
    buckets.push_back(std::move(b));
  }
  return BucketHistogram(dom, std::move(buckets));
}

void write_sketch(const std::string& path, const WaveletSketch& sk) {
  std::ofstream out = open_out(path);
  const auto& dom = sk.domain();
  out << "# dims=" << dom.dims() << " domain=" << join_ranges(dom.ranges)
      << " padded=" << join_ranges(sk.padded().padded) << '\n';
  for (const SketchEntry& e : sk.entries()) {
    out << e.index << ',' << fmt_double(e.value) << '\n';
  }
  finish(out, path);
}

WaveletSketch read_sketch(const std::string& path) {
  CsvReader r(path);
  const Metadata md = r.metadata();
  const AttributeDomain dom{md.domain};
  std::vector<SketchEntry> entries;
  std::vector<std::string> f;
  while (r.row(f)) {
    if (f.size() != 2) parse_fail(path, r.lineno, "expected index,value");
    entries.push_back({r.as_int(f[0]), r.as_double(f[1])});
  }
  WaveletSketch sk(dom, std::move(entries));
  if (!md.padded.empty() && md.padded != sk.padded().padded) {
    throw std::runtime_error(path + ": padded shape does not match the domain");
  }
  return sk;
}

void write_trajectory(const std::string& path,
                      std::span<const online::TrajectoryPoint> traj) {
  std::ofstream out = open_out(path);
  out << "step,avg_rel_error\n";
  for (const online::TrajectoryPoint& p : traj) {
    out << p.step << ',' << fmt_double(p.avg_rel_error) << '\n';
  }
  finish(out, path);
}

}  // namespace histlearn::io
