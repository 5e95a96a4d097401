#include "memshare/commanalysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "memshare/csv.hpp"
#include "memshare/errors.hpp"

namespace memshare::comm {

RecordedTraces record_traces(train::Model& model, const env::EnvConfig& ecfg,
                             std::uint64_t seed) {
  if (model.tcfg.algo != train::Algo::md_maddpg) {
    throw ConfigError("trace recording requires an md-maddpg checkpoint");
  }
  const int n = ecfg.n_agents;
  const int m = model.tcfg.memory_size;

  std::vector<std::vector<double>> writes(n), reads(n);
  train::RolloutOptions opts;
  opts.explore = false;
  opts.record_trace = true;
  opts.on_step = [&](const train::StepRecord& rec) {
    for (int i = 0; i < n; ++i) {
      const Vec& w = (*rec.writes)[i];
      const Vec& r = (*rec.reads)[i];
      writes[i].insert(writes[i].end(), w.begin(), w.end());
      reads[i].insert(reads[i].end(), r.begin(), r.end());
    }
  };

  env::Env env(ecfg);
  train::EpisodeResult ep = train::run_episode(model, env, seed, opts);
  std::vector<int> phases(ep.trace.rows.size());
  for (size_t t = 0; t < ep.trace.rows.size(); ++t) phases[t] = ep.trace.rows[t].phase;

  RecordedTraces out;
  out.episode = std::move(ep.trace);
  const int horizon = static_cast<int>(out.episode.rows.size());
  for (int i = 0; i < n; ++i) {
    TraceMatrix w;
    w.agent = i;
    w.kind = "write";
    w.t = horizon;
    w.m = m;
    w.data = std::move(writes[i]);
    w.task = ecfg.task;
    w.seed = seed;
    w.phases = phases;
    out.traces.push_back(std::move(w));
    TraceMatrix r;
    r.agent = i;
    r.kind = "read";
    r.t = horizon;
    r.m = m;
    r.data = std::move(reads[i]);
    r.task = ecfg.task;
    r.seed = seed;
    r.phases = phases;
    out.traces.push_back(std::move(r));
  }
  return out;
}

void jacobi_eigen_sym(std::vector<Vec> a, Vec& eigenvalues,
                      std::vector<Vec>& eigenvectors) {
  const int n = static_cast<int>(a.size());
  eigenvectors.assign(n, Vec(n, 0.0));
  for (int i = 0; i < n; ++i) eigenvectors[i][i] = 1.0;
  eigenvalues.assign(n, 0.0);
  if (n == 0) return;

  double scale = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) scale = std::max(scale, std::fabs(a[i][j]));
  if (scale == 0.0) scale = 1.0;
  const double tol = 1e-15 * scale;

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off = std::max(off, std::fabs(a[p][q]));
    if (off <= tol) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        if (std::fabs(a[p][q]) <= tol) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int i = 0; i < n; ++i) {
          const double aip = a[i][p];
          const double aiq = a[i][q];
          a[i][p] = c * aip - s * aiq;
          a[i][q] = s * aip + c * aiq;
        }
        for (int j = 0; j < n; ++j) {
          const double apj = a[p][j];
          const double aqj = a[q][j];
          a[p][j] = c * apj - s * aqj;
          a[q][j] = s * apj + c * aqj;
        }
        for (int i = 0; i < n; ++i) {
          const double vip = eigenvectors[i][p];
          const double viq = eigenvectors[i][q];
          eigenvectors[i][p] = c * vip - s * viq;
          eigenvectors[i][q] = s * vip + c * viq;
        }
      }
    }
  }

  // Columns of the accumulated rotation are the eigenvectors.
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  Vec diag(n);
  for (int i = 0; i < n; ++i) diag[i] = a[i][i];
  std::stable_sort(order.begin(), order.end(),
                   [&](int x, int y) { return diag[x] > diag[y]; });
  std::vector<Vec> sorted_vecs(n, Vec(n));
  for (int k = 0; k < n; ++k) {
    eigenvalues[k] = diag[order[k]];
    for (int i = 0; i < n; ++i) sorted_vecs[k][i] = eigenvectors[i][order[k]];
  }
  eigenvectors = std::move(sorted_vecs);
}

PcaResult pca(const TraceMatrix& trace, int k) {
  if (trace.t < 2) throw ConfigError("pca: need at least two samples");
  if (trace.m <= 0) throw ConfigError("pca: empty feature dimension");
  if (k <= 0) throw ConfigError("pca: k must be positive");
  const int t_dim = trace.t;
  const int m_dim = trace.m;
  k = std::min(k, m_dim);

  Vec mean(m_dim, 0.0);
  for (int t = 0; t < t_dim; ++t)
    for (int j = 0; j < m_dim; ++j) mean[j] += trace.at(t, j);
  for (double& v : mean) v /= static_cast<double>(t_dim);

  std::vector<Vec> centered(t_dim, Vec(m_dim));
  for (int t = 0; t < t_dim; ++t)
    for (int j = 0; j < m_dim; ++j) centered[t][j] = trace.at(t, j) - mean[j];

  std::vector<Vec> cov(m_dim, Vec(m_dim, 0.0));
  const double inv = 1.0 / static_cast<double>(t_dim - 1);
  for (int t = 0; t < t_dim; ++t) {
    for (int i = 0; i < m_dim; ++i) {
      const double ci = centered[t][i];
      if (ci == 0.0) continue;
      for (int j = i; j < m_dim; ++j) cov[i][j] += ci * centered[t][j];
    }
  }
  for (int i = 0; i < m_dim; ++i)
    for (int j = i; j < m_dim; ++j) {
      cov[i][j] *= inv;
      cov[j][i] = cov[i][j];
    }

  PcaResult out;
  out.k = k;
  double total = 0.0;
  for (int i = 0; i < m_dim; ++i) total += cov[i][i];
  if (total <= 0.0) {
    out.degenerate = true;
    return out;
  }

  Vec eigenvalues;
  std::vector<Vec> eigenvectors;
  jacobi_eigen_sym(cov, eigenvalues, eigenvectors);

  out.components.resize(k);
  out.scores.resize(k);
  out.ratios.resize(k);
  for (int c = 0; c < k; ++c) {
    Vec v = eigenvectors[c];
    // Largest-magnitude entry positive.
    int arg = 0;
    for (int j = 1; j < m_dim; ++j) {
      if (std::fabs(v[j]) > std::fabs(v[arg])) arg = j;
    }
    if (v[arg] < 0.0) {
      for (double& x : v) x = -x;
    }
    out.ratios[c] = std::max(0.0, eigenvalues[c]) / total;
    Vec score(t_dim, 0.0);
    for (int t = 0; t < t_dim; ++t) {
      double acc = 0.0;
      for (int j = 0; j < m_dim; ++j) acc += centered[t][j] * v[j];
      score[t] = acc;
    }
    out.components[c] = std::move(v);
    out.scores[c] = std::move(score);
  }
  return out;
}

void standardize01(std::vector<Vec>& scores) {
  for (Vec& s : scores) {
    if (s.empty()) continue;
    double lo = s[0];
    double hi = s[0];
    for (double v : s) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi - lo <= 0.0) {
      std::fill(s.begin(), s.end(), 0.5);
      continue;
    }
    for (double& v : s) v = (v - lo) / (hi - lo);
  }
}

namespace {

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

void color_of(double v, int& r, int& g, int& b) {
  v = std::clamp(v, 0.0, 1.0);
  if (v <= 0.5) {
    const double t = v / 0.5;
    r = static_cast<int>(std::lround(255.0 * t));
    g = static_cast<int>(std::lround(255.0 * t));
    b = 255;
  } else {
    const double t = (v - 0.5) / 0.5;
    r = 255;
    g = static_cast<int>(std::lround(255.0 * (1.0 - t)));
    b = static_cast<int>(std::lround(255.0 * (1.0 - t)));
  }
}

}  // namespace

std::string render_heatmap_svg(const HeatmapData& data) {
  const int k = static_cast<int>(data.scores.size());
  if (k == 0) throw ConfigError("heatmap: no score rows");
  const int t_dim = static_cast<int>(data.scores[0].size());
  for (const Vec& s : data.scores) {
    if (static_cast<int>(s.size()) != t_dim) {
      throw ConfigError("heatmap: ragged score rows");
    }
  }
  if (static_cast<int>(data.phases.size()) != t_dim) {
    throw ConfigError("heatmap: phase labels do not match score length");
  }

  const double cell_w = t_dim <= 200 ? 6.0 : 1200.0 / t_dim;
  const double row_h = 24.0;
  const double gap = 2.0;
  const double left = 46.0;
  const double top = 26.0;
  const double bar_h = 12.0;
  const double width = left + cell_w * t_dim + 10.0;
  const double height = top + k * (row_h + gap) + bar_h + 24.0;

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt2(width)
     << "\" height=\"" << fmt2(height) << "\">\n";
  os << "<desc>colormap: linear blue(0,0,255) to white(255,255,255) to "
        "red(255,0,0) over [0,1]; phase bar: greyscale, consecutive phases "
        "light to dark</desc>\n";
  os << "<text x=\"" << fmt2(left) << "\" y=\"16\" font-family=\"sans-serif\" "
        "font-size=\"12\">"
     << data.title << "</text>\n";

  for (int c = 0; c < k; ++c) {
    const double y = top + c * (row_h + gap);
    os << "<text x=\"4\" y=\"" << fmt2(y + row_h * 0.5 + 4.0)
       << "\" font-family=\"sans-serif\" font-size=\"11\">PC" << (c + 1)
       << "</text>\n";
    for (int t = 0; t < t_dim; ++t) {
      int r, g, b;
      color_of(data.scores[c][t], r, g, b);
      os << "<rect x=\"" << fmt2(left + t * cell_w) << "\" y=\"" << fmt2(y)
         << "\" width=\"" << fmt2(cell_w) << "\" height=\"" << fmt2(row_h)
         << "\" fill=\"rgb(" << r << "," << g << "," << b << ")\"/>\n";
    }
  }

  // Phase bar: one rect per run of equal labels.
  int max_label = 0;
  for (int p : data.phases) max_label = std::max(max_label, p);
  const double bar_y = top + k * (row_h + gap);
  int run_start = 0;
  for (int t = 1; t <= t_dim; ++t) {
    if (t == t_dim || data.phases[t] != data.phases[run_start]) {
      const int label = data.phases[run_start];
      const int shade =
          max_label == 0
              ? 211
              : 211 - static_cast<int>(std::lround(211.0 * label / max_label));
      os << "<rect x=\"" << fmt2(left + run_start * cell_w) << "\" y=\""
         << fmt2(bar_y) << "\" width=\"" << fmt2((t - run_start) * cell_w)
         << "\" height=\"" << fmt2(bar_h) << "\" fill=\"rgb(" << shade << ","
         << shade << "," << shade << ")\" class=\"phase\"/>\n";
      run_start = t;
    }
  }
  os << "<text x=\"" << fmt2(left) << "\" y=\"" << fmt2(bar_y + bar_h + 14.0)
     << "\" font-family=\"sans-serif\" font-size=\"10\">t = 0 .. " << (t_dim - 1)
     << "</text>\n";
  os << "</svg>\n";
  return os.str();
}

void write_heatmap_csv(const HeatmapData& data, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write heatmap csv: " + path);
  os << "# title=" << data.title << "\n";
  os << "t";
  for (size_t c = 0; c < data.scores.size(); ++c) os << ",pc" << (c + 1);
  os << ",phase\n";
  const int t_dim = data.scores.empty() ? 0 : static_cast<int>(data.scores[0].size());
  for (int t = 0; t < t_dim; ++t) {
    os << t;
    for (const Vec& s : data.scores) os << "," << csv::g17(s[t]);
    os << "," << data.phases[t] << "\n";
  }
}

HeatmapData read_heatmap_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read heatmap csv: " + path);
  HeatmapData data;
  std::string line;
  if (!std::getline(is, line) || line.rfind("# title=", 0) != 0) {
    throw ConfigError("heatmap csv missing title line: " + path);
  }
  data.title = line.substr(8);
  if (!std::getline(is, line)) throw ConfigError("heatmap csv missing header");
  int k = 0;
  for (char c : line) {
    if (c == ',') k += 1;
  }
  k -= 1;  // header is t,pc1..pck,phase
  if (k <= 0) throw ConfigError("heatmap csv header malformed");
  data.scores.assign(k, {});
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::getline(ss, field, ',');  // t
    for (int c = 0; c < k; ++c) {
      std::getline(ss, field, ',');
      data.scores[c].push_back(std::stod(field));
    }
    std::getline(ss, field, ',');
    data.phases.push_back(std::stoi(field));
  }
  return data;
}

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

void put_f64(std::ostream& os, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

double get_f64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

}  // namespace

void save_trace(const TraceMatrix& trace, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write trace container: " + path.string());
  os.write(kTraceMagic, sizeof(kTraceMagic));
  put_u32(os, kTraceVersion);
  put_u32(os, static_cast<std::uint32_t>(trace.t));
  put_u32(os, static_cast<std::uint32_t>(trace.m));
  for (double v : trace.data) put_f64(os, v);
  if (!os) throw ConfigError("trace container write failed: " + path.string());
}

TraceMatrix load_trace(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open trace container: " + path.string());
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kTraceMagic, 8) != 0) {
    throw ConfigError("not a memshare trace container: " + path.string());
  }
  const std::uint32_t version = get_u32(is);
  if (version != kTraceVersion) {
    throw ConfigError("unsupported trace container version");
  }
  TraceMatrix trace;
  trace.t = static_cast<int>(get_u32(is));
  trace.m = static_cast<int>(get_u32(is));
  trace.data.resize(static_cast<size_t>(trace.t) * trace.m);
  for (double& v : trace.data) v = get_f64(is);
  if (!is) throw ConfigError("truncated trace container: " + path.string());
  return trace;
}

}  // namespace memshare::comm
