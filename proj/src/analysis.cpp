#include "lens/analysis.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace lens {

LanguageVector language_vector(const VectorSet& vectors, const std::string& lang) {
  const std::size_t N = vectors.size(), D = vectors.dim();
  if (N < 2) throw ConfigError("language vector for '" + lang + "' needs at least 2 sentences, got " +
                               std::to_string(N));
  std::vector<double> sum(D, 0.0), sq(D, 0.0);
  for (std::size_t i = 0; i < N; ++i) {
    auto row = vectors.row(i);
    double n2 = 0.0;
    for (float x : row) n2 += static_cast<double>(x) * x;
    if (!(n2 > 0.0)) {
      throw NumericError("language vector: zero-norm vector, id " + std::to_string(vectors.ids()[i]));
    }
    const double inv = 1.0 / std::sqrt(n2);
    for (std::size_t d = 0; d < D; ++d) {
      const double u = row[d] * inv;
      sum[d] += u;
      sq[d] += u * u;
    }
  }
  LanguageVector lv{lang, std::vector<double>(D), N};
  const double n = static_cast<double>(N);
  for (std::size_t d = 0; d < D; ++d) {
    const double mean = sum[d] / n;
    lv.variance[d] = std::max(0.0, sq[d] / n - mean * mean);
  }
  return lv;
}

ProbeSplit probe_split(std::span<const std::size_t> labels, std::size_t classes, double fraction,
                       std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("probe: train fraction must lie in (0, 1]");
  std::vector<std::vector<std::size_t>> by_class(classes);
  for (std::size_t i = 0; i < labels.size(); ++i) by_class.at(labels[i]).push_back(i);
  std::mt19937_64 rng(seed);
  ProbeSplit split;
  for (std::size_t c = 0; c < classes; ++c) {
    auto& rows = by_class[c];
    if (rows.empty()) throw ConfigError("probe: class " + std::to_string(c) + " has no examples");
    std::shuffle(rows.begin(), rows.end(), rng);
    std::size_t n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(rows.size())));
    n_train = std::max<std::size_t>(1, n_train);
    if (fraction < 1.0 && rows.size() >= 2) n_train = std::min(n_train, rows.size() - 1);
    n_train = std::min(n_train, rows.size());
    split.train.insert(split.train.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.test.insert(split.test.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_train), rows.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

std::size_t ProbeModel::predict(std::span<const float> x) const {
  if (x.size() != dim) throw DimensionError("probe: expected D=" + std::to_string(dim));
  const std::size_t C = classes.size();
  std::size_t best = 0;
  double best_z = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < C; ++c) {
    double z = bias[c];
    for (std::size_t d = 0; d < dim; ++d) z += weights[c * dim + d] * ((x[d] - mean[d]) / scale[d]);
    if (z > best_z) {
      best_z = z;
      best = c;
    }
  }
  return best;
}

namespace {

std::vector<std::size_t> encode_labels(std::span<const std::string> labels, const std::vector<std::string>& table) {
  std::vector<std::size_t> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto it = std::find(table.begin(), table.end(), labels[i]);
    if (it == table.end()) throw ConfigError("probe: unknown label '" + labels[i] + "'");
    out[i] = static_cast<std::size_t>(it - table.begin());
  }
  return out;
}

ProbeModel fit(const VectorSet& v, std::span<const std::size_t> y, std::span<const std::size_t> rows,
               std::vector<std::string> classes, const ProbeOptions& opts) {
  const std::size_t D = v.dim(), C = classes.size(), n = rows.size();
  ProbeModel m;
  m.classes = std::move(classes);
  m.dim = D;
  m.mean.assign(D, 0.0);
  m.scale.assign(D, 1.0);
  for (std::size_t r : rows)
    for (std::size_t d = 0; d < D; ++d) m.mean[d] += v.row(r)[d];
  for (double& x : m.mean) x /= static_cast<double>(n);
  std::vector<double> var(D, 0.0);
  for (std::size_t r : rows)
    for (std::size_t d = 0; d < D; ++d) var[d] += std::pow(v.row(r)[d] - m.mean[d], 2);
  for (std::size_t d = 0; d < D; ++d) {
    const double sd = std::sqrt(var[d] / static_cast<double>(n));
    m.scale[d] = sd > 1e-12 ? sd : 1.0;
  }

  std::vector<double> X(n * D);
  double mean_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t d = 0; d < D; ++d) {
      const double x = (v.row(rows[i])[d] - m.mean[d]) / m.scale[d];
      X[i * D + d] = x;
      mean_sq += x * x;
    }
  mean_sq /= static_cast<double>(n);
  // Inverse of a bound on the curvature of the mean softmax loss (bias included).
  const double step = 1.0 / (0.5 * (mean_sq + 1.0) + opts.l2);

  m.weights.assign(C * D, 0.0);
  m.bias.assign(C, 0.0);
  std::vector<double> gw(C * D), gb(C), p(C);
  for (std::size_t it = 0; it < opts.iterations; ++it) {
    std::fill(gw.begin(), gw.end(), 0.0);
    std::fill(gb.begin(), gb.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double* x = &X[i * D];
      double zmax = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < C; ++c) {
        double z = m.bias[c];
        for (std::size_t d = 0; d < D; ++d) z += m.weights[c * D + d] * x[d];
        p[c] = z;
        zmax = std::max(zmax, z);
      }
      double denom = 0.0;
      for (double& z : p) denom += (z = std::exp(z - zmax));
      for (std::size_t c = 0; c < C; ++c) {
        const double r = p[c] / denom - (c == y[rows[i]] ? 1.0 : 0.0);
        gb[c] += r;
        for (std::size_t d = 0; d < D; ++d) gw[c * D + d] += r * x[d];
      }
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t k = 0; k < C * D; ++k) m.weights[k] -= step * (gw[k] * inv_n + opts.l2 * m.weights[k]);
    for (std::size_t c = 0; c < C; ++c) m.bias[c] -= step * gb[c] * inv_n;
  }
  return m;
}

double accuracy(const ProbeModel& m, const VectorSet& v, std::span<const std::size_t> y,
                std::span<const std::size_t> rows) {
  if (rows.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::size_t hits = 0;
  for (std::size_t r : rows) hits += m.predict(v.row(r)) == y[r];
  return static_cast<double>(hits) / static_cast<double>(rows.size());
}

}  // namespace

ProbeReport probe_train(const VectorSet& vectors, std::span<const std::string> labels, const ProbeOptions& opts) {
  if (labels.size() != vectors.size()) throw DimensionError("probe: label count differs from vector count");
  std::vector<std::string> table(labels.begin(), labels.end());
  std::sort(table.begin(), table.end());
  table.erase(std::unique(table.begin(), table.end()), table.end());
  if (table.size() < 2) throw ConfigError("probe: needs at least 2 classes");
  const std::vector<std::size_t> y = encode_labels(labels, table);
  ProbeReport rep;
  rep.split = probe_split(y, table.size(), opts.train_fraction, opts.seed);
  rep.model = fit(vectors, y, rep.split.train, table, opts);
  rep.train_accuracy = accuracy(rep.model, vectors, y, rep.split.train);
  rep.test_accuracy = accuracy(rep.model, vectors, y, rep.split.test);
  return rep;
}

double probe_eval(const ProbeModel& model, const VectorSet& vectors, std::span<const std::string> labels) {
  if (labels.size() != vectors.size()) throw DimensionError("probe: label count differs from vector count");
  if (vectors.size() == 0) throw EmptySequenceError("probe: no vectors to evaluate");
  const std::vector<std::size_t> y = encode_labels(labels, model.classes);
  std::vector<std::size_t> all(vectors.size());
  std::iota(all.begin(), all.end(), 0);
  return accuracy(model, vectors, y, all);
}

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("spearman: lengths differ");
  if (a.size() < 2) throw ConfigError("spearman: needs at least 2 observations");
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::isnan(a[i]) || std::isnan(b[i])) throw NumericError("spearman: NaN input");
  const std::vector<double> ra = average_ranks(a), rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) throw NumericError("spearman: constant input, correlation undefined");
  return sab / std::sqrt(saa * sbb);
}

LabeledRows labeled_rows(const VectorSet& vectors, std::span<const std::string> labels) {
  if (labels.size() != vectors.size()) throw DimensionError("export: label count differs from vector count");
  LabeledRows out;
  out.labels.assign(labels.begin(), labels.end());
  out.dim = vectors.dim();
  out.values.assign(vectors.data().begin(), vectors.data().end());
  return out;
}

LabeledRows labeled_rows(std::span<const LanguageVector> langs) {
  LabeledRows out;
  if (langs.empty()) return out;
  out.dim = langs[0].variance.size();
  for (const auto& lv : langs) {
    if (lv.variance.size() != out.dim) throw DimensionError("export: language vectors differ in length");
    out.labels.push_back(lv.lang);
    out.values.insert(out.values.end(), lv.variance.begin(), lv.variance.end());
  }
  return out;
}

void export_projection(const LabeledRows& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "label";
  for (std::size_t d = 0; d < rows.dim; ++d) out << "\td" << d;
  out << '\n';
  char buf[64];
  for (std::size_t i = 0; i < rows.labels.size(); ++i) {
    if (rows.labels[i].find_first_of("\t\n") != std::string::npos) {
      throw ConfigError("export: label '" + rows.labels[i] + "' contains a tab or newline");
    }
    out << rows.labels[i];
    for (std::size_t d = 0; d < rows.dim; ++d) {
      auto res = std::to_chars(buf, buf + sizeof buf, rows.values[i * rows.dim + d]);
      out << '\t' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

LabeledRows read_projection(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string name = path.string();
  std::string line;
  if (!std::getline(in, line)) throw ParseError(ParseErrorKind::kFormat, name, 0, "missing header");
  auto split = [](const std::string& s) {
    std::vector<std::string> f;
    std::size_t start = 0;
    for (std::size_t k = 0; k <= s.size(); ++k) {
      if (k == s.size() || s[k] == '\t') {
        f.push_back(s.substr(start, k - start));
        start = k + 1;
      }
    }
    return f;
  };
  const auto header = split(line);
  if (header.empty() || header[0] != "label") {
    throw ParseError(ParseErrorKind::kFormat, name, 0, "header must start with 'label'");
  }
  LabeledRows rows;
  rows.dim = header.size() - 1;
  std::int64_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != rows.dim + 1) {
      throw ParseError(ParseErrorKind::kInconsistentDim, name, lineno,
                       std::to_string(f.size()) + " columns, header has " + std::to_string(rows.dim + 1));
    }
    rows.labels.push_back(f[0]);
    for (std::size_t d = 1; d < f.size(); ++d) {
      double v = 0.0;
      auto res = std::from_chars(f[d].data(), f[d].data() + f[d].size(), v);
      if (res.ec != std::errc() || res.ptr != f[d].data() + f[d].size()) {
        throw ParseError(ParseErrorKind::kFormat, name, lineno, "bad number '" + f[d] + "'");
      }
      rows.values.push_back(v);
    }
  }
  return rows;
}

}  // namespace lens
