#include "lfopt/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <random>
#include <sstream>

namespace lfopt {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::string_view next_token(std::string_view& rest) {
  while (!rest.empty() && is_space(rest.front())) rest.remove_prefix(1);
  std::size_t end = 0;
  while (end < rest.size() && !is_space(rest[end])) ++end;
  std::string_view tok = rest.substr(0, end);
  rest.remove_prefix(end);
  return tok;
}

bool parse_double(std::string_view tok, double& out) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  if (tok.empty()) return false;
  const auto* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, out);
  return ec == std::errc() && ptr == end;
}

bool parse_index(std::string_view tok, std::uint64_t& out) {
  if (tok.empty()) return false;
  const auto* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::string format_g17(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  (void)ec;
  return std::string(buf, ptr);
}

struct RawRow {
  double label;
  SparseVector x;
};

Dataset assemble(std::vector<RawRow> rows, std::size_t max_index, const ParseOptions& opts,
                 std::size_t last_line) {
  if (rows.empty()) throw ParseError(last_line, "empty dataset");

  Dataset data;
  data.dim = max_index;
  if (opts.binary_relabel) {
    data.num_classes = 2;
    data.class_names = {"-1", "+1"};
  } else {
    std::vector<double> distinct;
    for (const auto& r : rows) distinct.push_back(r.label);
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    data.num_classes = static_cast<std::uint32_t>(distinct.size());
    for (double d : distinct) data.class_names.push_back(format_g17(d));
    for (auto& r : rows) {
      auto it = std::lower_bound(distinct.begin(), distinct.end(), r.label);
      r.label = static_cast<double>(it - distinct.begin());
    }
  }
  data.instances.reserve(rows.size());
  data.labels.reserve(rows.size());
  for (auto& r : rows) {
    r.x.dim = data.dim;
    data.labels.push_back(static_cast<std::uint32_t>(r.label));
    data.instances.push_back(std::move(r.x));
  }
  return data;
}

}  // namespace

void Dataset::validate() const {
  if (instances.empty()) throw std::invalid_argument("dataset: no instances");
  if (instances.size() != labels.size()) throw std::invalid_argument("dataset: label count mismatch");
  for (std::size_t i = 0; i < instances.size(); ++i) {
    if (labels[i] >= num_classes) throw std::invalid_argument("dataset: label out of range");
    if (instances[i].dim > dim) throw std::invalid_argument("dataset: instance dim exceeds dataset dim");
    instances[i].validate();
  }
}

Dataset parse_libsvm(std::istream& in, const ParseOptions& opts) {
  std::vector<RawRow> rows;
  std::size_t max_index = 0;
  std::size_t line_no = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view rest(line);
    if (auto hash = rest.find('#'); hash != std::string_view::npos) rest = rest.substr(0, hash);
    rest = trim(rest);
    if (rest.empty()) continue;

    RawRow row;
    std::string_view label_tok = next_token(rest);
    if (!parse_double(label_tok, row.label) || !std::isfinite(row.label)) {
      throw ParseError(line_no, "malformed label '" + std::string(label_tok) + "'");
    }
    if (opts.binary_relabel) {
      if (row.label == 1.0) {
        row.label = 1.0;
      } else if (row.label == -1.0 || row.label == 0.0) {
        row.label = 0.0;
      } else {
        throw ParseError(line_no, "binary relabel expects labels in {-1, +1}, got '" +
                                      std::string(label_tok) + "'");
      }
    }

    std::uint64_t prev = 0;
    for (std::string_view tok = next_token(rest); !tok.empty(); tok = next_token(rest)) {
      auto colon = tok.find(':');
      if (colon == std::string_view::npos) {
        throw ParseError(line_no, "malformed feature '" + std::string(tok) + "'");
      }
      std::uint64_t idx = 0;
      if (!parse_index(tok.substr(0, colon), idx) || idx == 0 || idx > UINT32_MAX) {
        throw ParseError(line_no, "malformed index in '" + std::string(tok) + "'");
      }
      if (idx <= prev) throw ParseError(line_no, "indices not strictly increasing");
      double val = 0.0;
      if (!parse_double(tok.substr(colon + 1), val)) {
        throw ParseError(line_no, "non-numeric value in '" + std::string(tok) + "'");
      }
      prev = idx;
      row.x.indices.push_back(static_cast<std::uint32_t>(idx - 1));
      row.x.values.push_back(val);
      max_index = std::max<std::size_t>(max_index, idx);
    }
    rows.push_back(std::move(row));
  }
  return assemble(std::move(rows), max_index, opts, line_no);
}

Dataset parse_libsvm(std::string_view text, const ParseOptions& opts) {
  std::istringstream in{std::string(text)};
  return parse_libsvm(in, opts);
}

Dataset load_libsvm(const std::string& path, const ParseOptions& opts) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open " + path);
  return parse_libsvm(in, opts);
}

std::string serialize_libsvm(const Dataset& data) {
  std::ostringstream out;
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << data.class_names.at(data.labels[i]);
    const auto& x = data.instances[i];
    for (std::size_t k = 0; k < x.nnz(); ++k) {
      out << ' ' << (x.indices[k] + 1) << ':' << format_g17(x.values[k]);
    }
    out << '\n';
  }
  return out.str();
}

std::vector<double> scale_max_abs(Dataset& data) {
  std::vector<double> max_abs(data.dim, 0.0);
  for (const auto& x : data.instances) {
    for (std::size_t k = 0; k < x.nnz(); ++k) {
      max_abs[x.indices[k]] = std::max(max_abs[x.indices[k]], std::abs(x.values[k]));
    }
  }
  for (double& m : max_abs) {
    if (m == 0.0) m = 1.0;
  }
  for (auto& x : data.instances) {
    for (std::size_t k = 0; k < x.nnz(); ++k) x.values[k] /= max_abs[x.indices[k]];
  }
  return max_abs;
}

Dataset binarize(const Dataset& data, std::uint32_t positive) {
  if (positive >= data.num_classes) throw std::invalid_argument("binarize: class out of range");
  Dataset out;
  out.instances = data.instances;
  out.dim = data.dim;
  out.num_classes = 2;
  out.class_names = {"-1", "+1"};
  out.labels.reserve(data.size());
  for (auto y : data.labels) out.labels.push_back(y == positive ? 1 : 0);
  return out;
}

Dataset select_class_pair(const Dataset& data, std::uint32_t neg, std::uint32_t pos) {
  if (neg >= data.num_classes || pos >= data.num_classes || neg == pos) {
    throw std::invalid_argument("select_class_pair: invalid class pair");
  }
  Dataset out;
  out.dim = data.dim;
  out.num_classes = 2;
  out.class_names = {"-1", "+1"};
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.labels[i] == neg || data.labels[i] == pos) {
      out.instances.push_back(data.instances[i]);
      out.labels.push_back(data.labels[i] == pos ? 1 : 0);
    }
  }
  if (out.instances.empty()) throw std::invalid_argument("select_class_pair: no instances selected");
  return out;
}

Dataset head(const Dataset& data, std::size_t count) {
  Dataset out = data;
  if (count < out.size()) {
    out.instances.resize(count);
    out.labels.resize(count);
  }
  return out;
}

Dataset make_synthetic_logreg(std::size_t n, std::size_t d, std::uint64_t seed, double flip_prob) {
  if (n == 0 || d == 0) throw std::invalid_argument("synthetic: n and d must be positive");
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  std::vector<double> w_true(d);
  for (double& w : w_true) w = normal(gen);

  Dataset data;
  data.dim = d;
  data.num_classes = 2;
  data.class_names = {"-1", "+1"};
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (std::size_t i = 0; i < n; ++i) {
    SparseVector x;
    x.dim = d;
    double margin = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      double v = normal(gen) * scale;
      x.indices.push_back(static_cast<std::uint32_t>(k));
      x.values.push_back(v);
      margin += v * w_true[k];
    }
    bool positive = margin > 0.0;
    if (unif(gen) < flip_prob) positive = !positive;
    data.instances.push_back(std::move(x));
    data.labels.push_back(positive ? 1 : 0);
  }
  return data;
}

Dataset make_synthetic_multiclass(std::size_t n, std::size_t d, std::uint32_t k, std::uint64_t seed) {
  if (n == 0 || d == 0 || k < 2) throw std::invalid_argument("synthetic: invalid shape");
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> centres(k, std::vector<double>(d));
  for (auto& c : centres) {
    for (double& v : c) v = normal(gen);
  }
  Dataset data;
  data.dim = d;
  data.num_classes = k;
  for (std::uint32_t c = 0; c < k; ++c) data.class_names.push_back(std::to_string(c));
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (std::size_t i = 0; i < n; ++i) {
    auto label = static_cast<std::uint32_t>(i % k);
    SparseVector x;
    x.dim = d;
    for (std::size_t j = 0; j < d; ++j) {
      x.indices.push_back(static_cast<std::uint32_t>(j));
      x.values.push_back((centres[label][j] + normal(gen)) * scale);
    }
    data.instances.push_back(std::move(x));
    data.labels.push_back(label);
  }
  return data;
}

}  // namespace lfopt
