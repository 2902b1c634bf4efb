#include "leakybias/dataset.hpp"

#include <charconv>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "leakybias/rng.hpp"

namespace leakybias {

namespace {

constexpr std::uint64_t kCoordStream = 0x10;
constexpr std::uint64_t kLabelStream = 0x11;
constexpr std::uint64_t kNoiseStream = 0x12;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void Dataset::validate() const {
  if (n() < 1 || d() < 1) throw std::invalid_argument("dataset: need n >= 1 and d >= 1");
  if (ys.size() != n()) throw std::invalid_argument("dataset: label count mismatch");
  for (double y : ys)
    if (y != 1.0 && y != -1.0) throw std::invalid_argument("dataset: labels must be exactly +1 or -1");
  for (std::size_t i = 0; i < n(); ++i) {
    bool all_zero = true;
    for (double v : xs.row(i)) {
      if (!std::isfinite(v)) throw std::invalid_argument("dataset: non-finite sample entry");
      if (v != 0.0) all_zero = false;
    }
    if (all_zero) throw std::invalid_argument("dataset: zero sample row");
  }
}

std::vector<double> Dataset::clean_labels() const {
  auto pos = meta.find("clean=");
  if (pos == std::string::npos) return ys;
  std::vector<double> clean;
  clean.reserve(n());
  for (std::size_t k = pos + 6; k < meta.size() && clean.size() < n(); ++k) {
    if (meta[k] == '+') clean.push_back(1.0);
    else if (meta[k] == '-') clean.push_back(-1.0);
    else break;
  }
  if (clean.size() != n()) return ys;
  return clean;
}

OrthogonalityCertificate certify(const Dataset& ds, double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0))
    throw std::invalid_argument("certify: gamma must lie in (0,1]");
  OrthogonalityCertificate cert;
  cert.n = ds.n();
  cert.gamma = gamma;

  std::vector<double> norms(ds.n());
  for (std::size_t i = 0; i < ds.n(); ++i) norms[i] = norm(ds.xs.row(i));
  cert.r_min = norms[0];
  cert.r_max = norms[0];
  for (double v : norms) {
    cert.r_min = std::min(cert.r_min, v);
    cert.r_max = std::max(cert.r_max, v);
  }
  cert.ratio_R = cert.r_max / cert.r_min;

  cert.p = 0.0;  // a single sample has no pairs
  for (std::size_t i = 0; i < ds.n(); ++i)
    for (std::size_t j = i + 1; j < ds.n(); ++j)
      cert.p = std::max(cert.p, std::abs(dot(ds.xs.row(i), ds.xs.row(j))));

  const double r2 = cert.ratio_R * cert.ratio_R;
  cert.c_R = 10.0 * r2 / (gamma * gamma) + 10.0;

  const double lhs = cert.r_min * cert.r_min;
  const double n = static_cast<double>(ds.n());
  cert.thm32_holds = lhs >= 3.0 * std::pow(gamma, -3.0) * r2 * n * cert.p;
  cert.thm42_holds = lhs >= 5.0 * std::pow(gamma, -2.0) * cert.c_R * n * cert.p;
  return cert;
}

Dataset gen_gaussian(std::size_t n, std::size_t d,
                     const std::vector<double>& sigma_diag, std::uint64_t seed) {
  if (n < 1 || d < 1) throw std::invalid_argument("gen_gaussian: need n >= 1 and d >= 1");
  if (sigma_diag.size() != d) throw std::invalid_argument("gen_gaussian: sigma_diag length mismatch");
  std::vector<double> sd(d);
  for (std::size_t k = 0; k < d; ++k) {
    if (!(sigma_diag[k] > 0.0)) throw std::invalid_argument("gen_gaussian: nonpositive variance entry");
    sd[k] = std::sqrt(sigma_diag[k]);
  }

  Dataset ds;
  ds.seed = seed;
  ds.meta = "gaussian";
  ds.xs = Matrix(n, d);
  CounterRng coords(substream(seed, kCoordStream));
  for (std::size_t i = 0; i < n; ++i) {
    auto row = ds.xs.row(i);
    for (std::size_t k = 0; k < d; ++k) row[k] = sd[k] * coords.next_gaussian();
  }
  CounterRng labels(substream(seed, kLabelStream));
  ds.ys.resize(n);
  for (std::size_t i = 0; i < n; ++i) ds.ys[i] = labels.next_sign_bit() ? 1.0 : -1.0;
  ds.validate();
  return ds;
}

Dataset gen_gaussian(std::size_t n, std::size_t d, std::uint64_t seed) {
  return gen_gaussian(n, d, std::vector<double>(d, 1.0), seed);
}

Dataset gen_mixture(std::size_t n, std::size_t d, double beta, double noise_rate,
                    std::uint64_t seed) {
  if (n < 1 || d < 1) throw std::invalid_argument("gen_mixture: need n >= 1 and d >= 1");
  if (!(beta > 0.0 && beta < 0.5)) throw std::invalid_argument("gen_mixture: beta must lie in (0,1/2)");
  if (!(noise_rate >= 0.0 && noise_rate < 0.5))
    throw std::invalid_argument("gen_mixture: noise_rate must lie in [0,1/2)");

  // ||mu|| = d^beta with all entries equal and positive.
  const double mu_entry = std::pow(static_cast<double>(d), beta - 0.5);

  Dataset ds;
  ds.seed = seed;
  ds.xs = Matrix(n, d);
  ds.ys.resize(n);

  CounterRng coords(substream(seed, kCoordStream));
  CounterRng labels(substream(seed, kLabelStream));
  CounterRng noise(substream(seed, kNoiseStream));

  std::string clean;
  clean.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double c = labels.next_sign_bit() ? 1.0 : -1.0;
    clean.push_back(c > 0 ? '+' : '-');
    auto row = ds.xs.row(i);
    for (std::size_t k = 0; k < d; ++k) row[k] = c * mu_entry + coords.next_gaussian();
    const bool flip = noise.next_uniform() < noise_rate;
    ds.ys[i] = flip ? -c : c;
  }

  std::ostringstream meta;
  meta << "mixture beta=" << format_double(beta) << " noise=" << format_double(noise_rate)
       << " clean=" << clean;
  ds.meta = meta.str();
  ds.validate();
  return ds;
}

Dataset gen_xor(std::size_t n, std::size_t d, double mu_norm, std::uint64_t seed,
                double noise_scale) {
  if (n < 1) throw std::invalid_argument("gen_xor: need n >= 1");
  if (d < 2) throw std::invalid_argument("gen_xor: need d >= 2");
  if (!(mu_norm > 0.0)) throw std::invalid_argument("gen_xor: mu_norm must be positive");
  if (!(noise_scale >= 0.0)) throw std::invalid_argument("gen_xor: negative noise_scale");

  // mu1 = mu_norm * e1 and mu2 = mu_norm * e2: orthogonal, equal norms.
  Dataset ds;
  ds.seed = seed;
  ds.xs = Matrix(n, d);
  ds.ys.resize(n);

  CounterRng coords(substream(seed, kCoordStream));
  CounterRng centers(substream(seed, kLabelStream));

  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t c = centers.next_u64() & 3ULL;  // which of +-mu1, +-mu2
    auto row = ds.xs.row(i);
    for (std::size_t k = 0; k < d; ++k) row[k] = noise_scale * coords.next_gaussian();
    const double sign = (c & 1ULL) ? -1.0 : 1.0;
    row[(c & 2ULL) ? 1 : 0] += sign * mu_norm;
    const double s1 = std::abs(row[0]) * mu_norm;  // |<mu1, x>|
    const double s2 = std::abs(row[1]) * mu_norm;  // |<mu2, x>|
    ds.ys[i] = s1 - s2 > 0.0 ? 1.0 : -1.0;
  }

  std::ostringstream meta;
  meta << "xor mu=" << format_double(mu_norm);
  ds.meta = meta.str();
  ds.validate();
  return ds;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  ds.validate();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_dataset: cannot open " + path.string());
  out << "#leakybias-ds v1 n=" << ds.n() << " d=" << ds.d() << " seed=" << ds.seed
      << " meta=" << ds.meta << "\n";
  for (std::size_t i = 0; i < ds.n(); ++i) {
    out << format_double(ds.ys[i]);
    for (double v : ds.xs.row(i)) out << ',' << format_double(v);
    out << "\n";
  }
  if (!out) throw std::runtime_error("save_dataset: write failed for " + path.string());
}

namespace {

double parse_double_field(const std::string& tok, std::size_t line, std::size_t offset) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    throw ParseError("malformed number '" + tok + "'", line, offset);
  return v;
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_dataset: cannot open " + path.string());

  std::string header;
  if (!std::getline(in, header)) throw ParseError("empty file", 1);

  std::size_t n = 0, d = 0;
  std::uint64_t seed = 0;
  std::string meta;
  {
    std::istringstream hs(header);
    std::string magic, version;
    hs >> magic >> version;
    if (magic != "#leakybias-ds" || version != "v1")
      throw ParseError("bad dataset header '" + header + "'", 1);
    std::string tok;
    while (hs >> tok) {
      if (tok.rfind("n=", 0) == 0) n = std::stoull(tok.substr(2));
      else if (tok.rfind("d=", 0) == 0) d = std::stoull(tok.substr(2));
      else if (tok.rfind("seed=", 0) == 0) seed = std::stoull(tok.substr(5));
      else if (tok.rfind("meta=", 0) == 0) {
        // meta is the last field and may contain spaces
        auto pos = header.find("meta=");
        meta = header.substr(pos + 5);
        break;
      }
    }
  }
  if (n < 1 || d < 1) throw ParseError("header missing n or d", 1);

  Dataset ds;
  ds.seed = seed;
  ds.meta = meta;
  ds.xs = Matrix(n, d);
  ds.ys.resize(n);

  std::string line;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::getline(in, line)) throw ParseError("truncated file: expected " + std::to_string(n) + " rows", i + 2);
    const std::size_t line_no = i + 2;
    std::size_t start = 0, field = 0;
    auto row = ds.xs.row(i);
    while (start <= line.size()) {
      auto comma = line.find(',', start);
      std::string tok = line.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      if (field == 0) ds.ys[i] = parse_double_field(tok, line_no, start);
      else if (field <= d) row[field - 1] = parse_double_field(tok, line_no, start);
      else throw ParseError("too many fields", line_no, start);
      ++field;
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (field != d + 1) throw ParseError("expected " + std::to_string(d + 1) + " fields, got " + std::to_string(field), line_no);
  }
  ds.validate();
  return ds;
}

}  // namespace leakybias
