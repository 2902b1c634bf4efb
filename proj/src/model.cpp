#include "leakybias/model.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace leakybias {

namespace {

// softplus via max(z,0) + log1p(e^{-|z|}); required identity, not optional.
double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

constexpr double kLog2 = 0.69314718055994530942;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

double Activation::value(double z) const {
  if (kind == ActivationKind::LeakyRelu) return z > 0.0 ? z : gamma * z;
  return gamma * z + (1.0 - gamma) * (softplus(z) - kLog2);
}

double Activation::derivative(double z) const {
  if (kind == ActivationKind::LeakyRelu) return z > 0.0 ? 1.0 : gamma;  // gamma at z = 0
  return gamma + (1.0 - gamma) * sigmoid(z);
}

std::optional<double> Activation::second_derivative(double z) const {
  if (kind == ActivationKind::LeakyRelu) return std::nullopt;
  const double s = sigmoid(z);
  return (1.0 - gamma) * s * (1.0 - s);
}

double loss_value(LossKind kind, double q) {
  if (kind == LossKind::Exponential) return std::exp(-q);
  return softplus(-q);
}

double loss_sigmoid(LossKind kind, double q) {
  if (kind == LossKind::Exponential) return std::exp(-q);
  return sigmoid(-q);
}

double log_loss_sigmoid(LossKind kind, double q) {
  if (kind == LossKind::Exponential) return -q;
  return -softplus(q);
}

void TwoLayerNet::validate() const {
  if (m1 < 1 || m2 < 1) throw std::invalid_argument("net: need m1 >= 1 and m2 >= 1");
  if (w.rows() != m1 + m2) throw std::invalid_argument("net: weight row count != m1 + m2");
  if (!(activation.gamma > 0.0 && activation.gamma < 1.0))
    throw std::invalid_argument("net: gamma must lie in (0,1)");
}

double forward(const TwoLayerNet& net, std::span<const double> x) {
  if (x.size() != net.d()) throw std::invalid_argument("forward: dimension mismatch");
  double pos = 0.0, neg = 0.0;
  for (std::size_t j = 0; j < net.m1; ++j) pos += net.activation.value(dot(net.w.row(j), x));
  for (std::size_t j = net.m1; j < net.m(); ++j) neg += net.activation.value(dot(net.w.row(j), x));
  return (pos - neg) / std::sqrt(static_cast<double>(net.m()));
}

std::vector<double> forward_all(const TwoLayerNet& net, const Dataset& ds) {
  std::vector<double> f(ds.n());
  for (std::size_t i = 0; i < ds.n(); ++i) f[i] = forward(net, ds.xs.row(i));
  return f;
}

double empirical_loss(const TwoLayerNet& net, const Dataset& ds, LossKind loss) {
  double s = 0.0;
  for (std::size_t i = 0; i < ds.n(); ++i)
    s += loss_value(loss, ds.ys[i] * forward(net, ds.xs.row(i)));
  return s / static_cast<double>(ds.n());
}

double sigmoid_risk(const TwoLayerNet& net, const Dataset& ds, LossKind loss) {
  double s = 0.0;
  for (std::size_t i = 0; i < ds.n(); ++i)
    s += loss_sigmoid(loss, ds.ys[i] * forward(net, ds.xs.row(i)));
  return s / static_cast<double>(ds.n());
}

BatchEval evaluate_batch(const TwoLayerNet& net, const Dataset& ds, LossKind loss,
                         bool with_gradient) {
  if (ds.d() != net.d()) throw std::invalid_argument("evaluate_batch: dimension mismatch");
  const std::size_t m = net.m(), n = ds.n(), d = net.d();
  const double inv_sqrt_m = 1.0 / std::sqrt(static_cast<double>(m));

  BatchEval ev;
  ev.preacts = Matrix(m, n);
  for (std::size_t j = 0; j < m; ++j) {
    auto wj = net.w.row(j);
    auto pj = ev.preacts.row(j);
    for (std::size_t i = 0; i < n; ++i) pj[i] = dot(wj, ds.xs.row(i));
  }

  ev.f.assign(n, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    const double sj = net.second_layer_sign(j);
    auto pj = ev.preacts.row(j);
    for (std::size_t i = 0; i < n; ++i) ev.f[i] += sj * net.activation.value(pj[i]);
  }
  for (double& v : ev.f) v *= inv_sqrt_m;

  ev.g.resize(n);
  ev.loss = 0.0;
  ev.sigmoid_risk = 0.0;
  ev.min_margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const double q = ds.ys[i] * ev.f[i];
    ev.min_margin = std::min(ev.min_margin, q);
    ev.loss += loss_value(loss, q);
    ev.g[i] = loss_sigmoid(loss, q);
    ev.sigmoid_risk += ev.g[i];
  }
  ev.loss /= static_cast<double>(n);
  ev.sigmoid_risk /= static_cast<double>(n);

  if (with_gradient) {
    ev.gradient = Matrix(m, d);
    for (std::size_t j = 0; j < m; ++j) {
      const double aj = net.second_layer_sign(j) * inv_sqrt_m;
      auto pj = ev.preacts.row(j);
      auto gj = ev.gradient.row(j);
      for (std::size_t i = 0; i < n; ++i) {
        const double coef =
            -ev.g[i] * ds.ys[i] * aj * net.activation.derivative(pj[i]) / static_cast<double>(n);
        axpy(coef, ds.xs.row(i), gj);
      }
    }
  }
  return ev;
}

Matrix grad(const TwoLayerNet& net, const Dataset& ds, LossKind loss) {
  return evaluate_batch(net, ds, loss, true).gradient;
}

void save_network(const TwoLayerNet& net, const std::filesystem::path& path,
                  const std::string& extra_header) {
  net.validate();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_network: cannot open " + path.string());
  out << "#leakybias-net v1 m1=" << net.m1 << " m2=" << net.m2
      << " gamma=" << format_double(net.activation.gamma) << " act="
      << (net.activation.kind == ActivationKind::LeakyRelu ? "leaky" : "smooth");
  if (!extra_header.empty()) out << ' ' << extra_header;
  out << "\n";
  for (std::size_t j = 0; j < net.m(); ++j) {
    auto row = net.w.row(j);
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k) out << ' ';
      out << format_double(row[k]);
    }
    out << "\n";
  }
  if (!out) throw std::runtime_error("save_network: write failed for " + path.string());
}

TwoLayerNet load_network(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_network: cannot open " + path.string());
  std::string header;
  if (!std::getline(in, header)) throw ParseError("empty file", 1);

  TwoLayerNet net;
  std::size_t m1 = 0, m2 = 0;
  {
    std::istringstream hs(header);
    std::string magic, version, tok;
    hs >> magic >> version;
    if (magic != "#leakybias-net" || version != "v1")
      throw ParseError("bad network header '" + header + "'", 1);
    while (hs >> tok) {
      if (tok.rfind("m1=", 0) == 0) m1 = std::stoull(tok.substr(3));
      else if (tok.rfind("m2=", 0) == 0) m2 = std::stoull(tok.substr(3));
      else if (tok.rfind("gamma=", 0) == 0) net.activation.gamma = std::stod(tok.substr(6));
      else if (tok.rfind("act=", 0) == 0) {
        const std::string v = tok.substr(4);
        if (v == "leaky") net.activation.kind = ActivationKind::LeakyRelu;
        else if (v == "smooth") net.activation.kind = ActivationKind::SmoothLeaky;
        else throw ParseError("unknown activation '" + v + "'", 1);
      }
      // unknown trailing tokens (meta=...) are tolerated
    }
  }
  if (m1 < 1 || m2 < 1) throw ParseError("header missing m1 or m2", 1);
  net.m1 = m1;
  net.m2 = m2;

  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> row;
    const char* ptr = line.data();
    const char* end = line.data() + line.size();
    while (ptr < end) {
      while (ptr < end && *ptr == ' ') ++ptr;
      if (ptr >= end) break;
      double v = 0.0;
      auto [next, ec] = std::from_chars(ptr, end, v);
      if (ec != std::errc()) throw ParseError("malformed weight", line_no);
      row.push_back(v);
      ptr = next;
    }
    rows.push_back(std::move(row));
  }
  if (rows.size() != m1 + m2)
    throw ParseError("expected " + std::to_string(m1 + m2) + " weight rows, got " +
                         std::to_string(rows.size()),
                     line_no);
  const std::size_t d = rows[0].size();
  net.w = Matrix(rows.size(), d);
  for (std::size_t j = 0; j < rows.size(); ++j) {
    if (rows[j].size() != d) throw ParseError("ragged weight rows", j + 2);
    for (std::size_t k = 0; k < d; ++k) net.w(j, k) = rows[j][k];
  }
  net.validate();
  return net;
}

}  // namespace leakybias
