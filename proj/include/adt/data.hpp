// Copyright (c) 2026 the adt authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "adt/rng.hpp"
#include "adt/tensor.hpp"

namespace adt {

// Dataset kinds with their generator parameters. Parsed from specs like
// "gaussian_1d(2,0.5)", "mixture_2d", "swiss_roll_2d(0.1)", "checkerboard_2d".
struct DatasetSpec {
  std::string kind;                // gaussian_1d | mixture_2d | swiss_roll_2d | checkerboard_2d
  double mu = 0.0, sigma = 1.0;    // gaussian_1d
  long centers = 8;                // mixture_2d
  double comp_sigma = 0.05;        // mixture_2d
  double noise = 0.05;             // swiss_roll_2d

  long dim() const {
    if (kind == "gaussian_1d") return 1;
    if (kind == "mixture_2d" || kind == "swiss_roll_2d" || kind == "checkerboard_2d") return 2;
    throw ContractError("DatasetSpec: unknown kind '" + kind + "'");
  }

  static DatasetSpec parse(const std::string& text);
  std::string to_string() const;
};

// Samples normalized to zero mean / unit per-coordinate std; the affine
// (shift, scale) is stored so samples can be denormalized, and so Gaussian
// closed forms can be mapped into normalized space exactly.
struct Dataset {
  DatasetSpec spec;
  long n = 0;
  std::uint64_t seed = 0;
  Tensor samples;             // [n, dim], normalized
  std::vector<double> shift;  // per-coordinate empirical mean of the raw draw
  std::vector<double> scale;  // per-coordinate empirical std of the raw draw

  long dim() const { return spec.dim(); }

  // Declared Gaussian parameters mapped through the stored affine; only
  // meaningful for gaussian_1d.
  double normalized_mu() const {
    require_gaussian();
    return (spec.mu - shift[0]) / scale[0];
  }
  double normalized_sigma() const {
    require_gaussian();
    return spec.sigma / scale[0];
  }

 private:
  void require_gaussian() const {
    if (spec.kind != "gaussian_1d")
      throw ContractError("Dataset: Gaussian parameters requested for kind '" + spec.kind + "'");
  }
};

inline DatasetSpec DatasetSpec::parse(const std::string& text) {
  DatasetSpec spec;
  const auto open = text.find('(');
  if (open == std::string::npos) {
    spec.kind = text;
    spec.dim();  // validates the kind
    return spec;
  }
  if (text.back() != ')') throw ContractError("DatasetSpec: malformed '" + text + "'");
  spec.kind = text.substr(0, open);
  std::string args = text.substr(open + 1, text.size() - open - 2);
  std::vector<double> vals;
  size_t pos = 0;
  while (pos < args.size()) {
    size_t comma = args.find(',', pos);
    if (comma == std::string::npos) comma = args.size();
    try {
      vals.push_back(std::stod(args.substr(pos, comma - pos)));
    } catch (const std::exception&) {
      throw ContractError("DatasetSpec: bad numeric argument in '" + text + "'");
    }
    pos = comma + 1;
  }
  if (spec.kind == "gaussian_1d") {
    if (vals.size() != 2) throw ContractError("gaussian_1d expects (mu, sigma)");
    spec.mu = vals[0];
    spec.sigma = vals[1];
    if (!(spec.sigma > 0.0)) throw ContractError("gaussian_1d: sigma must be positive");
  } else if (spec.kind == "mixture_2d") {
    if (vals.size() != 2) throw ContractError("mixture_2d expects (centers, comp_sigma)");
    spec.centers = static_cast<long>(vals[0]);
    spec.comp_sigma = vals[1];
    if (spec.centers < 1 || !(spec.comp_sigma > 0.0))
      throw ContractError("mixture_2d: invalid parameters");
  } else if (spec.kind == "swiss_roll_2d") {
    if (vals.size() != 1) throw ContractError("swiss_roll_2d expects (noise)");
    spec.noise = vals[0];
  } else {
    throw ContractError("DatasetSpec: unknown kind '" + spec.kind + "'");
  }
  return spec;
}

inline std::string DatasetSpec::to_string() const {
  std::ostringstream os;
  os.precision(17);
  if (kind == "gaussian_1d")
    os << "gaussian_1d(" << mu << "," << sigma << ")";
  else if (kind == "mixture_2d")
    os << "mixture_2d(" << centers << "," << comp_sigma << ")";
  else if (kind == "swiss_roll_2d")
    os << "swiss_roll_2d(" << noise << ")";
  else
    os << kind;
  return os.str();
}

namespace detail {

inline void draw_raw(const DatasetSpec& spec, long n, Rng& rng, Tensor& out) {
  constexpr double kTwoPi = 6.28318530717958647692;
  if (spec.kind == "gaussian_1d") {
    for (long i = 0; i < n; ++i) out.at(i, 0) = spec.mu + spec.sigma * rng.normal();
  } else if (spec.kind == "mixture_2d") {
    for (long i = 0; i < n; ++i) {
      const long k = rng.below(spec.centers);
      const double angle = kTwoPi * static_cast<double>(k) / static_cast<double>(spec.centers);
      out.at(i, 0) = std::cos(angle) + spec.comp_sigma * rng.normal();
      out.at(i, 1) = std::sin(angle) + spec.comp_sigma * rng.normal();
    }
  } else if (spec.kind == "swiss_roll_2d") {
    for (long i = 0; i < n; ++i) {
      const double u = rng.uniform();
      const double phi = 1.5 * kTwoPi / 2.0 * (1.0 + 2.0 * u);  // 1.5pi .. 4.5pi
      out.at(i, 0) = phi * std::cos(phi) / 10.0 + spec.noise * rng.normal();
      out.at(i, 1) = phi * std::sin(phi) / 10.0 + spec.noise * rng.normal();
    }
  } else if (spec.kind == "checkerboard_2d") {
    // 4x4 board on [-2, 2]^2, dark squares only.
    long filled = 0;
    while (filled < n) {
      const double x = rng.uniform(-2.0, 2.0);
      const double y = rng.uniform(-2.0, 2.0);
      const long ix = static_cast<long>(std::floor(x)) + 2;
      const long iy = static_cast<long>(std::floor(y)) + 2;
      if ((ix + iy) % 2 == 0) {
        out.at(filled, 0) = x;
        out.at(filled, 1) = y;
        ++filled;
      }
    }
  } else {
    throw ContractError("make_dataset: unknown kind '" + spec.kind + "'");
  }
}

}  // namespace detail

inline Dataset make_dataset(const DatasetSpec& spec, long n, std::uint64_t seed) {
  if (n < 1) throw ContractError("make_dataset: n must be >= 1");
  Dataset ds;
  ds.spec = spec;
  ds.n = n;
  ds.seed = seed;
  const long d = spec.dim();
  ds.samples = Tensor({n, d});
  Rng rng(seed);
  detail::draw_raw(spec, n, rng, ds.samples);
  if (!ds.samples.all_finite()) throw NumericError("make_dataset: non-finite raw sample");

  ds.shift.resize(d);
  ds.scale.resize(d);
  for (long j = 0; j < d; ++j) {
    double mean = 0.0;
    for (long i = 0; i < n; ++i) mean += ds.samples.at(i, j);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (long i = 0; i < n; ++i) {
      const double c = ds.samples.at(i, j) - mean;
      var += c * c;
    }
    var /= static_cast<double>(n);
    const double sd = n == 1 || var <= 0.0 ? 1.0 : std::sqrt(var);
    ds.shift[j] = mean;
    ds.scale[j] = sd;
    for (long i = 0; i < n; ++i) ds.samples.at(i, j) = (ds.samples.at(i, j) - mean) / sd;
  }
  return ds;
}

inline Dataset make_dataset(const std::string& spec_text, long n, std::uint64_t seed) {
  return make_dataset(DatasetSpec::parse(spec_text), n, seed);
}

inline Tensor denormalize(const Dataset& ds, const Tensor& x) {
  if (x.cols() != ds.dim()) throw ShapeError("denormalize: dimension mismatch");
  Tensor out(x.shape());
  for (long i = 0; i < x.rows(); ++i)
    for (long j = 0; j < x.cols(); ++j) out.at(i, j) = x.at(i, j) * ds.scale[j] + ds.shift[j];
  return out;
}

}  // namespace adt
