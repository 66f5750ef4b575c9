#include "kamnf/fourier_taylor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <unordered_map>

namespace kam {

namespace {

struct TermIndexHash {
  std::size_t operator()(const TermIndex& t) const noexcept {
    const auto a = std::bit_cast<std::uint64_t>(t.k);
    const auto b = std::bit_cast<std::uint64_t>(t.m);
    std::uint64_t h = a * 0x9E3779B97F4A7C15ull;
    h ^= b + 0x9E3779B97F4A7C15ull + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

using TermMap = std::unordered_map<TermIndex, Complex, TermIndexHash>;

std::vector<Term> to_terms(TermMap&& acc) {
  std::vector<Term> out;
  out.reserve(acc.size());
  for (auto& [index, c] : acc) out.push_back({index, c});
  return out;
}

int checked_dim(const FourierTaylorSeries& f, const char* op) {
  if (f.dim() <= 0) {
    throw DimensionError(std::string(op) + ": series has dimension 0");
  }
  return f.dim();
}

void require_same_dim(const FourierTaylorSeries& f, const FourierTaylorSeries& g,
                      const char* op) {
  checked_dim(f, op);
  if (f.dim() != g.dim()) {
    throw DimensionError(std::string(op) + ": dimensions " +
                         std::to_string(f.dim()) + " and " +
                         std::to_string(g.dim()) + " differ");
  }
}

// Integer power with 0^0 = 1; exact for the small exponents in play.
double pow_int(double base, int exp) {
  double out = 1.0;
  for (int i = 0; i < exp; ++i) out *= base;
  return out;
}

}  // namespace

AnalyticityDomain AnalyticityDomain::shrink(double delta) const {
  if (!(delta >= 0.0)) {
    throw ValidationError("domain shrink: delta must be >= 0");
  }
  AnalyticityDomain out{rho - delta, delta_strip - delta};
  if (out.rho < 0.0 || out.delta_strip < 0.0) {
    std::ostringstream msg;
    msg << "domain shrink: radii (" << rho << ", " << delta_strip
        << ") cannot shrink by " << delta;
    throw ValidationError(msg.str());
  }
  return out;
}

int TermIndex::k_sup() const {
  int out = 0;
  for (int i = 0; i < kMaxDim; ++i) out = std::max(out, std::abs(int(k[i])));
  return out;
}

int TermIndex::k_abs_sum() const {
  int out = 0;
  for (int i = 0; i < kMaxDim; ++i) out += std::abs(int(k[i]));
  return out;
}

int TermIndex::degree() const {
  int out = 0;
  for (int i = 0; i < kMaxDim; ++i) out += m[i];
  return out;
}

TermIndex make_index(std::span<const int> k, std::span<const int> m) {
  if (k.size() != m.size() || k.empty() || k.size() > std::size_t(kMaxDim)) {
    throw DimensionError("make_index: k and m must share a length in 1.." +
                         std::to_string(kMaxDim));
  }
  TermIndex out;
  for (std::size_t i = 0; i < k.size(); ++i) {
    if (std::abs(k[i]) > std::numeric_limits<int16_t>::max() / 2) {
      throw DimensionError("make_index: Fourier index out of range");
    }
    if (m[i] < 0 || m[i] > std::numeric_limits<int16_t>::max() / 2) {
      throw DimensionError("make_index: Taylor power out of range");
    }
    out.k[i] = static_cast<int16_t>(k[i]);
    out.m[i] = static_cast<int16_t>(m[i]);
  }
  return out;
}

TermIndex make_index(std::initializer_list<int> k, std::initializer_list<int> m) {
  return make_index(std::span<const int>(k.begin(), k.size()),
                    std::span<const int>(m.begin(), m.size()));
}

void TruncationStats::merge(const TruncationStats& other) {
  discarded_mass += other.discarded_mass;
  aliasing_mass += other.aliasing_mass;
  aliasing_warning = aliasing_warning || other.aliasing_warning;
}

FourierTaylorSeries::FourierTaylorSeries(int dim, int fourier_cutoff,
                                         int taylor_degree,
                                         std::vector<Term> terms,
                                         TruncationStats* stats,
                                         double drop_threshold)
    : dim_(dim), fourier_cutoff_(fourier_cutoff), taylor_degree_(taylor_degree) {
  if (dim < 1 || dim > kMaxDim) {
    throw DimensionError("series dimension must be in 1.." +
                         std::to_string(kMaxDim));
  }
  if (fourier_cutoff < 0 || fourier_cutoff > kMaxFourierCutoff ||
      taylor_degree < 0 || taylor_degree > kMaxTaylorDegree) {
    throw ValidationError("series cutoffs out of range");
  }

  // Sum duplicates first so cancellation happens before thresholding.
  std::map<TermIndex, Complex> acc;
  for (const Term& t : terms) {
    for (int i = dim; i < kMaxDim; ++i) {
      if (t.index.k[i] != 0 || t.index.m[i] != 0) {
        throw DimensionError("term index has entries beyond the series dimension");
      }
    }
    for (int i = 0; i < dim; ++i) {
      if (t.index.m[i] < 0) throw ValidationError("negative Taylor power");
    }
    if (!std::isfinite(t.coeff.real()) || !std::isfinite(t.coeff.imag())) {
      throw ValidationError("non-finite series coefficient");
    }
    acc[t.index] += t.coeff;
  }

  double cut_mass = 0.0;
  double max_abs = 0.0;
  for (auto it = acc.begin(); it != acc.end();) {
    const bool inside = it->first.k_sup() <= fourier_cutoff &&
                        it->first.degree() <= taylor_degree;
    if (!inside) {
      cut_mass += std::abs(it->second);
      it = acc.erase(it);
    } else {
      max_abs = std::max(max_abs, std::abs(it->second));
      ++it;
    }
  }

  const double floor = drop_threshold * max_abs;
  terms_.reserve(acc.size());
  for (const auto& [index, c] : acc) {
    const double mag = std::abs(c);
    if (mag == 0.0 || mag < floor) {
      cut_mass += mag;
      continue;
    }
    terms_.push_back({index, c});
  }
  if (stats != nullptr) stats->discarded_mass += cut_mass;
}

FourierTaylorSeries FourierTaylorSeries::zero(int dim, int fourier_cutoff,
                                              int taylor_degree) {
  return FourierTaylorSeries(dim, fourier_cutoff, taylor_degree, {});
}

FourierTaylorSeries FourierTaylorSeries::constant(int dim, int fourier_cutoff,
                                                  int taylor_degree,
                                                  Complex value) {
  return FourierTaylorSeries(dim, fourier_cutoff, taylor_degree,
                             {{TermIndex{}, value}});
}

Complex FourierTaylorSeries::coeff(const TermIndex& index) const {
  auto it = std::lower_bound(
      terms_.begin(), terms_.end(), index,
      [](const Term& t, const TermIndex& i) { return t.index < i; });
  if (it != terms_.end() && it->index == index) return it->coeff;
  return Complex(0.0, 0.0);
}

double FourierTaylorSeries::max_abs_coeff() const {
  double out = 0.0;
  for (const Term& t : terms_) out = std::max(out, std::abs(t.coeff));
  return out;
}

bool FourierTaylorSeries::is_conjugate_symmetric(double tol) const {
  const double scale = std::max(max_abs_coeff(), 1e-300);
  for (const Term& t : terms_) {
    TermIndex reflected = t.index;
    for (int i = 0; i < dim_; ++i) reflected.k[i] = -reflected.k[i];
    if (std::abs(t.coeff - std::conj(coeff(reflected))) > tol * scale) {
      return false;
    }
  }
  return true;
}

FourierTaylorSeries add(const FourierTaylorSeries& f, const FourierTaylorSeries& g) {
  require_same_dim(f, g, "add");
  std::vector<Term> terms(f.terms().begin(), f.terms().end());
  terms.insert(terms.end(), g.terms().begin(), g.terms().end());
  return FourierTaylorSeries(f.dim(),
                             std::max(f.fourier_cutoff(), g.fourier_cutoff()),
                             std::max(f.taylor_degree(), g.taylor_degree()),
                             std::move(terms));
}

FourierTaylorSeries sub(const FourierTaylorSeries& f, const FourierTaylorSeries& g) {
  return add(f, scale(g, Complex(-1.0, 0.0)));
}

FourierTaylorSeries scale(const FourierTaylorSeries& f, Complex factor) {
  checked_dim(f, "scale");
  std::vector<Term> terms(f.terms().begin(), f.terms().end());
  for (Term& t : terms) t.coeff *= factor;
  return FourierTaylorSeries(f.dim(), f.fourier_cutoff(), f.taylor_degree(),
                             std::move(terms));
}

FourierTaylorSeries multiply(const FourierTaylorSeries& f,
                             const FourierTaylorSeries& g,
                             TruncationStats* stats) {
  require_same_dim(f, g, "multiply");
  const int dim = f.dim();
  const int k_out = std::max(f.fourier_cutoff(), g.fourier_cutoff());
  const int m_out = std::max(f.taylor_degree(), g.taylor_degree());

  TermMap acc;
  acc.reserve(f.size() + g.size() + std::min(f.size() * g.size(), std::size_t(1) << 20));
  double cut_mass = 0.0;
  for (const Term& a : f.terms()) {
    for (const Term& b : g.terms()) {
      TermIndex index;
      bool inside = true;
      int deg = 0;
      for (int i = 0; i < dim; ++i) {
        const int k = int(a.index.k[i]) + int(b.index.k[i]);
        const int m = int(a.index.m[i]) + int(b.index.m[i]);
        if (std::abs(k) > k_out) inside = false;
        deg += m;
        index.k[i] = static_cast<int16_t>(k);
        index.m[i] = static_cast<int16_t>(m);
      }
      if (deg > m_out) inside = false;
      if (!inside) {
        cut_mass += std::abs(a.coeff * b.coeff);
        continue;
      }
      acc[index] += a.coeff * b.coeff;
    }
  }
  if (stats != nullptr) stats->discarded_mass += cut_mass;
  return FourierTaylorSeries(dim, k_out, m_out, to_terms(std::move(acc)), stats);
}

FourierTaylorSeries partial_theta(const FourierTaylorSeries& f, int j) {
  const int dim = checked_dim(f, "partial_theta");
  if (j < 0 || j >= dim) throw DimensionError("partial_theta: axis out of range");
  std::vector<Term> terms;
  terms.reserve(f.size());
  for (const Term& t : f.terms()) {
    if (t.index.k[j] == 0) continue;
    terms.push_back({t.index, t.coeff * Complex(0.0, double(t.index.k[j]))});
  }
  return FourierTaylorSeries(dim, f.fourier_cutoff(), f.taylor_degree(),
                             std::move(terms));
}

FourierTaylorSeries partial_r(const FourierTaylorSeries& f, int j) {
  const int dim = checked_dim(f, "partial_r");
  if (j < 0 || j >= dim) throw DimensionError("partial_r: axis out of range");
  std::vector<Term> terms;
  terms.reserve(f.size());
  for (const Term& t : f.terms()) {
    if (t.index.m[j] == 0) continue;
    Term out = t;
    out.coeff *= double(t.index.m[j]);
    out.index.m[j] = static_cast<int16_t>(t.index.m[j] - 1);
    terms.push_back(out);
  }
  return FourierTaylorSeries(dim, f.fourier_cutoff(), f.taylor_degree(),
                             std::move(terms));
}

FourierTaylorSeries average(const FourierTaylorSeries& f) {
  checked_dim(f, "average");
  std::vector<Term> terms;
  for (const Term& t : f.terms()) {
    if (t.index.k_sup() == 0) terms.push_back(t);
  }
  return FourierTaylorSeries(f.dim(), f.fourier_cutoff(), f.taylor_degree(),
                             std::move(terms));
}

FourierTaylorSeries truncated(const FourierTaylorSeries& f, int fourier_cutoff,
                              int taylor_degree, TruncationStats* stats) {
  checked_dim(f, "truncated");
  std::vector<Term> terms(f.terms().begin(), f.terms().end());
  return FourierTaylorSeries(f.dim(), fourier_cutoff, taylor_degree,
                             std::move(terms), stats);
}

FourierTaylorSeries action_monomial(int dim, int fourier_cutoff,
                                    int taylor_degree, int axis) {
  if (axis < 0 || axis >= dim) {
    throw DimensionError("action monomial: axis out of range");
  }
  if (taylor_degree < 1) {
    throw ValidationError("action monomial: the degree cutoff must be >= 1");
  }
  std::vector<int> k(static_cast<std::size_t>(dim), 0);
  std::vector<int> m(static_cast<std::size_t>(dim), 0);
  m[static_cast<std::size_t>(axis)] = 1;
  return FourierTaylorSeries(dim, fourier_cutoff, taylor_degree,
                             {{make_index(k, m), Complex(1.0)}});
}

FourierTaylorSeries symmetrized(const FourierTaylorSeries& f) {
  const int dim = checked_dim(f, "symmetrized");
  std::vector<Term> terms;
  terms.reserve(2 * f.size());
  for (const Term& t : f.terms()) {
    terms.push_back({t.index, 0.5 * t.coeff});
    TermIndex reflected = t.index;
    for (int i = 0; i < dim; ++i) reflected.k[i] = -reflected.k[i];
    terms.push_back({reflected, 0.5 * std::conj(t.coeff)});
  }
  return FourierTaylorSeries(dim, f.fourier_cutoff(), f.taylor_degree(),
                             std::move(terms));
}

Complex evaluate(const FourierTaylorSeries& f, std::span<const Complex> r,
                 std::span<const Complex> theta) {
  const int dim = checked_dim(f, "evaluate");
  if (r.size() != std::size_t(dim) || theta.size() != std::size_t(dim)) {
    throw DimensionError("evaluate: point dimension mismatch");
  }
  const int K = f.fourier_cutoff();
  const int M = f.taylor_degree();

  // Per-axis power tables: phases[a][K+j] = e^{i j theta_a}, powers[a][p] = r_a^p.
  std::vector<Complex> phases(std::size_t(dim) * (2 * K + 1));
  std::vector<Complex> powers(std::size_t(dim) * (M + 1));
  for (int a = 0; a < dim; ++a) {
    Complex* ph = phases.data() + std::size_t(a) * (2 * K + 1);
    const Complex p = std::exp(Complex(0.0, 1.0) * theta[a]);
    const Complex pinv = Complex(1.0, 0.0) / p;
    ph[K] = Complex(1.0, 0.0);
    for (int j = 1; j <= K; ++j) {
      ph[K + j] = ph[K + j - 1] * p;
      ph[K - j] = ph[K - j + 1] * pinv;
    }
    Complex* pw = powers.data() + std::size_t(a) * (M + 1);
    pw[0] = Complex(1.0, 0.0);
    for (int p2 = 1; p2 <= M; ++p2) pw[p2] = pw[p2 - 1] * r[a];
  }

  Complex out(0.0, 0.0);
  for (const Term& t : f.terms()) {
    Complex v = t.coeff;
    for (int a = 0; a < dim; ++a) {
      v *= phases[std::size_t(a) * (2 * K + 1) + std::size_t(K + t.index.k[a])];
      v *= powers[std::size_t(a) * (M + 1) + std::size_t(t.index.m[a])];
    }
    out += v;
  }
  return out;
}

Complex evaluate(const FourierTaylorSeries& f, std::span<const double> r,
                 std::span<const double> theta) {
  std::vector<Complex> rc(r.begin(), r.end());
  std::vector<Complex> tc(theta.begin(), theta.end());
  return evaluate(f, rc, tc);
}

double strip_norm_majorant(const FourierTaylorSeries& f,
                           const AnalyticityDomain& domain) {
  checked_dim(f, "strip_norm_majorant");
  if (!(domain.rho >= 0.0) || !(domain.delta_strip >= 0.0)) {
    throw ValidationError("strip_norm_majorant: domain radii must be >= 0");
  }
  double out = 0.0;
  for (const Term& t : f.terms()) {
    out += std::abs(t.coeff) * pow_int(domain.rho, t.index.degree()) *
           std::exp(domain.delta_strip * t.index.k_abs_sum());
  }
  if (!std::isfinite(out)) {
    throw MajorantOverflowError("strip norm is not finite on the given domain");
  }
  return out;
}

// --- discrete Fourier transform (power-of-two sizes) -----------------------

namespace {

void fft_line(Complex* data, int n, const std::vector<Complex>& twiddle,
              bool forward) {
  for (int i = 1, j = 0; i < n; ++i) {
    int bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j |= bit;
    if (i < j) std::swap(data[i], data[j]);
  }
  for (int len = 2; len <= n; len <<= 1) {
    const int step = n / len;
    for (int i = 0; i < n; i += len) {
      for (int j = 0; j < len / 2; ++j) {
        Complex w = twiddle[std::size_t(j) * step];
        if (!forward) w = std::conj(w);
        const Complex u = data[i + j];
        const Complex t = w * data[i + j + len / 2];
        data[i + j] = u + t;
        data[i + j + len / 2] = u - t;
      }
    }
  }
}

// In-place transform along every axis of a hypercube grid with n points per
// axis (row-major layout).  forward: X_k = sum_g x_g e^{-2 pi i k.g / n}.
void fft_nd(std::vector<Complex>& data, int dim, int n, bool forward) {
  std::vector<Complex> twiddle(std::size_t(n) / 2);
  for (int j = 0; j < n / 2; ++j) {
    twiddle[j] = std::polar(1.0, -2.0 * std::numbers::pi * j / n);
  }
  std::vector<Complex> line(n);
  std::size_t n_points = 1;
  for (int a = 0; a < dim; ++a) n_points *= std::size_t(n);

  for (int axis = 0; axis < dim; ++axis) {
    std::size_t stride = 1;
    for (int a = axis + 1; a < dim; ++a) stride *= std::size_t(n);
    const std::size_t block = stride * std::size_t(n);
    for (std::size_t base = 0; base < n_points; base += block) {
      for (std::size_t off = 0; off < stride; ++off) {
        for (int i = 0; i < n; ++i) line[i] = data[base + off + stride * i];
        fft_line(line.data(), n, twiddle, forward);
        for (int i = 0; i < n; ++i) data[base + off + stride * i] = line[i];
      }
    }
  }
}

int next_pow2(int n) {
  int out = 1;
  while (out < n) out <<= 1;
  return out;
}

}  // namespace

// --- angle substitution -----------------------------------------------------

AngleComposition::AngleComposition(std::span<const FourierTaylorSeries> shift,
                                   int output_cutoff)
    : cutoff_(output_cutoff) {
  if (shift.empty()) throw DimensionError("angle shift must have >= 1 component");
  dim_ = shift[0].dim();
  if (dim_ < 1 || shift.size() != std::size_t(dim_)) {
    throw DimensionError("angle shift needs one component per angle");
  }
  if (output_cutoff < 0 || output_cutoff > kMaxFourierCutoff) {
    throw ValidationError("angle composition cutoff out of range");
  }
  identity_ = true;
  int shift_cutoff = 0;
  for (const FourierTaylorSeries& v : shift) {
    if (v.dim() != dim_) throw DimensionError("angle shift dimension mismatch");
    for (const Term& t : v.terms()) {
      if (t.index.degree() != 0) {
        throw ValidationError("angle shift must not depend on the actions");
      }
    }
    identity_ = identity_ && v.empty();
    shift_cutoff = std::max(shift_cutoff, v.fourier_cutoff());
  }
  if (identity_) return;

  grid_n_ = next_pow2(2 * (2 * output_cutoff + 1));
  grid_n_ = std::max(grid_n_, next_pow2(2 * shift_cutoff + 2));
  n_points_ = 1;
  for (int a = 0; a < dim_; ++a) n_points_ *= std::size_t(grid_n_);

  // Synthesize each shift component on the grid by zero-padded inverse DFT.
  std::vector<std::vector<Complex>> shift_vals(dim_);
  for (int a = 0; a < dim_; ++a) {
    std::vector<Complex>& vals = shift_vals[a];
    vals.assign(n_points_, Complex(0.0, 0.0));
    for (const Term& t : shift[a].terms()) {
      std::size_t idx = 0;
      for (int b = 0; b < dim_; ++b) {
        const int kb = t.index.k[b];
        const int cell = kb >= 0 ? kb : kb + grid_n_;
        idx = idx * std::size_t(grid_n_) + std::size_t(cell);
      }
      vals[idx] += t.coeff;
    }
    fft_nd(vals, dim_, grid_n_, /*forward=*/false);
  }

  const std::size_t width = std::size_t(2 * cutoff_ + 1);
  phase_powers_.resize(std::size_t(dim_) * n_points_ * width);
  std::vector<std::size_t> coords(dim_, 0);
  for (std::size_t g = 0; g < n_points_; ++g) {
    std::size_t rem = g;
    for (int a = dim_ - 1; a >= 0; --a) {
      coords[a] = rem % std::size_t(grid_n_);
      rem /= std::size_t(grid_n_);
    }
    for (int a = 0; a < dim_; ++a) {
      const double theta = 2.0 * std::numbers::pi * double(coords[a]) / grid_n_;
      const Complex p =
          std::exp(Complex(0.0, 1.0) * (theta + shift_vals[a][g]));
      Complex* row = phase_powers_.data() + (std::size_t(a) * n_points_ + g) * width;
      const Complex pinv = Complex(1.0, 0.0) / p;
      row[cutoff_] = Complex(1.0, 0.0);
      for (int j = 1; j <= cutoff_; ++j) {
        row[cutoff_ + j] = row[cutoff_ + j - 1] * p;
        row[cutoff_ - j] = row[cutoff_ - j + 1] * pinv;
      }
    }
  }
}

FourierTaylorSeries AngleComposition::apply(const FourierTaylorSeries& f,
                                            TruncationStats* stats) const {
  checked_dim(f, "compose_angle");
  if (f.dim() != dim_) throw DimensionError("compose_angle: dimension mismatch");
  if (identity_) return truncated(f, cutoff_, f.taylor_degree(), stats);

  // Group terms into r-monomial slices; each slice is resampled separately.
  std::map<std::array<int16_t, kMaxDim>, std::vector<const Term*>> slices;
  for (const Term& t : f.terms()) slices[t.index.m].push_back(&t);

  const std::size_t width = std::size_t(2 * cutoff_ + 1);
  std::vector<Complex> vals;
  std::vector<Term> candidates;
  double aliasing = 0.0;

  for (const auto& [m, slice] : slices) {
    vals.assign(n_points_, Complex(0.0, 0.0));
    for (const Term* t : slice) {
      if (t->index.k_sup() > cutoff_) {
        // Mode outside the representable band of the phase tables.
        if (stats != nullptr) stats->discarded_mass += std::abs(t->coeff);
        continue;
      }
      const Complex c = t->coeff;
      for (std::size_t g = 0; g < n_points_; ++g) {
        Complex v = c;
        for (int a = 0; a < dim_; ++a) {
          v *= phase_powers_[(std::size_t(a) * n_points_ + g) * width +
                             std::size_t(cutoff_ + t->index.k[a])];
        }
        vals[g] += v;
      }
    }
    fft_nd(vals, dim_, grid_n_, /*forward=*/true);
    const double norm = 1.0 / double(n_points_);

    std::vector<std::size_t> coords(dim_, 0);
    for (std::size_t g = 0; g < n_points_; ++g) {
      const Complex c = vals[g] * norm;
      if (c == Complex(0.0, 0.0)) continue;
      std::size_t rem = g;
      bool inside = true;
      TermIndex index;
      index.m = m;
      for (int a = dim_ - 1; a >= 0; --a) {
        const int cell = int(rem % std::size_t(grid_n_));
        rem /= std::size_t(grid_n_);
        const int k = cell <= grid_n_ / 2 ? cell : cell - grid_n_;
        if (std::abs(k) > cutoff_) inside = false;
        index.k[a] = static_cast<int16_t>(k);
      }
      if (inside) {
        candidates.push_back({index, c});
      } else {
        aliasing += std::abs(c);
      }
    }
  }

  if (stats != nullptr) {
    stats->aliasing_mass += aliasing;
    double max_abs = 0.0;
    for (const Term& t : candidates) max_abs = std::max(max_abs, std::abs(t.coeff));
    if (aliasing > kAliasingWarnThreshold * max_abs && max_abs > 0.0) {
      stats->aliasing_warning = true;
    }
  }
  return FourierTaylorSeries(dim_, cutoff_, f.taylor_degree(),
                             std::move(candidates), stats);
}

FourierTaylorSeries compose_angle(const FourierTaylorSeries& f,
                                  std::span<const FourierTaylorSeries> shift,
                                  TruncationStats* stats) {
  int cutoff = f.fourier_cutoff();
  for (const FourierTaylorSeries& v : shift) {
    cutoff = std::max(cutoff, v.fourier_cutoff());
  }
  return AngleComposition(shift, cutoff).apply(f, stats);
}

// --- action substitution ----------------------------------------------------

FourierTaylorSeries shift_actions(const FourierTaylorSeries& f,
                                  std::span<const FourierTaylorSeries> delta_r,
                                  int min_order, TruncationStats* stats) {
  const int dim = checked_dim(f, "shift_actions");
  if (delta_r.size() != std::size_t(dim)) {
    throw DimensionError("shift_actions: one shift per action required");
  }
  int k_out = f.fourier_cutoff();
  int m_out = f.taylor_degree();
  bool all_zero = true;
  for (const FourierTaylorSeries& s : delta_r) {
    if (s.dim() != dim) throw DimensionError("shift_actions: dimension mismatch");
    k_out = std::max(k_out, s.fourier_cutoff());
    m_out = std::max(m_out, s.taylor_degree());
    all_zero = all_zero && s.empty();
  }
  if (all_zero) {
    if (min_order > 0) return FourierTaylorSeries::zero(dim, k_out, m_out);
    return truncated(f, k_out, m_out, stats);
  }

  // Needed powers of each shift component.
  std::array<int, kMaxDim> max_pow{};
  for (const Term& t : f.terms()) {
    for (int i = 0; i < dim; ++i) {
      max_pow[i] = std::max(max_pow[i], int(t.index.m[i]));
    }
  }
  std::vector<std::vector<FourierTaylorSeries>> dr_pow(dim);
  for (int i = 0; i < dim; ++i) {
    dr_pow[i].push_back(FourierTaylorSeries::constant(dim, k_out, m_out, 1.0));
    for (int p = 1; p <= max_pow[i]; ++p) {
      dr_pow[i].push_back(multiply(dr_pow[i].back(), delta_r[i], stats));
    }
  }

  // Binomial table up to the largest power in play.
  const int max_m = *std::max_element(max_pow.begin(), max_pow.end());
  std::vector<std::vector<double>> binom(max_m + 1);
  for (int n = 0; n <= max_m; ++n) {
    binom[n].assign(n + 1, 1.0);
    for (int p = 1; p < n; ++p) binom[n][p] = binom[n - 1][p - 1] + binom[n - 1][p];
  }

  // Group f's terms by Taylor monomial; substitute each group once.
  std::map<std::array<int16_t, kMaxDim>, std::vector<Term>> groups;
  for (const Term& t : f.terms()) {
    Term slice = t;
    slice.index.m = {};
    groups[t.index.m].push_back(slice);
  }

  std::vector<Term> out_terms;
  for (const auto& [m, slice_terms] : groups) {
    // graded[q] accumulates the terms that carry exactly q shift factors.
    std::vector<FourierTaylorSeries> graded;
    graded.push_back(FourierTaylorSeries(dim, k_out, m_out, slice_terms));
    for (int i = 0; i < dim; ++i) {
      const int mi = m[i];
      if (mi == 0) continue;
      // (r_i + dr_i)^{mi} = sum_p C(mi,p) r_i^{mi-p} dr_i^p.
      std::vector<FourierTaylorSeries> factor_by_order;
      for (int p = 0; p <= mi; ++p) {
        TermIndex mono;
        mono.m[i] = static_cast<int16_t>(mi - p);
        FourierTaylorSeries base(dim, k_out, m_out, {{mono, binom[mi][p]}});
        factor_by_order.push_back(multiply(base, dr_pow[i][p], stats));
      }
      std::vector<FourierTaylorSeries> next(graded.size() + std::size_t(mi),
                                            FourierTaylorSeries::zero(dim, k_out, m_out));
      for (std::size_t q = 0; q < graded.size(); ++q) {
        if (graded[q].empty()) continue;
        for (int p = 0; p <= mi; ++p) {
          if (factor_by_order[p].empty()) continue;
          next[q + std::size_t(p)] =
              add(next[q + std::size_t(p)],
                  multiply(graded[q], factor_by_order[p], stats));
        }
      }
      graded = std::move(next);
    }
    for (std::size_t q = std::size_t(std::max(min_order, 0)); q < graded.size(); ++q) {
      out_terms.insert(out_terms.end(), graded[q].terms().begin(),
                       graded[q].terms().end());
    }
  }
  return FourierTaylorSeries(dim, k_out, m_out, std::move(out_terms), stats);
}

}  // namespace kam
