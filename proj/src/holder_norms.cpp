#include "schauder/holder_norms.hpp"

#include "schauder/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace schauder {

namespace {

// Nodes of the metering region {valid, |x| <= r_eval} with a lookup mask.
struct Region {
  std::vector<Eigen::Index> nodes;
  std::vector<char> mask;
};

Region metering_region(const GridFunction& f, double r_eval) {
  if (!(r_eval > 0.0)) throw std::invalid_argument("evaluation radius must be positive");
  if (r_eval > f.valid_radius() + 1e-9 * f.radius())
    throw std::invalid_argument("evaluation radius exceeds the valid region of the grid function");
  Region reg;
  reg.mask.assign(static_cast<std::size_t>(f.size()), 0);
  const double lim = r_eval * (1.0 + 1e-12) + 1e-12;
  for (Eigen::Index k = 0; k < f.size(); ++k) {
    if (f.valid(k) && f.point(k).norm() <= lim) {
      reg.mask[static_cast<std::size_t>(k)] = 1;
      reg.nodes.push_back(k);
    }
  }
  if (reg.nodes.empty()) throw std::invalid_argument("empty evaluation region");
  return reg;
}

struct Offset {
  int di = 0;
  int dj = 0;
  double inv_den = 0.0;  // 1 / |d|^alpha
  double length = 0.0;   // |d| in mesh units
};

// Half-plane offsets with 0 < |d| h <= 1 sorted by length.
std::vector<Offset> pair_offsets(const GridFunction& f, double alpha) {
  const double h = f.step();
  const int reach = static_cast<int>(std::floor(1.0 / h + 1e-9));
  std::vector<Offset> out;
  if (f.dim() == 1) {
    for (int d = 1; d <= reach; ++d) out.push_back({d, 0, 0.0, static_cast<double>(d)});
  } else {
    for (int dj = 0; dj <= reach; ++dj)
      for (int di = -reach; di <= reach; ++di) {
        if (dj == 0 && di <= 0) continue;
        const double len = std::hypot(static_cast<double>(di), static_cast<double>(dj));
        if (len * h <= 1.0 + 1e-12) out.push_back({di, dj, 0.0, len});
      }
  }
  std::stable_sort(out.begin(), out.end(), [](const Offset& a, const Offset& b) { return a.length < b.length; });
  for (auto& o : out) o.inv_den = std::pow(o.length * h, -alpha);
  return out;
}

struct PairHit {
  double value = 0.0;
  Eigen::Index node = -1;
  int di = 0;
  int dj = 0;
};

void keep_best(PairHit& best, const PairHit& cand) {
  // Ties resolved by (node, offset) so the winner never depends on scheduling.
  if (cand.value > best.value ||
      (cand.value == best.value && cand.node >= 0 &&
       (best.node < 0 || std::tie(cand.node, cand.di, cand.dj) < std::tie(best.node, best.di, best.dj))))
    best = cand;
}

class PairEvaluator {
 public:
  PairEvaluator(const GridFunction& f, const Region& reg, double alpha) : f_(f), reg_(reg), alpha_(alpha) {}

  PairHit eval(Eigen::Index k, int di, int dj) const {
    const int n = f_.points_per_axis();
    const int i2 = f_.axis_index(k, 0) + di;
    const int j2 = (f_.dim() == 2 ? f_.axis_index(k, 1) : 0) + dj;
    if (i2 < 0 || i2 >= n || j2 < 0 || (f_.dim() == 2 ? j2 >= n : j2 != 0)) return {};
    const Eigen::Index k2 = f_.index(i2, j2);
    if (!reg_.mask[static_cast<std::size_t>(k2)]) return {};
    const double len = std::hypot(static_cast<double>(di), static_cast<double>(dj)) * f_.step();
    if (len == 0.0 || len > 1.0 + 1e-12) return {};
    return {std::abs(f_[k] - f_[k2]) / std::pow(len, alpha_), k, di, dj};
  }

  // Whole offset over all region nodes.
  PairHit sweep(const Offset& o) const {
    PairHit best;
    const int n = f_.points_per_axis();
    const auto& v = f_.values();
    for (const Eigen::Index k : reg_.nodes) {
      const int i2 = f_.axis_index(k, 0) + o.di;
      const int j2 = (f_.dim() == 2 ? f_.axis_index(k, 1) : 0) + o.dj;
      if (i2 < 0 || i2 >= n || j2 < 0 || (f_.dim() == 2 && j2 >= n)) continue;
      const Eigen::Index k2 = f_.index(i2, j2);
      if (!reg_.mask[static_cast<std::size_t>(k2)]) continue;
      const double r = std::abs(v[k] - v[k2]) * o.inv_den;
      if (r > best.value) best = {r, k, o.di, o.dj};
    }
    return best;
  }

 private:
  const GridFunction& f_;
  const Region& reg_;
  double alpha_;
};

PairHit sweep_offsets(const PairEvaluator& ev, const std::vector<Offset>& offsets) {
  const int workers = thread_count();
  std::vector<PairHit> partial(static_cast<std::size_t>(workers));
  parallel_for(offsets.size(), [&](std::size_t lo, std::size_t hi, int w) {
    PairHit best;
    for (std::size_t m = lo; m < hi; ++m) keep_best(best, ev.sweep(offsets[m]));
    partial[static_cast<std::size_t>(w)] = best;
  });
  PairHit best;
  for (const auto& p : partial) keep_best(best, p);
  return best;
}

// 4th-order central stencils: weights for offsets -hw..hw and the power of h.
struct Stencil {
  std::vector<double> w;
  double scale = 1.0;
  int hw = 0;
};

Stencil stencil(int order) {
  switch (order) {
    case 1:
      return {{1.0, -8.0, 0.0, 8.0, -1.0}, 12.0, 2};
    case 2:
      return {{-1.0, 16.0, -30.0, 16.0, -1.0}, 12.0, 2};
    case 3:
      return {{1.0, -8.0, 13.0, 0.0, -13.0, 8.0, -1.0}, 8.0, 3};
    default:
      throw std::invalid_argument("derivative order along one axis must be 1, 2 or 3");
  }
}

GridFunction differentiate_axis(const GridFunction& f, int axis, int order) {
  if (order == 0) return f;
  const Stencil st = stencil(order);
  const double denom = st.scale * std::pow(f.step(), order);
  GridFunction out(f.dim(), f.radius(), f.step(), f.margin() + st.hw);
  if (out.valid_radius() <= 0.0) throw std::invalid_argument("insufficient margin for the derivative stencil");
  for (Eigen::Index k = 0; k < f.size(); ++k) {
    if (!out.valid(k)) continue;
    const int i = f.axis_index(k, 0);
    const int j = f.dim() == 2 ? f.axis_index(k, 1) : 0;
    double acc = 0.0;
    for (int s = -st.hw; s <= st.hw; ++s) {
      const double w = st.w[static_cast<std::size_t>(s + st.hw)];
      if (w == 0.0) continue;
      acc += w * (axis == 0 ? f[f.index(i + s, j)] : f[f.index(i, j + s)]);
    }
    out[k] = acc / denom;
  }
  return out;
}

}  // namespace

std::vector<MultiIndex> multi_indices(int dim, int order) {
  if (dim == 1) return {MultiIndex{order, 0}};
  std::vector<MultiIndex> out;
  for (int a = order; a >= 0; --a) out.push_back({a, order - a});
  return out;
}

int stencil_half_width(int order) { return order == 0 ? 0 : stencil(order).hw; }

double sup_norm(const GridFunction& f, double r_eval) {
  const Region reg = metering_region(f, r_eval);
  double m = 0.0;
  for (const Eigen::Index k : reg.nodes) m = std::max(m, std::abs(f[k]));
  return m;
}

double holder_seminorm(const GridFunction& f, double alpha, double r_eval, std::size_t pair_cap,
                       std::uint64_t seed) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("Holder exponent must lie in (0, 1)");
  if (pair_cap < 10000) throw std::invalid_argument("pair_cap must be at least 1e4");
  const Region reg = metering_region(f, r_eval);
  const std::vector<Offset> offsets = pair_offsets(f, alpha);
  if (offsets.empty()) return 0.0;
  const PairEvaluator ev(f, reg, alpha);
  const double nodes = static_cast<double>(reg.nodes.size());

  if (nodes * static_cast<double>(offsets.size()) <= static_cast<double>(pair_cap))
    return sweep_offsets(ev, offsets).value;

  // Stratified search. Short offsets are swept completely.
  const double half = static_cast<double>(pair_cap) / 2.0;
  std::size_t n_short = std::max<std::size_t>(1, static_cast<std::size_t>(half / nodes));
  n_short = std::min(n_short, offsets.size());
  const std::vector<Offset> shorts(offsets.begin(), offsets.begin() + static_cast<std::ptrdiff_t>(n_short));
  PairHit best = sweep_offsets(ev, shorts);

  // Geometric ladder of longer offsets, random starts.
  std::vector<Offset> ladder;
  if (n_short < offsets.size()) {
    const double max_len = offsets.back().length;
    std::vector<double> lengths;
    for (double len = std::max(offsets[n_short].length, 1.0); len < max_len; len *= 1.5) lengths.push_back(len);
    lengths.push_back(max_len);
    const int dirs = f.dim() == 1 ? 1 : 8;
    for (const double len : lengths)
      for (int d = 0; d < dirs; ++d) {
        const double ang = M_PI * d / dirs;
        const int di = static_cast<int>(std::lround(len * std::cos(ang)));
        const int dj = f.dim() == 1 ? 0 : static_cast<int>(std::lround(len * std::sin(ang)));
        const double l = std::hypot(static_cast<double>(di), static_cast<double>(dj));
        if (l == 0.0 || l * f.step() > 1.0 + 1e-12) continue;
        if (dj < 0 || (dj == 0 && di <= 0)) continue;
        const bool dup = std::any_of(ladder.begin(), ladder.end(), [&](const Offset& o) { return o.di == di && o.dj == dj; });
        if (!dup) ladder.push_back({di, dj, std::pow(l * f.step(), -alpha), l});
      }
  }
  if (!ladder.empty()) {
    const auto starts_per = static_cast<std::size_t>(half / static_cast<double>(ladder.size()));
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, reg.nodes.size() - 1);
    std::vector<std::vector<Eigen::Index>> starts(ladder.size());
    for (auto& s : starts) {
      if (starts_per >= reg.nodes.size()) {
        s = reg.nodes;
      } else {
        s.resize(starts_per);
        for (auto& k : s) k = reg.nodes[pick(rng)];
      }
    }
    std::vector<PairHit> hits(ladder.size());
    parallel_tasks(ladder.size(), [&](std::size_t m) {
      PairHit b;
      for (const Eigen::Index k : starts[m]) keep_best(b, ev.eval(k, ladder[m].di, ladder[m].dj));
      hits[m] = b;
    });
    for (const auto& hit : hits) keep_best(best, hit);
  }

  // Local refinement around the best pair found.
  if (best.node >= 0) {
    const int rad = 3;
    const int i0 = f.axis_index(best.node, 0);
    const int j0 = f.dim() == 2 ? f.axis_index(best.node, 1) : 0;
    const int n = f.points_per_axis();
    const int jr = f.dim() == 2 ? rad : 0;
    for (int sj = -jr; sj <= jr; ++sj)
      for (int si = -rad; si <= rad; ++si) {
        const int i = i0 + si, j = j0 + sj;
        if (i < 0 || i >= n || j < 0 || (f.dim() == 2 ? j >= n : j != 0)) continue;
        const Eigen::Index k = f.index(i, j);
        if (!reg.mask[static_cast<std::size_t>(k)]) continue;
        for (int ej = -jr; ej <= jr; ++ej)
          for (int ei = -rad; ei <= rad; ++ei) keep_best(best, ev.eval(k, best.di + ei, best.dj + ej));
      }
  }
  return best.value;
}

GridFunction derivative(const GridFunction& f, const MultiIndex& beta) {
  if (beta[0] < 0 || beta[1] < 0 || beta[0] + beta[1] > 3) throw std::invalid_argument("derivative order must be <= 3");
  if (f.dim() == 1 && beta[1] != 0) throw std::invalid_argument("multi-index exceeds grid dimension");
  GridFunction out = differentiate_axis(f, 0, beta[0]);
  if (beta[1] > 0) out = differentiate_axis(out, 1, beta[1]);
  return out;
}

HolderNormEstimate ck_alpha_norm(const GridFunction& f, int k, double alpha, double r_eval, const NormOptions& opts) {
  if (k < 0 || k > 3) throw std::invalid_argument("norm order must be in 0..3");
  if (!(alpha >= 0.0 && alpha < 1.0)) throw std::invalid_argument("Holder exponent must lie in [0, 1)");
  HolderNormEstimate est;
  est.order = k;
  est.alpha = alpha;
  est.r_eval = r_eval;
  est.sup_terms.assign(static_cast<std::size_t>(k) + 1, 0.0);
  for (int m = 0; m <= k; ++m) {
    for (const auto& beta : multi_indices(f.dim(), m)) {
      const GridFunction d = m == 0 ? f : derivative(f, beta);
      est.sup_terms[static_cast<std::size_t>(m)] += sup_norm(d, r_eval);
      if (m == k && alpha > 0.0) est.seminorm += holder_seminorm(d, alpha, r_eval, opts.pair_cap, opts.seed);
    }
  }
  est.value = est.seminorm;
  for (const double s : est.sup_terms) est.value += s;
  return est;
}

HolderNormEstimate fractional_norm(const GridFunction& f, double beta, double r_eval, const NormOptions& opts) {
  if (!(beta >= 0.0 && beta <= 3.0)) throw std::invalid_argument("norm order must lie in [0, 3]");
  const double k = std::floor(beta);
  return ck_alpha_norm(f, static_cast<int>(k), beta - k, r_eval, opts);
}

double interpolation_inequality_check(const GridFunction& f, double theta, double r_eval, const NormOptions& opts) {
  const double s = sup_norm(f, r_eval);
  if (s == 0.0) return 0.0;
  const double c1 = ck_alpha_norm(f, 1, 0.0, r_eval, opts).value;
  const double c2 = ck_alpha_norm(f, 2, 0.0, r_eval, opts).value;
  const double top = ck_alpha_norm(f, 2, theta, r_eval, opts).value;
  const double r1 = c1 / (std::pow(s, (1.0 + theta) / (2.0 + theta)) * std::pow(top, 1.0 / (2.0 + theta)));
  const double r2 = c2 / (std::pow(s, theta / (2.0 + theta)) * std::pow(top, 2.0 / (2.0 + theta)));
  return std::max(r1, r2);
}

}  // namespace schauder
