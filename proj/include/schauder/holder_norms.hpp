#pragma once

#include "schauder/grid_function.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace schauder {

/// Multi-index (derivative counts along x and y).
using MultiIndex = std::array<int, 2>;

/// All multi-indices of total order `order` in dimension `dim`.
std::vector<MultiIndex> multi_indices(int dim, int order);

inline constexpr std::size_t kDefaultPairCap = std::size_t{1} << 24;
inline constexpr std::uint64_t kDefaultPairSeed = 0x5eed5c4a0de7ULL;

/// max |f| over valid nodes with |x| <= r_eval. Throws on an empty region or
/// when r_eval exceeds the valid radius.
double sup_norm(const GridFunction& f, double r_eval);

/// Discrete alpha-Holder seminorm over node pairs with 0 < |x - y| <= 1.
///
/// All pairs are visited when their count is at most `pair_cap`; otherwise a
/// stratified sample (every short offset plus a geometric ladder of longer
/// ones, random start nodes from a fixed seed) is searched and the best pair
/// is refined locally. Results are reproducible bit-for-bit.
double holder_seminorm(const GridFunction& f, double alpha, double r_eval, std::size_t pair_cap = kDefaultPairCap,
                       std::uint64_t seed = kDefaultPairSeed);

/// 4th-order central difference D^beta f (|beta| <= 3); the margin grows by the
/// stencil half-width along each differentiated axis.
GridFunction derivative(const GridFunction& f, const MultiIndex& beta);

/// Stencil half-width of the 1D 4th-order central difference of a given order.
int stencil_half_width(int order);

struct HolderNormEstimate {
  int order = 0;
  double alpha = 0.0;
  double value = 0.0;
  double r_eval = 0.0;
  /// sup_terms[m] = sum over |beta| = m of ||D^beta f||_inf
  std::vector<double> sup_terms;
  /// sum over |beta| = order of [D^beta f]_alpha (0 when alpha == 0)
  double seminorm = 0.0;
};

struct NormOptions {
  std::size_t pair_cap = kDefaultPairCap;
  std::uint64_t seed = kDefaultPairSeed;
};

/// sum_{|beta| <= k} ||D^beta f||_inf + sum_{|beta| = k} [D^beta f]_alpha.
HolderNormEstimate ck_alpha_norm(const GridFunction& f, int k, double alpha, double r_eval,
                                 const NormOptions& opts = {});

/// Fractional order beta metered as ck_alpha_norm(floor(beta), beta - floor(beta)).
HolderNormEstimate fractional_norm(const GridFunction& f, double beta, double r_eval, const NormOptions& opts = {});

/// Largest of the two interpolation ratios
///   ||psi||_{C^1} / (||psi||^{(1+t)/(2+t)} ||psi||_{C^{2+t}}^{1/(2+t)}),
///   ||psi||_{C^2} / (||psi||^{t/(2+t)}     ||psi||_{C^{2+t}}^{2/(2+t)}).
/// Returns 0 for psi == 0.
double interpolation_inequality_check(const GridFunction& f, double theta, double r_eval,
                                      const NormOptions& opts = {});

}  // namespace schauder
