#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "geoexp/rng.hpp"

namespace geoexp {

/// G x B matrix of treatment assignments: +1 treatment, -1 control.
///
/// Rows are GEOs and columns are brands. Any +/-1 matrix can be held (so that
/// unsuitable classical designs can be validated), but every generator in this
/// module produces balanced matrices: each row and each column sums to zero.
class DesignMatrix {
 public:
  using Entries = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;

  /// Throws DimensionError when empty and PreconditionError when an entry is not +/-1.
  explicit DesignMatrix(Entries entries);

  /// Convenience constructor from nested rows, e.g. {{1, -1}, {-1, 1}}.
  static DesignMatrix from_rows(const std::vector<std::vector<int>>& rows);

  int geos() const { return static_cast<int>(entries_.rows()); }
  int brands() const { return static_cast<int>(entries_.cols()); }
  int operator()(int geo, int brand) const { return entries_(geo, brand); }
  const Entries& entries() const { return entries_; }

  bool treated(int geo, int brand) const { return entries_(geo, brand) > 0; }
  bool balanced() const;

  friend bool operator==(const DesignMatrix& a, const DesignMatrix& b) {
    return a.entries_ == b.entries_;
  }

 private:
  Entries entries_;
};

struct CorrelationSummary {
  double brand_min = 0.0;
  double brand_max = 0.0;
  double brand_rms = 0.0;
  double geo_min = 0.0;
  double geo_max = 0.0;
  double geo_rms = 0.0;
};

struct TraceEntry {
  std::int64_t attempts = 0;
  std::int64_t flips = 0;
  CorrelationSummary correlations;
};

struct ScrambleResult {
  DesignMatrix design;
  std::vector<TraceEntry> trace;
  std::int64_t flips = 0;
};

struct FlipResult {
  DesignMatrix design;
  bool accepted = false;
};

using IndexPair = std::pair<int, int>;

struct ValidationReport {
  bool balanced = false;
  std::vector<IndexPair> row_collisions;
  std::vector<IndexPair> column_collisions;

  bool collision_free() const { return row_collisions.empty() && column_collisions.empty(); }
};

/// Alternating pattern: entry (g, b) is +1 iff g + b is even.
DesignMatrix checkerboard_init(int geos, int brands);

/// Switches the 2x2 submatrix on rows {g1, g2} and columns {b1, b2} when it is
/// one of the two flippable diagonal patterns; std::nullopt otherwise.
std::optional<DesignMatrix> switch_submatrix(const DesignMatrix& design, int g1, int g2, int b1,
                                             int b2);

/// One proposal of the swap chain: two distinct rows and two distinct columns
/// drawn uniformly, switched whenever flippable (acceptance probability 1).
FlipResult flip_attempt(const DesignMatrix& design, Rng& rng);

/// 2 * G * B * 25 attempts, roughly 25 expected flips per cell.
std::int64_t default_scramble_attempts(int geos, int brands);

/// Runs `attempts` flip proposals. When trace_every > 0 the trace holds the
/// starting summary followed by one entry per `trace_every` accepted flips.
ScrambleResult scramble(const DesignMatrix& design, std::int64_t attempts, Rng& rng,
                        int trace_every = 10);

/// Brand-pair correlations rho_{bb'} = (1/G) sum_g z_gb z_gb'.
Eigen::MatrixXd brand_correlation_matrix(const DesignMatrix& design);
/// GEO-pair correlations rho_{gg'} = (1/B) sum_b z_gb z_g'b.
Eigen::MatrixXd geo_correlation_matrix(const DesignMatrix& design);

/// Min, max and rms over off-diagonal pairs. Fields for a side with fewer than
/// two members are NaN.
CorrelationSummary correlations(const DesignMatrix& design);

ValidationReport validate(const DesignMatrix& design);

/// Grows a balanced collision-free design by four rows and four columns using
/// rows row_a, row_b and columns col_a, col_b. The result is balanced and
/// collision-free.
DesignMatrix grow4(const DesignMatrix& design, int row_a = 0, int row_b = 1, int col_a = 0,
                   int col_b = 1, int z = 1);

/// Grows by four rows and eight columns from two rows and four columns.
DesignMatrix grow48(const DesignMatrix& design, std::pair<int, int> rows = {0, 1},
                    std::array<int, 4> cols = {0, 1, 2, 3}, int z1 = 1, int z2 = 1);

/// Balanced, collision-free 6 x 6 seed design.
DesignMatrix seed_design_6x6();
/// Balanced, collision-free 8 x 8 seed design.
DesignMatrix seed_design_8x8();

}  // namespace geoexp
