#include "geoexp/design.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "geoexp/error.hpp"

namespace geoexp {

namespace {

using Entries = DesignMatrix::Entries;

void require_even_dimension(int n, const char* what) {
  if (n < 2 || n % 2 != 0) {
    throw DimensionError(std::string(what) + " must be an even integer >= 2, got " +
                         std::to_string(n));
  }
}

bool is_flippable(const Entries& z, int g1, int g2, int b1, int b2) {
  return z(g1, b1) == z(g2, b2) && z(g1, b2) == z(g2, b1) && z(g1, b1) != z(g1, b2);
}

void flip(Entries& z, int g1, int g2, int b1, int b2) {
  z(g1, b1) = -z(g1, b1);
  z(g1, b2) = -z(g1, b2);
  z(g2, b1) = -z(g2, b1);
  z(g2, b2) = -z(g2, b2);
}

// Draws an ordered pair of distinct indices in [0, n).
std::pair<int, int> distinct_pair(int n, Rng& rng) {
  const int first = static_cast<int>(rng.index(static_cast<std::uint64_t>(n)));
  int second = static_cast<int>(rng.index(static_cast<std::uint64_t>(n - 1)));
  if (second >= first) ++second;
  return {first, second};
}

bool try_flip(Entries& z, Rng& rng) {
  const auto [g1, g2] = distinct_pair(static_cast<int>(z.rows()), rng);
  const auto [b1, b2] = distinct_pair(static_cast<int>(z.cols()), rng);
  if (!is_flippable(z, g1, g2, b1, b2)) return false;
  flip(z, g1, g2, b1, b2);
  return true;
}

struct OffDiagonal {
  double min = std::numeric_limits<double>::quiet_NaN();
  double max = std::numeric_limits<double>::quiet_NaN();
  double rms = std::numeric_limits<double>::quiet_NaN();
};

OffDiagonal summarize_off_diagonal(const Eigen::MatrixXd& rho) {
  OffDiagonal out;
  const Eigen::Index n = rho.rows();
  if (n < 2) return out;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  double sum_sq = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      lo = std::min(lo, rho(i, j));
      hi = std::max(hi, rho(i, j));
      sum_sq += rho(i, j) * rho(i, j);
    }
  }
  out.min = lo;
  out.max = hi;
  out.rms = std::sqrt(sum_sq / (static_cast<double>(n) * static_cast<double>(n - 1) / 2.0));
  return out;
}

template <typename Vectors>
std::vector<IndexPair> collisions(const Vectors& vectors, Eigen::Index count) {
  std::vector<IndexPair> out;
  for (Eigen::Index i = 0; i < count; ++i) {
    for (Eigen::Index j = i + 1; j < count; ++j) {
      const auto vi = vectors(i);
      const auto vj = vectors(j);
      if (vi == vj || vi == -vj) out.emplace_back(static_cast<int>(i), static_cast<int>(j));
    }
  }
  return out;
}

void require_growable(const DesignMatrix& design) {
  const ValidationReport report = validate(design);
  if (!report.balanced) throw PreconditionError("growth requires a balanced design");
  if (!report.collision_free()) {
    throw PreconditionError("growth requires a collision-free design");
  }
}

void require_index(int index, int bound, const char* what) {
  if (index < 0 || index >= bound) {
    throw PreconditionError(std::string(what) + " index " + std::to_string(index) +
                            " out of range [0, " + std::to_string(bound) + ")");
  }
}

void require_sign(int z, const char* what) {
  if (z != 1 && z != -1) throw PreconditionError(std::string(what) + " must be +1 or -1");
}

}  // namespace

DesignMatrix::DesignMatrix(Entries entries) : entries_(std::move(entries)) {
  if (entries_.size() == 0) throw DimensionError("design matrix must be non-empty");
  for (Eigen::Index i = 0; i < entries_.size(); ++i) {
    const int v = entries_.data()[i];
    if (v != 1 && v != -1) throw PreconditionError("design entries must be +1 or -1");
  }
}

DesignMatrix DesignMatrix::from_rows(const std::vector<std::vector<int>>& rows) {
  if (rows.empty() || rows.front().empty()) throw DimensionError("design matrix must be non-empty");
  Entries z(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t g = 0; g < rows.size(); ++g) {
    if (rows[g].size() != rows.front().size()) throw DimensionError("ragged design rows");
    for (std::size_t b = 0; b < rows[g].size(); ++b) {
      z(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(b)) = rows[g][b];
    }
  }
  return DesignMatrix(std::move(z));
}

bool DesignMatrix::balanced() const {
  return (entries_.rowwise().sum().array() == 0).all() &&
         (entries_.colwise().sum().array() == 0).all();
}

DesignMatrix checkerboard_init(int geos, int brands) {
  require_even_dimension(geos, "number of GEOs");
  require_even_dimension(brands, "number of brands");
  Entries z(geos, brands);
  for (int g = 0; g < geos; ++g) {
    for (int b = 0; b < brands; ++b) z(g, b) = (g + b) % 2 == 0 ? 1 : -1;
  }
  return DesignMatrix(std::move(z));
}

std::optional<DesignMatrix> switch_submatrix(const DesignMatrix& design, int g1, int g2, int b1,
                                             int b2) {
  require_index(g1, design.geos(), "row");
  require_index(g2, design.geos(), "row");
  require_index(b1, design.brands(), "column");
  require_index(b2, design.brands(), "column");
  if (g1 == g2 || b1 == b2) throw PreconditionError("submatrix rows and columns must be distinct");
  if (!is_flippable(design.entries(), g1, g2, b1, b2)) return std::nullopt;
  Entries z = design.entries();
  flip(z, g1, g2, b1, b2);
  return DesignMatrix(std::move(z));
}

FlipResult flip_attempt(const DesignMatrix& design, Rng& rng) {
  if (design.geos() < 2 || design.brands() < 2) {
    throw DimensionError("flip proposals need at least two rows and two columns");
  }
  Entries z = design.entries();
  const bool accepted = try_flip(z, rng);
  return {DesignMatrix(std::move(z)), accepted};
}

std::int64_t default_scramble_attempts(int geos, int brands) {
  return std::int64_t{2} * geos * brands * 25;
}

ScrambleResult scramble(const DesignMatrix& design, std::int64_t attempts, Rng& rng,
                        int trace_every) {
  if (attempts < 0) throw PreconditionError("attempts must be >= 0");
  if (attempts > 0 && (design.geos() < 2 || design.brands() < 2)) {
    throw DimensionError("flip proposals need at least two rows and two columns");
  }
  Entries z = design.entries();
  std::vector<TraceEntry> trace;
  if (trace_every > 0) trace.push_back({0, 0, correlations(design)});

  std::int64_t flips = 0;
  for (std::int64_t attempt = 1; attempt <= attempts; ++attempt) {
    if (!try_flip(z, rng)) continue;
    ++flips;
    if (trace_every > 0 && flips % trace_every == 0) {
      trace.push_back({attempt, flips, correlations(DesignMatrix(z))});
    }
  }
  return {DesignMatrix(std::move(z)), std::move(trace), flips};
}

Eigen::MatrixXd brand_correlation_matrix(const DesignMatrix& design) {
  const Eigen::MatrixXd z = design.entries().cast<double>();
  return (z.transpose() * z) / static_cast<double>(design.geos());
}

Eigen::MatrixXd geo_correlation_matrix(const DesignMatrix& design) {
  const Eigen::MatrixXd z = design.entries().cast<double>();
  return (z * z.transpose()) / static_cast<double>(design.brands());
}

CorrelationSummary correlations(const DesignMatrix& design) {
  const OffDiagonal brand = summarize_off_diagonal(brand_correlation_matrix(design));
  const OffDiagonal geo = summarize_off_diagonal(geo_correlation_matrix(design));
  return {brand.min, brand.max, brand.rms, geo.min, geo.max, geo.rms};
}

ValidationReport validate(const DesignMatrix& design) {
  const Entries& z = design.entries();
  ValidationReport report;
  report.balanced = design.balanced();
  report.row_collisions = collisions([&](Eigen::Index i) { return z.row(i); }, z.rows());
  report.column_collisions = collisions([&](Eigen::Index j) { return z.col(j); }, z.cols());
  return report;
}

DesignMatrix grow4(const DesignMatrix& design, int row_a, int row_b, int col_a, int col_b, int z) {
  require_growable(design);
  require_index(row_a, design.geos(), "row");
  require_index(row_b, design.geos(), "row");
  require_index(col_a, design.brands(), "column");
  require_index(col_b, design.brands(), "column");
  if (row_a == row_b || col_a == col_b) throw PreconditionError("growth rows/columns must be distinct");
  require_sign(z, "z");

  const Entries& x = design.entries();
  const Eigen::Index g = x.rows();
  const Eigen::Index b = x.cols();
  Entries out(g + 4, b + 4);
  out.topLeftCorner(g, b) = x;
  out.col(b).head(g) = x.col(col_a);
  out.col(b + 1).head(g) = -x.col(col_a);
  out.col(b + 2).head(g) = x.col(col_b);
  out.col(b + 3).head(g) = -x.col(col_b);
  out.row(g).head(b) = x.row(row_a);
  out.row(g + 1).head(b) = -x.row(row_a);
  out.row(g + 2).head(b) = x.row(row_b);
  out.row(g + 3).head(b) = -x.row(row_b);

  const int corner[4][4] = {{z, z, -z, -z}, {z, z, -z, -z}, {-z, -z, z, z}, {-z, -z, z, z}};
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) out(g + i, b + j) = corner[i][j];
  }
  return DesignMatrix(std::move(out));
}

DesignMatrix grow48(const DesignMatrix& design, std::pair<int, int> rows, std::array<int, 4> cols,
                    int z1, int z2) {
  require_growable(design);
  require_index(rows.first, design.geos(), "row");
  require_index(rows.second, design.geos(), "row");
  if (rows.first == rows.second) throw PreconditionError("growth rows must be distinct");
  for (std::size_t i = 0; i < cols.size(); ++i) {
    require_index(cols[i], design.brands(), "column");
    for (std::size_t j = 0; j < i; ++j) {
      if (cols[i] == cols[j]) throw PreconditionError("growth columns must be distinct");
    }
  }
  require_sign(z1, "z1");
  require_sign(z2, "z2");

  const Entries& x = design.entries();
  const Eigen::Index g = x.rows();
  const Eigen::Index b = x.cols();
  Entries out(g + 4, b + 8);
  out.topLeftCorner(g, b) = x;
  for (int k = 0; k < 4; ++k) {
    out.col(b + 2 * k).head(g) = x.col(cols[static_cast<std::size_t>(k)]);
    out.col(b + 2 * k + 1).head(g) = -x.col(cols[static_cast<std::size_t>(k)]);
  }
  out.row(g).head(b) = x.row(rows.first);
  out.row(g + 1).head(b) = -x.row(rows.first);
  out.row(g + 2).head(b) = x.row(rows.second);
  out.row(g + 3).head(b) = -x.row(rows.second);

  const int block[8] = {z1, z1, -z1, -z1, z2, z2, -z2, -z2};
  for (int i = 0; i < 4; ++i) {
    const int sign = i < 2 ? 1 : -1;
    for (int j = 0; j < 8; ++j) out(g + i, b + j) = sign * block[j];
  }
  return DesignMatrix(std::move(out));
}

DesignMatrix seed_design_6x6() {
  return DesignMatrix::from_rows({
      {+1, +1, +1, -1, -1, -1},
      {+1, +1, -1, +1, -1, -1},
      {+1, -1, -1, -1, +1, +1},
      {-1, +1, -1, -1, +1, +1},
      {-1, -1, +1, +1, +1, -1},
      {-1, -1, +1, +1, -1, +1},
  });
}

DesignMatrix seed_design_8x8() {
  return DesignMatrix::from_rows({
      {+1, +1, +1, +1, -1, -1, -1, -1},
      {+1, +1, -1, -1, -1, -1, +1, +1},
      {+1, -1, +1, -1, +1, +1, -1, -1},
      {+1, -1, -1, +1, -1, +1, +1, -1},
      {-1, +1, +1, +1, +1, -1, -1, -1},
      {-1, +1, -1, -1, +1, +1, -1, +1},
      {-1, -1, +1, -1, +1, -1, +1, +1},
      {-1, -1, -1, +1, -1, +1, +1, +1},
  });
}

}  // namespace geoexp
