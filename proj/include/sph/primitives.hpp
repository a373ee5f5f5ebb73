#pragma once

#include "sph/image.hpp"

#include <array>
#include <cstdint>
#include <span>

namespace sph {

inline constexpr int kTemplateCount = 14;
inline constexpr int kFlatPrimitive = 15;
inline constexpr int kPrimitiveCount = 15;

/**
 * A 2x2 Haar-style shape primitive. Weights apply to the four bins of a cell
 * in the order top-left, top-right, bottom-left, bottom-right.
 */
struct ShapePrimitiveTemplate
{
	int index = 0; ///< 1..14
	std::array<int, 4> weights{};

	/// max |h_i|; the score normaliser.
	int norm() const;
	ShapePrimitiveTemplate negated() const;
};

/**
 * The 14 non-constant {-1,+1} sign patterns in binary-counting order of
 * (h1, h2, h3, h4), with +1 -> 0 and -1 -> 1 and h1 the most significant
 * bit. Index equals the bit pattern, so the complement of template i is
 * template 15 - i.
 */
std::array<ShapePrimitiveTemplate, kTemplateCount> generate_templates();

/// The shared template table.
std::span<const ShapePrimitiveTemplate, kTemplateCount> templates();

/// Gray-value sums of the four quadrants of a cell (TL, TR, BL, BR).
struct BinSums
{
	std::array<std::uint64_t, 4> p{};
	bool operator==(const BinSums&) const = default;
};

/// Quadrant sums of the f x f cell at (x, y). f must be even and the cell inside the image.
BinSums bin_sums(const IntegralImage& ii, int x, int y, int f);

using ScoreVector = std::array<double, kTemplateCount>;

/**
 * Matching scores S_j = (1/n_j) sum_i P'_i h_i over the mean-removed bin sums
 * P'_i = P_i - mean(P). Mean removal makes every score of a constant cell
 * zero. With +-1 weights the scores are exact multiples of 1/2.
 */
ScoreVector match_scores(const BinSums& sums, std::span<const ShapePrimitiveTemplate> tmpl);
inline ScoreVector match_scores(const BinSums& sums) { return match_scores(sums, templates()); }

struct CellMatch
{
	int primitive = kFlatPrimitive; ///< 1..15, 15 is flat
	double vote = 0.0;
	double max_score = 0.0;
	bool operator==(const CellMatch&) const = default;
};

/**
 * Picks the primitive with the largest score (lowest index on ties). If the
 * maximum M does not exceed the loose factor eps, the cell is flat and votes
 * eps - M + 1; otherwise it votes M.
 */
CellMatch select_primitive(const ScoreVector& scores, double eps);

} // namespace sph
