#include "sph/primitives.hpp"

#include <algorithm>
#include <cstdlib>
#include <stdexcept>

namespace sph {

int ShapePrimitiveTemplate::norm() const
{
	int n = 0;
	for (int w : weights)
		n = std::max(n, std::abs(w));
	return n;
}

ShapePrimitiveTemplate ShapePrimitiveTemplate::negated() const
{
	ShapePrimitiveTemplate t = *this;
	for (int& w : t.weights)
		w = -w;
	t.index = kPrimitiveCount - index;
	return t;
}

std::array<ShapePrimitiveTemplate, kTemplateCount> generate_templates()
{
	std::array<ShapePrimitiveTemplate, kTemplateCount> out;
	for (int code = 1; code <= kTemplateCount; ++code) {
		auto& t = out[code - 1];
		t.index = code;
		for (int i = 0; i < 4; ++i)
			t.weights[i] = (code >> (3 - i)) & 1 ? -1 : 1;
	}
	return out;
}

std::span<const ShapePrimitiveTemplate, kTemplateCount> templates()
{
	static const auto table = generate_templates();
	return table;
}

BinSums bin_sums(const IntegralImage& ii, int x, int y, int f)
{
	if (f < 2 || f % 2 != 0)
		throw std::invalid_argument("bin_sums: cell size must be even and >= 2");
	if (x < 0 || y < 0 || x + f > ii.width() || y + f > ii.height())
		throw std::out_of_range("bin_sums: cell out of bounds");
	const int h = f / 2;
	return {{ii.rect_sum(x, y, h, h), ii.rect_sum(x + h, y, h, h),
	         ii.rect_sum(x, y + h, h, h), ii.rect_sum(x + h, y + h, h, h)}};
}

ScoreVector match_scores(const BinSums& sums, std::span<const ShapePrimitiveTemplate> tmpl)
{
	if (tmpl.size() != kTemplateCount)
		throw std::invalid_argument("match_scores: expected 14 templates");

	// 4 * sum_i (P_i - mean) h_i = 4 * sum_i P_i h_i - (sum_i P_i)(sum_i h_i), all in integers
	std::int64_t total = 0;
	for (auto v : sums.p)
		total += static_cast<std::int64_t>(v);

	ScoreVector s;
	for (std::size_t j = 0; j < tmpl.size(); ++j) {
		std::int64_t dot = 0, wsum = 0;
		for (int i = 0; i < 4; ++i) {
			dot += static_cast<std::int64_t>(sums.p[i]) * tmpl[j].weights[i];
			wsum += tmpl[j].weights[i];
		}
		const std::int64_t scaled = 4 * dot - total * wsum;
		s[j] = static_cast<double>(scaled) / (4.0 * tmpl[j].norm());
	}
	return s;
}

CellMatch select_primitive(const ScoreVector& scores, double eps)
{
	if (!(eps >= 0.0))
		throw std::invalid_argument("select_primitive: loose factor must be nonnegative");
	int best = 0;
	for (int j = 1; j < kTemplateCount; ++j)
		if (scores[j] > scores[best])
			best = j;
	const double m = scores[best];
	if (m > eps)
		return {best + 1, m, m};
	return {kFlatPrimitive, eps - m + 1.0, m};
}

} // namespace sph
