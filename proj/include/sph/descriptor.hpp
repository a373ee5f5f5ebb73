#pragma once

#include "sph/image.hpp"
#include "sph/primitives.hpp"

#include <Eigen/Core>

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace sph {

/**
 * Geometry of one SPH scale. Overlaps are fractions of the window size; the
 * stride is the window minus the overlap rounded to whole pixels (ties away
 * from zero), so a 6-pixel block with 1/4 overlap steps by 4.
 */
struct SphParams
{
	int block_size = 8;
	double block_overlap = 0.5;
	int cell_size = 2;
	double cell_overlap = 0.5;
	double k = 1.0;

	int block_stride() const;
	int cell_stride() const;
	double epsilon() const;

	/// Throws std::invalid_argument describing the first violated constraint.
	void validate() const;
	/// Compact, parseable form: "b8/o0.5/f2/co0.5/k1".
	std::string key() const;
	static SphParams parse(const std::string& key);

	bool operator==(const SphParams&) const = default;
};

/// Loose factor k * (f/2)^2.
double epsilon(double k, int cell_size);

/// Window offsets 0, stride, 2*stride, ... that fit entirely inside extent.
std::vector<int> grid_positions(int extent, int window, int stride);
int grid_count(int extent, int window, int stride);

/// SPH length for a width x height image.
Eigen::Index sph_dims(int width, int height, const SphParams& params);
Eigen::Index msph_dims(int width, int height, std::span<const SphParams> scales);

/// Default single-scale and three-scale parameters.
SphParams default_sph_params();
std::vector<SphParams> default_msph_params();

using BlockHistogram = Eigen::Matrix<double, kPrimitiveCount, 1>;

enum class BlockNorm { L2, None };

/**
 * 15-bin weighted histogram of the cell primitives inside the block at
 * (bx, by). Bin i - 1 holds the votes of primitive i.
 */
BlockHistogram block_histogram(const IntegralImage& ii, int bx, int by, const SphParams& params,
                               double eps, BlockNorm norm = BlockNorm::L2);

struct ScaleLayout
{
	SphParams params;
	int blocks_x = 0;
	int blocks_y = 0;
	Eigen::Index offset = 0; ///< first value of this scale in the descriptor
};

/// Per-block histograms laid out blocks row-major, bins innermost; one layout entry per scale.
struct SphDescriptor
{
	Eigen::VectorXd values;
	std::vector<ScaleLayout> scales;
	int image_width = 0;
	int image_height = 0;

	Eigen::Index dims() const { return values.size(); }
};

SphDescriptor extract_sph(const GrayImage& img, const SphParams& params, BlockNorm norm = BlockNorm::L2);
SphDescriptor extract_msph(const GrayImage& img, std::span<const SphParams> scales, BlockNorm norm = BlockNorm::L2);

/// One row of a descriptor CSV file.
struct DescriptorRecord
{
	int label = 0;
	std::string path;
	Eigen::VectorXd values;
};

struct DescriptorFile
{
	std::string feature;            ///< "sph", "msph" or "pixels"
	std::vector<SphParams> scales;  ///< empty for pixels
	std::vector<DescriptorRecord> records;
};

/**
 * CSV layout:
 *   # sph-descriptors v1 feature=<name> scales=<key>;<key>...
 *   label,path,dims,v0,...,v{D-1}
 *   <label>,"<path>",<dims>,<values...>
 * Values are written with 17 significant digits and read back exactly.
 */
void write_descriptor_csv(std::ostream& out, const DescriptorFile& file);
DescriptorFile read_descriptor_csv(std::istream& in);

} // namespace sph
