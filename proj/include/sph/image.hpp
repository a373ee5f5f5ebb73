#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace sph {

/// 8-bit grayscale raster, row-major.
class GrayImage
{
public:
	GrayImage() = default;
	GrayImage(int width, int height, std::uint8_t fill = 0);
	GrayImage(int width, int height, std::vector<std::uint8_t> pixels);

	int width() const { return width_; }
	int height() const { return height_; }
	bool empty() const { return pixels_.empty(); }

	std::uint8_t operator()(int x, int y) const { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
	std::uint8_t& operator()(int x, int y) { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }

	const std::vector<std::uint8_t>& pixels() const { return pixels_; }

	bool operator==(const GrayImage&) const = default;

private:
	int width_ = 0;
	int height_ = 0;
	std::vector<std::uint8_t> pixels_;
};

/**
 * Summed-area table with a zero first row and column.
 *
 * at(x, y) holds the sum of all pixels strictly above and left of (x, y), so
 * the table is (width + 1) x (height + 1). Sums are 64-bit and exact.
 */
class IntegralImage
{
public:
	explicit IntegralImage(const GrayImage& img);

	int width() const { return width_; }   ///< source image width
	int height() const { return height_; } ///< source image height

	std::uint64_t at(int x, int y) const { return sums_[static_cast<std::size_t>(y) * (width_ + 1) + x]; }

	/// Sum of the w x h rectangle with top-left corner (x0, y0).
	std::uint64_t rect_sum(int x0, int y0, int w, int h) const
	{
		return at(x0 + w, y0 + h) + at(x0, y0) - at(x0 + w, y0) - at(x0, y0 + h);
	}

private:
	int width_;
	int height_;
	std::vector<std::uint64_t> sums_;
};

inline IntegralImage integral(const GrayImage& img) { return IntegralImage(img); }

/// Integer luma used for every color-to-gray conversion.
constexpr std::uint8_t luma(std::uint8_t r, std::uint8_t g, std::uint8_t b)
{
	return static_cast<std::uint8_t>((r * 299u + g * 587u + b * 114u + 500u) / 1000u);
}

/// Loads a binary PGM (P5, maxval 255) or a PNG file. Throws std::runtime_error.
GrayImage load_image(const std::filesystem::path& path);

/// Writes a binary P5 PGM.
void save_pgm(const GrayImage& img, const std::filesystem::path& path);

/// Center crop to crop_w x crop_h, then bilinear resize to out_w x out_h.
GrayImage crop_resize(const GrayImage& img, int crop_w, int crop_h, int out_w, int out_h);

struct Sample
{
	GrayImage image;
	int label = 0;
	std::string source_path;
};

/// Images grouped by subject directory. Labels are dense ids in directory order.
struct Dataset
{
	std::vector<Sample> samples;
	std::map<int, std::string> label_names;

	std::vector<int> labels() const;
	std::size_t size() const { return samples.size(); }
};

/**
 * Loads root/<subject>/<image>. Subjects and files are visited in
 * lexicographic path order; subjects without a loadable image are skipped
 * with a warning. Throws std::runtime_error if nothing loads.
 */
Dataset load_dataset(const std::filesystem::path& root);

} // namespace sph
