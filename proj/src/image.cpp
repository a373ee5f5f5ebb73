#include "sph/image.hpp"

#include <png.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <stdexcept>

namespace sph {

namespace fs = std::filesystem;

GrayImage::GrayImage(int width, int height, std::uint8_t fill)
    : GrayImage(width, height, std::vector<std::uint8_t>(static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0), fill))
{
}

GrayImage::GrayImage(int width, int height, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels))
{
	if (width < 1 || height < 1)
		throw std::invalid_argument("GrayImage: dimensions must be positive");
	if (pixels_.size() != static_cast<std::size_t>(width) * height)
		throw std::invalid_argument("GrayImage: pixel count does not match dimensions");
}

IntegralImage::IntegralImage(const GrayImage& img)
    : width_(img.width()), height_(img.height()),
      sums_(static_cast<std::size_t>(img.width() + 1) * (img.height() + 1), 0)
{
	const std::size_t stride = width_ + 1;
	for (int y = 0; y < height_; ++y) {
		std::uint64_t row = 0;
		for (int x = 0; x < width_; ++x) {
			row += img(x, y);
			sums_[(y + 1) * stride + x + 1] = sums_[y * stride + x + 1] + row;
		}
	}
}

namespace {

[[noreturn]] void corrupt(const fs::path& path, const std::string& what)
{
	throw std::runtime_error("unsupported/corrupt format: " + path.string() + " (" + what + ")");
}

// Reads the next whitespace-delimited header token, skipping '#' comments.
bool next_token(const std::vector<char>& buf, std::size_t& pos, std::string& token)
{
	token.clear();
	while (pos < buf.size()) {
		const char c = buf[pos];
		if (c == '#') {
			while (pos < buf.size() && buf[pos] != '\n')
				++pos;
		} else if (std::isspace(static_cast<unsigned char>(c))) {
			++pos;
		} else {
			break;
		}
	}
	while (pos < buf.size() && !std::isspace(static_cast<unsigned char>(buf[pos])))
		token.push_back(buf[pos++]);
	return !token.empty();
}

int parse_dim(const fs::path& path, const std::string& token, const char* what)
{
	if (token.empty() || !std::all_of(token.begin(), token.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
		corrupt(path, std::string("bad ") + what);
	if (token.size() > 9)
		corrupt(path, std::string(what) + " out of range");
	return std::stoi(token);
}

GrayImage load_pgm(const fs::path& path, const std::vector<char>& buf)
{
	std::size_t pos = 0;
	std::string tok;
	if (!next_token(buf, pos, tok) || tok != "P5")
		corrupt(path, "expected P5 magic");
	if (!next_token(buf, pos, tok))
		corrupt(path, "truncated header");
	const int w = parse_dim(path, tok, "width");
	if (!next_token(buf, pos, tok))
		corrupt(path, "truncated header");
	const int h = parse_dim(path, tok, "height");
	if (!next_token(buf, pos, tok))
		corrupt(path, "truncated header");
	const int maxval = parse_dim(path, tok, "maxval");
	if (maxval != 255)
		corrupt(path, "only maxval 255 is supported");
	if (w < 1 || h < 1)
		throw std::runtime_error("zero-dimension image: " + path.string());
	// exactly one whitespace byte separates the header from the raster
	if (pos >= buf.size())
		corrupt(path, "missing raster");
	++pos;
	const std::size_t n = static_cast<std::size_t>(w) * h;
	if (buf.size() - pos < n)
		corrupt(path, "truncated raster");
	std::vector<std::uint8_t> px(buf.begin() + pos, buf.begin() + pos + n);
	return GrayImage(w, h, std::move(px));
}

GrayImage load_png(const fs::path& path, const std::vector<char>& buf)
{
	png_image image{};
	image.version = PNG_IMAGE_VERSION;
	if (!png_image_begin_read_from_memory(&image, buf.data(), buf.size()))
		corrupt(path, image.message);
	if (image.width == 0 || image.height == 0) {
		png_image_free(&image);
		throw std::runtime_error("zero-dimension image: " + path.string());
	}
	image.format = PNG_FORMAT_RGB;
	std::vector<std::uint8_t> rgb(PNG_IMAGE_SIZE(image));
	if (!png_image_finish_read(&image, nullptr, rgb.data(), 0, nullptr)) {
		const std::string msg = image.message;
		png_image_free(&image);
		corrupt(path, msg);
	}
	const int w = static_cast<int>(image.width);
	const int h = static_cast<int>(image.height);
	std::vector<std::uint8_t> gray(static_cast<std::size_t>(w) * h);
	for (std::size_t i = 0; i < gray.size(); ++i)
		gray[i] = luma(rgb[3 * i], rgb[3 * i + 1], rgb[3 * i + 2]);
	return GrayImage(w, h, std::move(gray));
}

bool has_png_signature(const std::vector<char>& buf)
{
	static constexpr unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
	return buf.size() >= 8 && std::equal(std::begin(sig), std::end(sig), buf.begin(),
	                                     [](unsigned char a, char b) { return a == static_cast<unsigned char>(b); });
}

} // namespace

GrayImage load_image(const fs::path& path)
{
	std::ifstream in(path, std::ios::binary);
	if (!in)
		throw std::runtime_error("cannot open image: " + path.string());
	std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
	if (has_png_signature(buf))
		return load_png(path, buf);
	if (buf.size() >= 2 && buf[0] == 'P')
		return load_pgm(path, buf);
	corrupt(path, "neither PGM nor PNG");
}

void save_pgm(const GrayImage& img, const fs::path& path)
{
	std::ofstream out(path, std::ios::binary);
	if (!out)
		throw std::runtime_error("cannot write image: " + path.string());
	out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
	out.write(reinterpret_cast<const char*>(img.pixels().data()), static_cast<std::streamsize>(img.pixels().size()));
	if (!out)
		throw std::runtime_error("write failed: " + path.string());
}

GrayImage crop_resize(const GrayImage& img, int crop_w, int crop_h, int out_w, int out_h)
{
	if (crop_w < 1 || crop_h < 1 || out_w < 1 || out_h < 1)
		throw std::invalid_argument("crop_resize: dimensions must be positive");
	if (crop_w > img.width() || crop_h > img.height())
		throw std::invalid_argument("crop_resize: crop larger than source");

	const int x0 = (img.width() - crop_w) / 2;
	const int y0 = (img.height() - crop_h) / 2;
	const double sx = static_cast<double>(crop_w) / out_w;
	const double sy = static_cast<double>(crop_h) / out_h;

	// pixel-center alignment; samples outside the crop clamp to its border
	auto source = [](int dst, double scale, int extent, int& i0, int& i1, double& t) {
		double s = (dst + 0.5) * scale - 0.5;
		s = std::clamp(s, 0.0, static_cast<double>(extent - 1));
		i0 = static_cast<int>(std::floor(s));
		i1 = std::min(i0 + 1, extent - 1);
		t = s - i0;
	};

	GrayImage out(out_w, out_h);
	for (int y = 0; y < out_h; ++y) {
		int ya, yb;
		double ty;
		source(y, sy, crop_h, ya, yb, ty);
		for (int x = 0; x < out_w; ++x) {
			int xa, xb;
			double tx;
			source(x, sx, crop_w, xa, xb, tx);
			const double top = (1 - tx) * img(x0 + xa, y0 + ya) + tx * img(x0 + xb, y0 + ya);
			const double bottom = (1 - tx) * img(x0 + xa, y0 + yb) + tx * img(x0 + xb, y0 + yb);
			const double v = (1 - ty) * top + ty * bottom;
			out(x, y) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
		}
	}
	return out;
}

std::vector<int> Dataset::labels() const
{
	std::vector<int> out;
	out.reserve(samples.size());
	for (const auto& s : samples)
		out.push_back(s.label);
	return out;
}

namespace {

bool is_image_file(const fs::path& p)
{
	std::string ext = p.extension().string();
	std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
	return ext == ".pgm" || ext == ".png";
}

// Directories compare with a trailing separator so that the concatenated
// sample list is sorted by full path string.
std::vector<fs::path> sorted_entries(const fs::path& dir)
{
	std::vector<std::pair<std::string, fs::path>> keyed;
	for (const auto& e : fs::directory_iterator(dir))
		keyed.emplace_back(e.path().filename().string() + (e.is_directory() ? "/" : ""), e.path());
	std::sort(keyed.begin(), keyed.end());
	std::vector<fs::path> out;
	for (auto& [key, path] : keyed)
		out.push_back(std::move(path));
	return out;
}

} // namespace

Dataset load_dataset(const fs::path& root)
{
	if (!fs::is_directory(root))
		throw std::runtime_error("dataset root is not a directory: " + root.string());

	Dataset ds;
	int next_label = 0;
	for (const auto& subject : sorted_entries(root)) {
		if (!fs::is_directory(subject))
			continue;
		std::vector<Sample> loaded;
		for (const auto& file : sorted_entries(subject)) {
			if (!fs::is_regular_file(file) || !is_image_file(file))
				continue;
			try {
				loaded.push_back({load_image(file), next_label, file.string()});
			} catch (const std::exception& e) {
				spdlog::warn("skipping {}: {}", file.string(), e.what());
			}
		}
		if (loaded.empty()) {
			spdlog::warn("subject directory {} has no loadable images; skipped", subject.string());
			continue;
		}
		ds.label_names[next_label] = subject.filename().string();
		std::move(loaded.begin(), loaded.end(), std::back_inserter(ds.samples));
		++next_label;
	}
	if (ds.samples.empty())
		throw std::runtime_error("dataset root contains no loadable subject images: " + root.string());
	return ds;
}

} // namespace sph
