#pragma once

// Test-only helpers: random inputs, temp directories and a naive SPH
// reference that shares no code with the library's extraction path.

#include "sph/image.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace sph::testing {

inline GrayImage random_image(std::mt19937& rng, int w, int h, int lo = 0, int hi = 255)
{
	std::uniform_int_distribution<int> d(lo, hi);
	std::vector<std::uint8_t> px(static_cast<std::size_t>(w) * h);
	for (auto& p : px)
		p = static_cast<std::uint8_t>(d(rng));
	return GrayImage(w, h, std::move(px));
}

/// Random image with piecewise-constant patches, which exercises the flat branch too.
inline GrayImage random_patchy_image(std::mt19937& rng, int w, int h)
{
	GrayImage img = random_image(rng, w, h);
	std::uniform_int_distribution<int> pos(0, std::max(w, h));
	std::uniform_int_distribution<int> val(0, 255);
	for (int r = 0; r < 6; ++r) {
		const int x0 = pos(rng) % w, y0 = pos(rng) % h, v = val(rng);
		const int x1 = std::min(w, x0 + 1 + pos(rng) % 12), y1 = std::min(h, y0 + 1 + pos(rng) % 12);
		for (int y = y0; y < y1; ++y)
			for (int x = x0; x < x1; ++x)
				img(x, y) = static_cast<std::uint8_t>(v);
	}
	return img;
}

class TempDir
{
public:
	explicit TempDir(const std::string& tag)
	{
		std::random_device rd;
		path_ = std::filesystem::temp_directory_path() / ("sph_test_" + tag + "_" + std::to_string(rd()));
		std::filesystem::create_directories(path_);
	}
	~TempDir()
	{
		std::error_code ec;
		std::filesystem::remove_all(path_, ec);
	}
	TempDir(const TempDir&) = delete;
	TempDir& operator=(const TempDir&) = delete;

	const std::filesystem::path& path() const { return path_; }

private:
	std::filesystem::path path_;
};

inline void write_bytes(const std::filesystem::path& p, const std::string& bytes)
{
	std::filesystem::create_directories(p.parent_path());
	std::FILE* f = std::fopen(p.string().c_str(), "wb");
	std::fwrite(bytes.data(), 1, bytes.size(), f);
	std::fclose(f);
}

inline std::string pgm_bytes(int w, int h, const std::vector<std::uint8_t>& px)
{
	std::string s = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
	s.append(px.begin(), px.end());
	return s;
}

namespace naive {

// Sign patterns straight from the enumeration rule: bit (3 - i) of the code set means h_i = -1.
inline int weight(int code, int bin) { return ((code >> (3 - bin)) & 1) ? -1 : 1; }

struct Vote
{
	int bin; // 0..14
	double value;
};

inline Vote cell_vote(const GrayImage& img, int x, int y, int f, double eps)
{
	const int h = f / 2;
	double p[4] = {0, 0, 0, 0};
	for (int dy = 0; dy < f; ++dy)
		for (int dx = 0; dx < f; ++dx)
			p[(dy >= h ? 2 : 0) + (dx >= h ? 1 : 0)] += img(x + dx, y + dy);
	const double mean = (p[0] + p[1] + p[2] + p[3]) / 4.0;

	double best = -1e300;
	int best_code = 0;
	for (int code = 1; code <= 14; ++code) {
		double s = 0.0;
		for (int i = 0; i < 4; ++i)
			s += (p[i] - mean) * weight(code, i);
		if (s > best) {
			best = s;
			best_code = code;
		}
	}
	if (best > eps)
		return {best_code - 1, best};
	return {14, eps - best + 1.0};
}

inline int stride(int window, double overlap) { return window - static_cast<int>(std::lround(window * overlap)); }

/// Unnormalised 15-bin histograms, blocks row-major.
inline std::vector<std::array<double, 15>> raw_histograms(const GrayImage& img, int b, double bo, int f, double co, double k)
{
	const double eps = k * (f / 2.0) * (f / 2.0);
	const int bs = stride(b, bo), cs = stride(f, co);
	std::vector<std::array<double, 15>> out;
	for (int by = 0; by + b <= img.height(); by += bs)
		for (int bx = 0; bx + b <= img.width(); bx += bs) {
			std::array<double, 15> h{};
			for (int cy = 0; cy + f <= b; cy += cs)
				for (int cx = 0; cx + f <= b; cx += cs) {
					const Vote v = cell_vote(img, bx + cx, by + cy, f, eps);
					h[v.bin] += v.value;
				}
			out.push_back(h);
		}
	return out;
}

inline std::vector<double> descriptor(const GrayImage& img, int b, double bo, int f, double co, double k, bool normalize)
{
	std::vector<double> out;
	for (auto h : raw_histograms(img, b, bo, f, co, k)) {
		if (normalize) {
			double ss = 0.0;
			for (double v : h)
				ss += v * v;
			for (double& v : h)
				v /= std::sqrt(ss);
		}
		out.insert(out.end(), h.begin(), h.end());
	}
	return out;
}

} // namespace naive

} // namespace sph::testing
