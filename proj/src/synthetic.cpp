#include "sph/experiments.hpp"

#include <algorithm>
#include <cstdio>
#include <random>
#include <stdexcept>

namespace sph {

namespace {

// Raw 32-bit Mersenne Twister output is fixed by the standard; the
// distributions are not, so ranges are mapped by hand.
class Stream
{
public:
	explicit Stream(std::uint32_t seed) : engine_(seed) {}

	int uniform(int lo, int hi)
	{
		const auto span = static_cast<std::uint32_t>(hi - lo + 1);
		return lo + static_cast<int>(engine_() % span);
	}

private:
	std::mt19937 engine_;
};

GrayImage base_layout(Stream& rng, const SynthSpec& spec)
{
	GrayImage img(spec.width, spec.height, static_cast<std::uint8_t>(rng.uniform(40, 215)));
	for (int r = 0; r < spec.rectangles; ++r) {
		const int w = rng.uniform(3, std::max(3, spec.width / 2));
		const int h = rng.uniform(3, std::max(3, spec.height / 2));
		const int x0 = rng.uniform(0, std::max(0, spec.width - 3));
		const int y0 = rng.uniform(0, std::max(0, spec.height - 3));
		const auto level = static_cast<std::uint8_t>(rng.uniform(20, 235));
		for (int y = y0; y < std::min(spec.height, y0 + h); ++y)
			for (int x = x0; x < std::min(spec.width, x0 + w); ++x)
				img(x, y) = level;
	}
	return img;
}

std::string padded(int value, int count)
{
	const int width = static_cast<int>(std::to_string(std::max(count, 1)).size());
	char buf[32];
	std::snprintf(buf, sizeof buf, "%0*d", std::max(width, 2), value);
	return buf;
}

} // namespace

Dataset generate_synthetic(const SynthSpec& spec)
{
	if (spec.classes < 2 || spec.samples < 2)
		throw std::invalid_argument("synthetic dataset needs at least 2 classes and 2 samples per class");
	if (spec.jitter < 0 || spec.noise < 0 || spec.rectangles < 0)
		throw std::invalid_argument("synthetic dataset: jitter, noise and rectangle count must be nonnegative");
	if (spec.width < 4 || spec.height < 4)
		throw std::invalid_argument("synthetic dataset: images must be at least 4x4");

	Stream rng(spec.seed);
	std::vector<GrayImage> bases;
	bases.reserve(static_cast<std::size_t>(spec.classes));
	for (int c = 0; c < spec.classes; ++c)
		bases.push_back(base_layout(rng, spec));

	Dataset ds;
	for (int c = 0; c < spec.classes; ++c) {
		const std::string name = "s" + padded(c + 1, spec.classes);
		ds.label_names[c] = name;
		const GrayImage& base = bases[static_cast<std::size_t>(c)];
		for (int s = 0; s < spec.samples; ++s) {
			const int dx = rng.uniform(-spec.jitter, spec.jitter);
			const int dy = rng.uniform(-spec.jitter, spec.jitter);
			GrayImage img(spec.width, spec.height);
			for (int y = 0; y < spec.height; ++y) {
				const int sy = std::clamp(y - dy, 0, spec.height - 1);
				for (int x = 0; x < spec.width; ++x) {
					const int sx = std::clamp(x - dx, 0, spec.width - 1);
					const int v = base(sx, sy) + rng.uniform(-spec.noise, spec.noise);
					img(x, y) = static_cast<std::uint8_t>(std::clamp(v, 0, 255));
				}
			}
			ds.samples.push_back({std::move(img), c, name + "/" + padded(s + 1, spec.samples) + ".pgm"});
		}
	}
	return ds;
}

void write_dataset(const Dataset& ds, const std::filesystem::path& root)
{
	namespace fs = std::filesystem;
	if (fs::exists(root) && (!fs::is_directory(root) || !fs::is_empty(root)))
		throw std::runtime_error("output directory exists and is not empty: " + root.string());
	fs::create_directories(root);
	std::map<int, int> counters;
	for (const auto& s : ds.samples) {
		const auto it = ds.label_names.find(s.label);
		const std::string subject = it != ds.label_names.end() ? it->second : std::to_string(s.label);
		const int index = ++counters[s.label];
		const fs::path dir = root / subject;
		fs::create_directories(dir);
		save_pgm(s.image, dir / (padded(index, 99) + ".pgm"));
	}
}

} // namespace sph
