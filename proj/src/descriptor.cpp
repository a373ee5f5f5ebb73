#include "sph/descriptor.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace sph {

namespace {

int stride_for(int window, double overlap)
{
	return window - static_cast<int>(std::lround(window * overlap));
}

std::string format_real(double v)
{
	char buf[64];
	auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
	if (ec != std::errc())
		throw std::runtime_error("format_real: conversion failed");
	return std::string(buf, end);
}

double parse_real(std::string_view s)
{
	double v = 0.0;
	auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
	if (ec != std::errc() || end != s.data() + s.size())
		throw std::invalid_argument("not a number: '" + std::string(s) + "'");
	return v;
}

} // namespace

int SphParams::block_stride() const { return stride_for(block_size, block_overlap); }
int SphParams::cell_stride() const { return stride_for(cell_size, cell_overlap); }
double SphParams::epsilon() const { return sph::epsilon(k, cell_size); }

void SphParams::validate() const
{
	if (cell_size < 2 || cell_size % 2 != 0)
		throw std::invalid_argument("cell size must be even and >= 2 (got " + std::to_string(cell_size) + ")");
	if (block_size < cell_size)
		throw std::invalid_argument("cell size " + std::to_string(cell_size) + " exceeds block size " + std::to_string(block_size));
	if (!(block_overlap >= 0.0 && block_overlap < 1.0))
		throw std::invalid_argument("block overlap must lie in [0, 1)");
	if (!(cell_overlap >= 0.0 && cell_overlap < 1.0))
		throw std::invalid_argument("cell overlap must lie in [0, 1)");
	if (block_stride() < 1)
		throw std::invalid_argument("block overlap leaves no positive stride");
	if (cell_stride() < 1)
		throw std::invalid_argument("cell overlap leaves no positive stride");
	if (!(k >= 0.0))
		throw std::invalid_argument("loose-factor coefficient k must be nonnegative");
}

std::string SphParams::key() const
{
	return "b" + std::to_string(block_size) + "/o" + format_real(block_overlap) + "/f" + std::to_string(cell_size) +
	       "/co" + format_real(cell_overlap) + "/k" + format_real(k);
}

SphParams SphParams::parse(const std::string& key)
{
	SphParams p;
	std::istringstream in(key);
	std::string part;
	bool seen[5] = {};
	while (std::getline(in, part, '/')) {
		auto starts = [&](std::string_view prefix) { return part.rfind(prefix, 0) == 0; };
		if (starts("co")) {
			p.cell_overlap = parse_real(std::string_view(part).substr(2));
			seen[3] = true;
		} else if (starts("b")) {
			p.block_size = static_cast<int>(parse_real(std::string_view(part).substr(1)));
			seen[0] = true;
		} else if (starts("o")) {
			p.block_overlap = parse_real(std::string_view(part).substr(1));
			seen[1] = true;
		} else if (starts("f")) {
			p.cell_size = static_cast<int>(parse_real(std::string_view(part).substr(1)));
			seen[2] = true;
		} else if (starts("k")) {
			p.k = parse_real(std::string_view(part).substr(1));
			seen[4] = true;
		} else {
			throw std::invalid_argument("unknown SPH parameter field '" + part + "' in '" + key + "'");
		}
	}
	if (!std::all_of(std::begin(seen), std::end(seen), [](bool b) { return b; }))
		throw std::invalid_argument("incomplete SPH parameter key '" + key + "'");
	return p;
}

double epsilon(double k, int cell_size)
{
	if (!(k >= 0.0))
		throw std::invalid_argument("epsilon: k must be nonnegative");
	if (cell_size < 2 || cell_size % 2 != 0)
		throw std::invalid_argument("epsilon: cell size must be even and >= 2");
	const double half = cell_size / 2.0;
	return k * half * half;
}

int grid_count(int extent, int window, int stride)
{
	if (stride < 1)
		throw std::invalid_argument("grid: stride must be >= 1");
	if (window < 1 || window > extent)
		throw std::invalid_argument("grid: window " + std::to_string(window) + " does not fit extent " + std::to_string(extent));
	return (extent - window) / stride + 1;
}

std::vector<int> grid_positions(int extent, int window, int stride)
{
	const int n = grid_count(extent, window, stride);
	std::vector<int> out(n);
	for (int i = 0; i < n; ++i)
		out[i] = i * stride;
	return out;
}

Eigen::Index sph_dims(int width, int height, const SphParams& params)
{
	params.validate();
	return static_cast<Eigen::Index>(grid_count(width, params.block_size, params.block_stride())) *
	       grid_count(height, params.block_size, params.block_stride()) * kPrimitiveCount;
}

Eigen::Index msph_dims(int width, int height, std::span<const SphParams> scales)
{
	Eigen::Index n = 0;
	for (const auto& p : scales)
		n += sph_dims(width, height, p);
	return n;
}

SphParams default_sph_params() { return {8, 0.5, 2, 0.5, 1.0}; }

std::vector<SphParams> default_msph_params()
{
	return {{8, 0.5, 2, 0.5, 1.0}, {16, 0.5, 4, 0.5, 1.0}, {32, 0.5, 8, 0.5, 1.0}};
}

namespace {

void normalize(BlockHistogram& h)
{
	const double n = h.norm();
	// every cell votes at least 1, so a block with cells has n >= 1
	if (n > 0.0)
		h /= n;
}

// Cell matches for every cell origin any block of this scale touches.
class CellLattice
{
public:
	CellLattice(const IntegralImage& ii, const SphParams& p, const std::vector<int>& bxs, const std::vector<int>& bys)
	    : xs_(origins(bxs, p)), ys_(origins(bys, p)), x_index_(ii.width(), -1), y_index_(ii.height(), -1)
	{
		for (std::size_t i = 0; i < xs_.size(); ++i)
			x_index_[xs_[i]] = static_cast<int>(i);
		for (std::size_t i = 0; i < ys_.size(); ++i)
			y_index_[ys_[i]] = static_cast<int>(i);

		const double eps = p.epsilon();
		const auto tmpl = templates();
		matches_.reserve(xs_.size() * ys_.size());
		for (int y : ys_)
			for (int x : xs_)
				matches_.push_back(select_primitive(match_scores(bin_sums(ii, x, y, p.cell_size), tmpl), eps));
	}

	const CellMatch& at(int x, int y) const
	{
		return matches_[static_cast<std::size_t>(y_index_[y]) * xs_.size() + x_index_[x]];
	}

private:
	static std::vector<int> origins(const std::vector<int>& blocks, const SphParams& p)
	{
		const auto cells = grid_positions(p.block_size, p.cell_size, p.cell_stride());
		std::vector<int> out;
		for (int b : blocks)
			for (int c : cells)
				out.push_back(b + c);
		std::sort(out.begin(), out.end());
		out.erase(std::unique(out.begin(), out.end()), out.end());
		return out;
	}

	std::vector<int> xs_, ys_;
	std::vector<int> x_index_, y_index_;
	std::vector<CellMatch> matches_;
};

} // namespace

BlockHistogram block_histogram(const IntegralImage& ii, int bx, int by, const SphParams& params, double eps, BlockNorm norm)
{
	params.validate();
	if (bx < 0 || by < 0 || bx + params.block_size > ii.width() || by + params.block_size > ii.height())
		throw std::out_of_range("block_histogram: block outside image");

	const auto cells = grid_positions(params.block_size, params.cell_size, params.cell_stride());
	const auto tmpl = templates();
	BlockHistogram h = BlockHistogram::Zero();
	for (int cy : cells) {
		for (int cx : cells) {
			const CellMatch m = select_primitive(match_scores(bin_sums(ii, bx + cx, by + cy, params.cell_size), tmpl), eps);
			h[m.primitive - 1] += m.vote;
		}
	}
	if (norm == BlockNorm::L2)
		normalize(h);
	return h;
}

namespace {

void append_scale(SphDescriptor& d, const IntegralImage& ii, const SphParams& params, BlockNorm norm, std::vector<double>& out)
{
	params.validate();
	if (ii.width() < params.block_size || ii.height() < params.block_size)
		throw std::invalid_argument("image " + std::to_string(ii.width()) + "x" + std::to_string(ii.height()) +
		                            " is smaller than one " + std::to_string(params.block_size) + "-pixel block");

	const auto bxs = grid_positions(ii.width(), params.block_size, params.block_stride());
	const auto bys = grid_positions(ii.height(), params.block_size, params.block_stride());
	const auto cells = grid_positions(params.block_size, params.cell_size, params.cell_stride());
	const CellLattice lattice(ii, params, bxs, bys);

	d.scales.push_back({params, static_cast<int>(bxs.size()), static_cast<int>(bys.size()),
	                    static_cast<Eigen::Index>(out.size())});
	for (int by : bys) {
		for (int bx : bxs) {
			BlockHistogram h = BlockHistogram::Zero();
			for (int cy : cells)
				for (int cx : cells) {
					const CellMatch& m = lattice.at(bx + cx, by + cy);
					h[m.primitive - 1] += m.vote;
				}
			if (norm == BlockNorm::L2)
				normalize(h);
			out.insert(out.end(), h.data(), h.data() + h.size());
		}
	}
}

} // namespace

SphDescriptor extract_sph(const GrayImage& img, const SphParams& params, BlockNorm norm)
{
	return extract_msph(img, std::span<const SphParams>(&params, 1), norm);
}

SphDescriptor extract_msph(const GrayImage& img, std::span<const SphParams> scales, BlockNorm norm)
{
	if (img.empty())
		throw std::invalid_argument("extract: empty image");
	if (scales.empty())
		throw std::invalid_argument("extract: no scales given");
	const IntegralImage ii(img);
	SphDescriptor d;
	d.image_width = img.width();
	d.image_height = img.height();
	std::vector<double> values;
	values.reserve(static_cast<std::size_t>(msph_dims(img.width(), img.height(), scales)));
	for (const auto& p : scales)
		append_scale(d, ii, p, norm, values);
	d.values = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
	return d;
}

namespace {

std::string quote(const std::string& s)
{
	std::string out = "\"";
	for (char c : s) {
		if (c == '"')
			out += '"';
		out += c;
	}
	return out + '"';
}

// Splits one CSV line, honouring double-quoted fields.
std::vector<std::string> split_csv(const std::string& line)
{
	std::vector<std::string> out;
	std::string cur;
	bool quoted = false;
	for (std::size_t i = 0; i < line.size(); ++i) {
		const char c = line[i];
		if (quoted) {
			if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
				cur += '"';
				++i;
			} else if (c == '"') {
				quoted = false;
			} else {
				cur += c;
			}
		} else if (c == '"') {
			quoted = true;
		} else if (c == ',') {
			out.push_back(std::move(cur));
			cur.clear();
		} else {
			cur += c;
		}
	}
	out.push_back(std::move(cur));
	return out;
}

} // namespace

void write_descriptor_csv(std::ostream& out, const DescriptorFile& file)
{
	out << "# sph-descriptors v1 feature=" << file.feature << " scales=";
	for (std::size_t i = 0; i < file.scales.size(); ++i)
		out << (i ? ";" : "") << file.scales[i].key();
	out << '\n';

	const Eigen::Index dims = file.records.empty() ? 0 : file.records.front().values.size();
	out << "label,path,dims";
	for (Eigen::Index j = 0; j < dims; ++j)
		out << ",v" << j;
	out << '\n';

	for (const auto& r : file.records) {
		if (r.values.size() != dims)
			throw std::invalid_argument("write_descriptor_csv: records have differing dimensions");
		out << r.label << ',' << quote(r.path) << ',' << r.values.size();
		for (Eigen::Index j = 0; j < r.values.size(); ++j)
			out << ',' << format_real(r.values[j]);
		out << '\n';
	}
	if (!out)
		throw std::runtime_error("write_descriptor_csv: stream failure");
}

DescriptorFile read_descriptor_csv(std::istream& in)
{
	DescriptorFile file;
	std::string line;
	if (!std::getline(in, line) || line.rfind("# sph-descriptors v1 ", 0) != 0)
		throw std::runtime_error("descriptor CSV: missing or unsupported header");

	std::istringstream header(line.substr(std::string("# sph-descriptors v1 ").size()));
	std::string field;
	while (header >> field) {
		if (field.rfind("feature=", 0) == 0) {
			file.feature = field.substr(8);
		} else if (field.rfind("scales=", 0) == 0) {
			std::istringstream keys(field.substr(7));
			std::string key;
			while (std::getline(keys, key, ';'))
				if (!key.empty())
					file.scales.push_back(SphParams::parse(key));
		}
	}
	if (!std::getline(in, line) || line.rfind("label,path,dims", 0) != 0)
		throw std::runtime_error("descriptor CSV: missing column header");

	while (std::getline(in, line)) {
		if (line.empty())
			continue;
		const auto cols = split_csv(line);
		if (cols.size() < 3)
			throw std::runtime_error("descriptor CSV: short row");
		DescriptorRecord r;
		r.label = std::stoi(cols[0]);
		r.path = cols[1];
		const auto dims = static_cast<std::size_t>(std::stoll(cols[2]));
		if (cols.size() != dims + 3)
			throw std::runtime_error("descriptor CSV: row has " + std::to_string(cols.size() - 3) +
			                         " values, header says " + std::to_string(dims));
		r.values.resize(static_cast<Eigen::Index>(dims));
		for (std::size_t j = 0; j < dims; ++j)
			r.values[static_cast<Eigen::Index>(j)] = parse_real(cols[j + 3]);
		file.records.push_back(std::move(r));
	}
	return file;
}

} // namespace sph
