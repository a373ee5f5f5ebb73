#include "sph/experiments.hpp"

#include "sph/classify.hpp"
#include "sph/subspace.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <thread>
#include <tuple>

namespace sph {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
	return std::chrono::duration<double>(Clock::now() - t0).count();
}

template <typename Enum, std::size_t N>
Enum parse_enum(const std::string& s, const std::pair<const char*, Enum> (&table)[N], const char* what)
{
	for (const auto& [name, value] : table)
		if (s == name)
			return value;
	std::string options;
	for (const auto& [name, value] : table)
		options += (options.empty() ? "" : ", ") + std::string(name);
	throw std::invalid_argument(std::string("unknown ") + what + " '" + s + "' (expected one of: " + options + ")");
}

constexpr std::pair<const char*, FeatureKind> kFeatures[] = {
    {"sph", FeatureKind::Sph}, {"msph", FeatureKind::Msph}, {"pixels", FeatureKind::Pixels}};
constexpr std::pair<const char*, ReducerKind> kReducers[] = {
    {"pca", ReducerKind::Pca}, {"lda", ReducerKind::Lda}, {"none", ReducerKind::None}};
constexpr std::pair<const char*, ClassifierKind> kClassifiers[] = {
    {"nnc", ClassifierKind::Nnc}, {"crc", ClassifierKind::Crc}};
constexpr std::pair<const char*, ProtocolKind> kProtocols[] = {
    {"paper-nfold", ProtocolKind::PaperNfold}, {"loo", ProtocolKind::LeaveOneOut}, {"fixed", ProtocolKind::FixedSplit}};

template <typename Enum, std::size_t N>
std::string name_of(Enum v, const std::pair<const char*, Enum> (&table)[N])
{
	for (const auto& [name, value] : table)
		if (value == v)
			return name;
	return "?";
}

// Sample indices grouped by label, labels ascending, indices in dataset order.
std::map<int, std::vector<std::size_t>> by_subject(const std::vector<int>& labels)
{
	std::map<int, std::vector<std::size_t>> out;
	for (std::size_t i = 0; i < labels.size(); ++i)
		out[labels[i]].push_back(i);
	return out;
}

} // namespace

std::string to_string(FeatureKind v) { return name_of(v, kFeatures); }
std::string to_string(ReducerKind v) { return name_of(v, kReducers); }
std::string to_string(ClassifierKind v) { return name_of(v, kClassifiers); }
std::string to_string(ProtocolKind v) { return name_of(v, kProtocols); }
FeatureKind parse_feature(const std::string& s) { return parse_enum(s, kFeatures, "feature"); }
ReducerKind parse_reducer(const std::string& s) { return parse_enum(s, kReducers, "reducer"); }
ClassifierKind parse_classifier(const std::string& s) { return parse_enum(s, kClassifiers, "classifier"); }
ProtocolKind parse_protocol(const std::string& s) { return parse_enum(s, kProtocols, "protocol"); }

std::vector<Split> kfold_splits(const std::vector<int>& labels, int n)
{
	if (n < 1)
		throw std::invalid_argument("paper-nfold: n must be >= 1");
	const auto subjects = by_subject(labels);
	for (const auto& [label, idx] : subjects)
		if (static_cast<int>(idx.size()) < n)
			throw std::invalid_argument("paper-nfold: subject " + std::to_string(label) + " has " +
			                            std::to_string(idx.size()) + " samples, fewer than n = " + std::to_string(n));

	std::vector<Split> folds(static_cast<std::size_t>(n));
	for (const auto& [label, idx] : subjects) {
		const std::size_t m = idx.size();
		for (int part = 0; part < n; ++part) {
			const std::size_t lo = m * part / n;
			const std::size_t hi = m * (part + 1) / n;
			for (int fold = 0; fold < n; ++fold) {
				auto& dst = fold == part ? folds[fold].train : folds[fold].test;
				dst.insert(dst.end(), idx.begin() + lo, idx.begin() + hi);
			}
		}
	}
	for (auto& f : folds) {
		std::sort(f.train.begin(), f.train.end());
		std::sort(f.test.begin(), f.test.end());
	}
	return folds;
}

std::vector<Split> kfold_splits(const Dataset& ds, int n) { return kfold_splits(ds.labels(), n); }

std::vector<Split> leave_one_out_splits(std::size_t sample_count)
{
	if (sample_count < 2)
		throw std::invalid_argument("leave-one-out: need at least two samples");
	std::vector<Split> out(sample_count);
	for (std::size_t i = 0; i < sample_count; ++i) {
		out[i].test = {i};
		out[i].train.reserve(sample_count - 1);
		for (std::size_t j = 0; j < sample_count; ++j)
			if (j != i)
				out[i].train.push_back(j);
	}
	return out;
}

std::vector<Split> leave_one_out_splits(const Dataset& ds) { return leave_one_out_splits(ds.size()); }

Split fixed_split(const std::vector<int>& labels, int train_count)
{
	if (train_count < 1)
		throw std::invalid_argument("fixed split: train_count must be >= 1");
	Split s;
	for (const auto& [label, idx] : by_subject(labels)) {
		if (static_cast<int>(idx.size()) <= train_count)
			throw std::invalid_argument("fixed split: subject " + std::to_string(label) + " has " +
			                            std::to_string(idx.size()) + " samples, needs more than " +
			                            std::to_string(train_count));
		s.train.insert(s.train.end(), idx.begin(), idx.begin() + train_count);
		s.test.insert(s.test.end(), idx.begin() + train_count, idx.end());
	}
	std::sort(s.train.begin(), s.train.end());
	std::sort(s.test.begin(), s.test.end());
	return s;
}

Split fixed_split(const Dataset& ds, int train_count) { return fixed_split(ds.labels(), train_count); }

std::vector<Split> make_splits(const std::vector<int>& labels, const Protocol& protocol)
{
	switch (protocol.kind) {
	case ProtocolKind::PaperNfold:
		return kfold_splits(labels, protocol.n);
	case ProtocolKind::LeaveOneOut:
		return leave_one_out_splits(labels.size());
	case ProtocolKind::FixedSplit:
		return {fixed_split(labels, protocol.train_count)};
	}
	throw std::logic_error("make_splits: unknown protocol");
}

void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& body)
{
	std::size_t workers = jobs > 0 ? static_cast<std::size_t>(jobs) : std::max(1u, std::thread::hardware_concurrency());
	workers = std::min(workers, count);
	if (workers <= 1) {
		for (std::size_t i = 0; i < count; ++i)
			body(i);
		return;
	}
	std::atomic<std::size_t> next{0};
	std::exception_ptr error;
	std::mutex error_mutex;
	{
		std::vector<std::jthread> pool;
		for (std::size_t w = 0; w < workers; ++w)
			pool.emplace_back([&] {
				for (std::size_t i = next++; i < count; i = next++) {
					try {
						body(i);
					} catch (...) {
						std::lock_guard lock(error_mutex);
						if (!error)
							error = std::current_exception();
						next = count;
					}
				}
			});
	}
	if (error)
		std::rethrow_exception(error);
}

Eigen::VectorXd extract_features(const GrayImage& img, FeatureKind feature, std::span<const SphParams> scales)
{
	switch (feature) {
	case FeatureKind::Sph:
		if (scales.size() != 1)
			throw std::invalid_argument("sph feature takes exactly one scale");
		return extract_sph(img, scales.front()).values;
	case FeatureKind::Msph:
		return extract_msph(img, scales).values;
	case FeatureKind::Pixels: {
		Eigen::VectorXd v(static_cast<Eigen::Index>(img.pixels().size()));
		for (std::size_t i = 0; i < img.pixels().size(); ++i)
			v[static_cast<Eigen::Index>(i)] = img.pixels()[i];
		return v;
	}
	}
	throw std::logic_error("extract_features: unknown feature");
}

Eigen::MatrixXd extract_features(const Dataset& ds, FeatureKind feature, std::span<const SphParams> scales, int jobs)
{
	if (ds.samples.empty())
		throw std::invalid_argument("extract_features: empty dataset");
	const auto& first = ds.samples.front().image;
	for (const auto& s : ds.samples)
		if (s.image.width() != first.width() || s.image.height() != first.height())
			throw std::invalid_argument("extract_features: " + s.source_path + " is " + std::to_string(s.image.width()) +
			                            "x" + std::to_string(s.image.height()) + ", expected " +
			                            std::to_string(first.width()) + "x" + std::to_string(first.height()));

	const Eigen::VectorXd probe = extract_features(first, feature, scales);
	Eigen::MatrixXd out(static_cast<Eigen::Index>(ds.size()), probe.size());
	out.row(0) = probe.transpose();
	parallel_for(ds.size() - 1, jobs, [&](std::size_t i) {
		out.row(static_cast<Eigen::Index>(i + 1)) = extract_features(ds.samples[i + 1].image, feature, scales).transpose();
	});
	return out;
}

std::string feature_key(FeatureKind feature, std::span<const SphParams> scales)
{
	std::string key = to_string(feature);
	if (feature != FeatureKind::Pixels)
		for (const auto& p : scales)
			key += ":" + p.key();
	return key;
}

const Eigen::MatrixXd& FeatureCache::get(FeatureKind feature, std::span<const SphParams> scales)
{
	const std::string key = feature_key(feature, scales);
	if (auto it = cache_.find(key); it != cache_.end()) {
		last_seconds_ = 0.0;
		return it->second;
	}
	const auto t0 = Clock::now();
	auto [it, _] = cache_.emplace(key, extract_features(*ds_, feature, scales, jobs_));
	last_seconds_ = seconds_since(t0);
	return it->second;
}

namespace {

// Mean and sample standard deviation; std is 0 for fewer than two values.
std::pair<double, double> mean_std(const std::vector<double>& a)
{
	if (a.empty())
		return {0.0, 0.0};
	const double mean = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
	double ss = 0.0;
	for (double v : a)
		ss += (v - mean) * (v - mean);
	return {mean, a.size() > 1 ? std::sqrt(ss / static_cast<double>(a.size() - 1)) : 0.0};
}

} // namespace

void summarize(ResultRecord& r)
{
	std::tie(r.mean, r.std) = mean_std(r.fold_accuracies);
}

std::string format_accuracy(const ResultRecord& r)
{
	char buf[64];
	std::snprintf(buf, sizeof buf, "%.2f±%.2f%%", 100.0 * r.mean, 100.0 * r.std);
	return buf;
}

namespace {

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& m, const std::vector<std::size_t>& idx)
{
	Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), m.cols());
	for (std::size_t i = 0; i < idx.size(); ++i)
		out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(idx[i]));
	return out;
}

std::vector<int> gather(const std::vector<int>& v, const std::vector<std::size_t>& idx)
{
	std::vector<int> out;
	out.reserve(idx.size());
	for (auto i : idx)
		out.push_back(v[i]);
	return out;
}

struct Reduced
{
	Eigen::MatrixXd train;
	Eigen::MatrixXd test;
};

Reduced reduce(const Eigen::MatrixXd& train, const std::vector<int>& train_labels, const Eigen::MatrixXd& test,
               const ExperimentConfig& cfg)
{
	const Eigen::Index n = train.rows();
	switch (cfg.reducer) {
	case ReducerKind::None:
		return {train, test};
	case ReducerKind::Pca: {
		const Eigen::Index cap = std::min(n - 1, train.cols());
		if (cap < 1)
			throw std::invalid_argument("pca: training split needs at least two samples");
		const Eigen::Index d = cfg.dims > 0 ? std::min<Eigen::Index>(cfg.dims, cap) : cap;
		const auto model = fit_pca(train, d);
		if (model.zero_variance)
			spdlog::warn("pca: training samples are all identical; projection carries no variance");
		return {project_rows(model, train), project_rows(model, test)};
	}
	case ReducerKind::Lda: {
		const auto classes = static_cast<Eigen::Index>(by_subject(train_labels).size());
		if (classes < 2)
			throw std::invalid_argument("lda: training split has fewer than two classes");
		const Eigen::Index cap = classes - 1;
		const Eigen::Index d = cfg.dims > 0 ? std::min<Eigen::Index>(cfg.dims, cap) : cap;
		const auto model = fit_lda(train, train_labels, d);
		return {project_rows(model, train), project_rows(model, test)};
	}
	}
	throw std::logic_error("reduce: unknown reducer");
}

} // namespace

ResultRecord evaluate_features(const Eigen::MatrixXd& features, const std::vector<int>& labels, const ExperimentConfig& cfg)
{
	if (features.rows() != static_cast<Eigen::Index>(labels.size()))
		throw std::invalid_argument("evaluate_features: feature rows do not match labels");
	if (cfg.classifier == ClassifierKind::Crc && !(cfg.lambda > 0.0))
		throw std::invalid_argument("crc: lambda must be positive");

	ResultRecord rec;
	rec.config = cfg;
	rec.feature_dims = features.cols();
	const auto splits = make_splits(labels, cfg.protocol);
	const auto t0 = Clock::now();
	for (std::size_t f = 0; f < splits.size(); ++f) {
		const auto& split = splits[f];
		try {
			const auto train_labels = gather(labels, split.train);
			const auto truth = gather(labels, split.test);
			auto [train, test] = reduce(gather_rows(features, split.train), train_labels,
			                            gather_rows(features, split.test), cfg);
			rec.reduced_dims = train.cols();

			const Gallery<double> gallery(std::move(train), train_labels);
			std::vector<int> predicted(split.test.size());
			if (cfg.classifier == ClassifierKind::Nnc) {
				parallel_for(predicted.size(), cfg.jobs, [&](std::size_t i) {
					predicted[i] = nnc_classify(gallery, test.row(static_cast<Eigen::Index>(i))).label;
				});
			} else {
				const CrcClassifier<double> crc(gallery, cfg.lambda);
				parallel_for(predicted.size(), cfg.jobs, [&](std::size_t i) {
					predicted[i] = crc.classify(test.row(static_cast<Eigen::Index>(i))).label;
				});
			}
			rec.fold_accuracies.push_back(evaluate(predicted, truth));
			rec.split_sizes.emplace_back(split.train.size(), split.test.size());
		} catch (const std::invalid_argument& e) {
			throw std::invalid_argument("fold " + std::to_string(f + 1) + "/" + std::to_string(splits.size()) + ": " + e.what());
		} catch (const std::exception& e) {
			throw std::runtime_error("fold " + std::to_string(f + 1) + "/" + std::to_string(splits.size()) + ": " + e.what());
		}
	}
	rec.classification_seconds = seconds_since(t0);
	summarize(rec);
	return rec;
}

ResultRecord run_pipeline(const Dataset& ds, const ExperimentConfig& cfg)
{
	// validate the protocol before paying for extraction
	make_splits(ds.labels(), cfg.protocol);
	const auto t0 = Clock::now();
	const Eigen::MatrixXd features = extract_features(ds, cfg.feature, cfg.scales, cfg.jobs);
	const double extraction = seconds_since(t0);
	ResultRecord rec = evaluate_features(features, ds.labels(), cfg);
	rec.extraction_seconds = extraction;
	return rec;
}

ResultRecord run_pipeline(const ExperimentConfig& cfg)
{
	return run_pipeline(load_dataset(cfg.dataset), cfg);
}

SweepResult sweep(const Dataset& ds, const SweepGrid& grid, const ExperimentConfig& base)
{
	if (ds.samples.empty())
		throw std::invalid_argument("sweep: empty dataset");
	const int width = ds.samples.front().image.width();
	const int height = ds.samples.front().image.height();
	const auto labels = ds.labels();
	make_splits(labels, base.protocol);

	FeatureCache cache(ds, base.jobs);
	SweepResult out;
	for (int b : grid.block_sizes)
		for (double bo : grid.block_overlaps)
			for (int f : grid.cell_sizes)
				for (double co : grid.cell_overlaps)
					for (double k : grid.ks) {
						const SphParams p{b, bo, f, co, k};
						try {
							p.validate();
							if (b > width || b > height)
								throw std::invalid_argument("block larger than the " + std::to_string(width) + "x" +
								                            std::to_string(height) + " images");
						} catch (const std::invalid_argument& e) {
							spdlog::warn("sweep: skipping {}: {}", p.key(), e.what());
							out.skipped.emplace_back(p, e.what());
							continue;
						}
						ExperimentConfig cfg = base;
						cfg.feature = FeatureKind::Sph;
						cfg.scales = {p};
						const auto& features = cache.get(FeatureKind::Sph, cfg.scales);
						ResultRecord rec = evaluate_features(features, labels, cfg);
						rec.extraction_seconds = cache.last_extraction_seconds();
						spdlog::info("sweep: {} dims={} acc={}", p.key(), rec.feature_dims, format_accuracy(rec));
						out.rows.push_back({p, std::move(rec)});
					}
	return out;
}

SweepGrid default_block_grid()
{
	return {{4, 6, 8, 10}, {0.0, 0.25, 0.5, 0.75}, {2}, {0.5}, {1.0}};
}

namespace {

std::string join_real(const std::vector<double>& v, char sep)
{
	std::string out;
	char buf[32];
	for (std::size_t i = 0; i < v.size(); ++i) {
		std::snprintf(buf, sizeof buf, "%.6f", v[i]);
		if (i)
			out += sep;
		out += buf;
	}
	return out;
}

} // namespace

void write_result_csv_header(std::ostream& out)
{
	out << "feature,scales,reducer,dims,classifier,lambda,protocol,n,train_count,feature_dims,reduced_dims,"
	       "fold_accuracies,mean,std,extraction_s,classification_s\n";
}

void write_result_csv_row(std::ostream& out, const ResultRecord& r)
{
	const auto& c = r.config;
	std::string scales;
	if (c.feature != FeatureKind::Pixels)
		for (std::size_t i = 0; i < c.scales.size(); ++i)
			scales += (i ? ";" : "") + c.scales[i].key();
	char nums[160];
	std::snprintf(nums, sizeof nums, "%.6f,%.6f,%.6f,%.6f", r.mean, r.std, r.extraction_seconds, r.classification_seconds);
	out << to_string(c.feature) << ',' << scales << ',' << to_string(c.reducer) << ',' << c.dims << ','
	    << to_string(c.classifier) << ',' << c.lambda << ',' << to_string(c.protocol.kind) << ',' << c.protocol.n << ','
	    << c.protocol.train_count << ',' << r.feature_dims << ',' << r.reduced_dims << ','
	    << join_real(r.fold_accuracies, ';') << ',' << nums << '\n';
}

BenchReport bench_extraction(std::span<const GrayImage> images, std::span<const BenchConfig> configs, int repetitions)
{
	if (repetitions < 3)
		throw std::invalid_argument("bench: repetitions must be >= 3");
	if (images.empty())
		throw std::invalid_argument("bench: no images");

	BenchReport report;
	report.images = images.size();
	report.repetitions = repetitions;
	report.machine = "threads=" + std::to_string(std::thread::hardware_concurrency()) +
#if defined(__clang__)
	                 " compiler=clang-" __clang_version__
#elif defined(__GNUC__)
	                 " compiler=gcc-" __VERSION__
#else
	                 " compiler=unknown"
#endif
#ifdef NDEBUG
	                 " build=optimized";
#else
	                 " build=debug";
#endif

	for (const auto& cfg : configs) {
		BenchEntry e;
		e.name = cfg.name;
		double sink = 0.0;
		for (const auto& img : images) // warm-up
			sink += extract_features(img, cfg.feature, cfg.scales).sum();
		e.dims = extract_features(images.front(), cfg.feature, cfg.scales).size();
		for (int r = 0; r < repetitions; ++r) {
			const auto t0 = Clock::now();
			for (const auto& img : images)
				sink += extract_features(img, cfg.feature, cfg.scales)[0];
			const double s = seconds_since(t0);
			e.total_seconds += s;
			e.per_image_seconds.push_back(s / static_cast<double>(images.size()));
		}
		if (sink < 0) // keeps the extraction observable
			spdlog::debug("bench sink {}", sink);
		std::tie(e.mean_seconds, e.std_seconds) = mean_std(e.per_image_seconds);
		report.entries.push_back(std::move(e));
	}
	return report;
}

void write_bench_report(std::ostream& out, const BenchReport& report)
{
	out << "# machine: " << report.machine << "\n# images: " << report.images << " repetitions: " << report.repetitions
	    << '\n';
	out << "config,dims,mean_us_per_image,std_us_per_image,total_s\n";
	char buf[128];
	for (const auto& e : report.entries) {
		std::snprintf(buf, sizeof buf, "%.3f,%.3f,%.6f", 1e6 * e.mean_seconds, 1e6 * e.std_seconds, e.total_seconds);
		out << e.name << ',' << e.dims << ',' << buf << '\n';
	}
}

} // namespace sph
