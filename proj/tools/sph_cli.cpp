// sph: command-line front end for shape primitive histogram extraction and evaluation.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

#include "sph/descriptor.hpp"
#include "sph/experiments.hpp"
#include "sph/image.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

namespace {

using namespace sph;

struct Options
{
	std::string config;
	std::string dataset;
	std::string out;
	std::string feature;
	std::string reducer;
	int dims = -1;
	std::string classifier;
	double lambda = -1.0;
	std::string protocol;
	int n = -1;
	int train_count = -1;
	int jobs = -1;
	int verbosity = 0;

	int repetitions = 5;
	SynthSpec synth;
};

struct UsageError : std::invalid_argument
{
	using std::invalid_argument::invalid_argument;
};

void add_pipeline_flags(CLI::App& cmd, Options& o)
{
	cmd.add_option("--config", o.config, "JSON experiment config");
	cmd.add_option("--dataset", o.dataset, "dataset root (one directory per subject)");
	cmd.add_option("--out", o.out, "output file");
	cmd.add_option("--feature", o.feature, "sph | msph | pixels");
	cmd.add_option("--jobs", o.jobs, "extraction threads (default: all cores)");
}

void add_eval_flags(CLI::App& cmd, Options& o)
{
	add_pipeline_flags(cmd, o);
	cmd.add_option("--reducer", o.reducer, "pca | lda | none");
	cmd.add_option("--dims", o.dims, "reduced dimensionality (0 = maximum)");
	cmd.add_option("--classifier", o.classifier, "nnc | crc");
	cmd.add_option("--lambda", o.lambda, "CRC ridge parameter");
	cmd.add_option("--protocol", o.protocol, "paper-nfold | loo | fixed");
	cmd.add_option("--n", o.n, "part count for paper-nfold");
	cmd.add_option("--train-count", o.train_count, "training samples per subject for the fixed protocol");
}

std::string read_text(const std::string& path)
{
	std::ifstream in(path);
	if (!in)
		throw UsageError("cannot read config file: " + path);
	std::stringstream ss;
	ss << in.rdbuf();
	return ss.str();
}

// Config file first, then explicit flags on top.
ExperimentConfig resolve(const Options& o)
{
	ExperimentConfig cfg = o.config.empty() ? ExperimentConfig{} : parse_config(read_text(o.config));
	if (!o.dataset.empty())
		cfg.dataset = o.dataset;
	if (!o.feature.empty()) {
		const FeatureKind f = parse_feature(o.feature);
		if (f != cfg.feature) {
			if (f == FeatureKind::Msph)
				cfg.scales = default_msph_params();
			else if (f == FeatureKind::Sph && cfg.scales.size() != 1)
				cfg.scales = {default_sph_params()};
		}
		cfg.feature = f;
	}
	if (!o.reducer.empty())
		cfg.reducer = parse_reducer(o.reducer);
	if (o.dims >= 0)
		cfg.dims = o.dims;
	if (!o.classifier.empty())
		cfg.classifier = parse_classifier(o.classifier);
	if (o.lambda >= 0.0)
		cfg.lambda = o.lambda;
	if (!o.protocol.empty())
		cfg.protocol.kind = parse_protocol(o.protocol);
	if (o.n >= 0)
		cfg.protocol.n = o.n;
	if (o.train_count >= 0)
		cfg.protocol.train_count = o.train_count;
	if (o.jobs >= 0)
		cfg.jobs = o.jobs;
	if (cfg.dataset.empty())
		throw UsageError("no dataset given (use --dataset or the config key 'dataset')");
	return cfg;
}

std::ofstream open_out(const std::string& path)
{
	std::ofstream out(path);
	if (!out)
		throw std::runtime_error("cannot write " + path);
	return out;
}

int cmd_extract(const Options& o)
{
	const ExperimentConfig cfg = resolve(o);
	if (o.out.empty())
		throw UsageError("extract: --out is required");
	const Dataset ds = load_dataset(cfg.dataset);
	const Eigen::MatrixXd features = extract_features(ds, cfg.feature, cfg.scales, cfg.jobs);

	DescriptorFile file;
	file.feature = to_string(cfg.feature);
	if (cfg.feature != FeatureKind::Pixels)
		file.scales = cfg.scales;
	for (std::size_t i = 0; i < ds.size(); ++i)
		file.records.push_back({ds.samples[i].label, ds.samples[i].source_path,
		                        features.row(static_cast<Eigen::Index>(i)).transpose()});
	auto out = open_out(o.out);
	write_descriptor_csv(out, file);
	std::cout << "wrote " << ds.size() << " descriptors of " << features.cols() << " dims to " << o.out << '\n';
	return 0;
}

int cmd_eval(const Options& o)
{
	const ExperimentConfig cfg = resolve(o);
	const Dataset ds = load_dataset(cfg.dataset);
	const ResultRecord r = run_pipeline(ds, cfg);

	std::cout << "dataset: " << cfg.dataset.string() << " (" << ds.size() << " samples, " << ds.label_names.size()
	          << " subjects)\n";
	std::cout << "feature: " << to_string(cfg.feature) << " (" << r.feature_dims << " dims), reducer: "
	          << to_string(cfg.reducer) << " (" << r.reduced_dims << " dims), classifier: " << to_string(cfg.classifier)
	          << ", protocol: " << to_string(cfg.protocol.kind) << '\n';
	for (std::size_t f = 0; f < r.fold_accuracies.size(); ++f)
		std::printf("fold %zu: train %zu, test %zu, accuracy %.2f%%\n", f + 1, r.split_sizes[f].first,
		            r.split_sizes[f].second, 100.0 * r.fold_accuracies[f]);
	std::cout << "accuracy: " << format_accuracy(r) << '\n';

	if (!o.out.empty()) {
		auto out = open_out(o.out);
		write_result_csv_header(out);
		write_result_csv_row(out, r);
	}
	return 0;
}

int cmd_sweep(const Options& o)
{
	const ExperimentConfig cfg = resolve(o);
	const SweepGrid grid = o.config.empty() ? default_block_grid() : parse_sweep_grid(read_text(o.config));
	const Dataset ds = load_dataset(cfg.dataset);
	const SweepResult result = sweep(ds, grid, cfg);

	std::ostringstream csv;
	write_result_csv_header(csv);
	for (const auto& row : result.rows)
		write_result_csv_row(csv, row.result);
	if (o.out.empty()) {
		std::cout << csv.str();
	} else {
		auto out = open_out(o.out);
		out << csv.str();
		std::cout << "wrote " << result.rows.size() << " sweep rows to " << o.out << '\n';
	}
	for (const auto& [p, reason] : result.skipped)
		std::cerr << "skipped " << p.key() << ": " << reason << '\n';
	return 0;
}

int cmd_bench(const Options& o)
{
	ExperimentConfig cfg = resolve(o);
	const Dataset ds = load_dataset(cfg.dataset);
	std::vector<GrayImage> images;
	for (const auto& s : ds.samples)
		images.push_back(s.image);

	std::vector<BenchConfig> configs = {{"sph", FeatureKind::Sph, {default_sph_params()}},
	                                    {"msph", FeatureKind::Msph, default_msph_params()}};
	if (!o.config.empty() && cfg.feature != FeatureKind::Pixels)
		configs.push_back({"config-" + to_string(cfg.feature), cfg.feature, cfg.scales});

	const BenchReport report = bench_extraction(images, configs, o.repetitions);
	std::ostringstream text;
	write_bench_report(text, report);
	std::cout << text.str();
	if (!o.out.empty())
		open_out(o.out) << text.str();
	return 0;
}

int cmd_gen_synth(const Options& o)
{
	if (o.out.empty())
		throw UsageError("gen-synth: --out is required");
	const Dataset ds = generate_synthetic(o.synth);
	write_dataset(ds, o.out);
	std::cout << "wrote " << ds.size() << " images in " << ds.label_names.size() << " subject directories to " << o.out
	          << '\n';
	return 0;
}

} // namespace

int main(int argc, char** argv)
{
	CLI::App app{"Shape primitive histogram descriptors: extraction, evaluation, sweeps and benchmarks"};
	app.require_subcommand(1, 1);
	Options o;
	app.add_flag("-v,--verbose", o.verbosity, "more logging (repeatable)");

	auto* extract = app.add_subcommand("extract", "write one descriptor row per dataset image");
	add_pipeline_flags(*extract, o);

	auto* eval = app.add_subcommand("eval", "run the reduce/classify pipeline under a split protocol");
	add_eval_flags(*eval, o);

	auto* sweep_cmd = app.add_subcommand("sweep", "evaluate a grid of SPH geometries");
	add_eval_flags(*sweep_cmd, o);

	auto* bench = app.add_subcommand("bench", "time per-image feature extraction");
	add_pipeline_flags(*bench, o);
	bench->add_option("--repetitions", o.repetitions, "timed passes (>= 3)");

	auto* gen = app.add_subcommand("gen-synth", "write the deterministic synthetic dataset");
	gen->add_option("--out", o.out, "output directory (must be absent or empty)");
	gen->add_option("--classes", o.synth.classes, "subject count");
	gen->add_option("--samples", o.synth.samples, "images per subject");
	gen->add_option("--jitter", o.synth.jitter, "maximum shift in pixels");
	gen->add_option("--noise", o.synth.noise, "maximum additive noise");
	gen->add_option("--size", o.synth.width, "image width and height")->each([&](const std::string& v) {
		o.synth.height = std::stoi(v);
	});

	try {
		app.parse(argc, argv);
	} catch (const CLI::CallForHelp& e) {
		return app.exit(e);
	} catch (const CLI::ParseError& e) {
		app.exit(e);
		return 2;
	}

	spdlog::set_level(o.verbosity >= 2 ? spdlog::level::debug : o.verbosity == 1 ? spdlog::level::info
	                                                                              : spdlog::level::warn);
	try {
		if (*extract)
			return cmd_extract(o);
		if (*eval)
			return cmd_eval(o);
		if (*sweep_cmd)
			return cmd_sweep(o);
		if (*bench)
			return cmd_bench(o);
		if (*gen)
			return cmd_gen_synth(o);
	} catch (const std::invalid_argument& e) {
		std::cerr << "error: " << e.what() << '\n';
		return 2;
	} catch (const std::exception& e) {
		std::cerr << "error: " << e.what() << '\n';
		return 1;
	}
	return 2;
}
