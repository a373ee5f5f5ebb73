#pragma once

#include "sph/descriptor.hpp"
#include "sph/image.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace sph {

enum class FeatureKind { Sph, Msph, Pixels };
enum class ReducerKind { Pca, Lda, None };
enum class ClassifierKind { Nnc, Crc };

/**
 * PaperNfold: each subject's samples are cut into n contiguous parts; fold i
 * trains on part i and tests on the other n - 1 parts (the inverse of the
 * usual k-fold convention).
 */
enum class ProtocolKind { PaperNfold, LeaveOneOut, FixedSplit };

std::string to_string(FeatureKind);
std::string to_string(ReducerKind);
std::string to_string(ClassifierKind);
std::string to_string(ProtocolKind);
FeatureKind parse_feature(const std::string&);
ReducerKind parse_reducer(const std::string&);
ClassifierKind parse_classifier(const std::string&);
ProtocolKind parse_protocol(const std::string&);

struct Protocol
{
	ProtocolKind kind = ProtocolKind::PaperNfold;
	int n = 2;           ///< PaperNfold part count
	int train_count = 0; ///< FixedSplit samples per subject
};

struct ExperimentConfig
{
	std::filesystem::path dataset;
	FeatureKind feature = FeatureKind::Sph;
	std::vector<SphParams> scales{default_sph_params()}; ///< one entry for SPH, several for MSPH
	ReducerKind reducer = ReducerKind::Pca;
	int dims = 0; ///< 0 = largest the reducer allows
	ClassifierKind classifier = ClassifierKind::Nnc;
	double lambda = 1e-3;
	Protocol protocol;
	int jobs = 0; ///< 0 = hardware concurrency
};

struct Split
{
	std::vector<std::size_t> train;
	std::vector<std::size_t> test;
};

std::vector<Split> kfold_splits(const std::vector<int>& labels, int n);
std::vector<Split> kfold_splits(const Dataset& ds, int n);
std::vector<Split> leave_one_out_splits(std::size_t sample_count);
std::vector<Split> leave_one_out_splits(const Dataset& ds);
Split fixed_split(const std::vector<int>& labels, int train_count);
Split fixed_split(const Dataset& ds, int train_count);
std::vector<Split> make_splits(const std::vector<int>& labels, const Protocol& protocol);

/// Runs body(i) for i in [0, count) on up to `jobs` threads (0 = all cores).
void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& body);

/// Feature row for one image.
Eigen::VectorXd extract_features(const GrayImage& img, FeatureKind feature, std::span<const SphParams> scales);
/// Sample-per-row feature matrix; rows follow dataset order.
Eigen::MatrixXd extract_features(const Dataset& ds, FeatureKind feature, std::span<const SphParams> scales, int jobs = 0);
std::string feature_key(FeatureKind feature, std::span<const SphParams> scales);

/// Feature matrices memoised by feature_key for one dataset.
class FeatureCache
{
public:
	explicit FeatureCache(const Dataset& ds, int jobs = 0) : ds_(&ds), jobs_(jobs) {}

	const Eigen::MatrixXd& get(FeatureKind feature, std::span<const SphParams> scales);
	/// Extraction wall time spent on the most recent cache miss, or 0 on a hit.
	double last_extraction_seconds() const { return last_seconds_; }

private:
	const Dataset* ds_;
	int jobs_;
	double last_seconds_ = 0.0;
	std::map<std::string, Eigen::MatrixXd> cache_;
};

struct ResultRecord
{
	std::vector<double> fold_accuracies;
	double mean = 0.0;
	double std = 0.0; ///< sample standard deviation (n - 1), 0 for a single fold
	std::vector<std::pair<std::size_t, std::size_t>> split_sizes; ///< (train, test) per fold
	Eigen::Index feature_dims = 0;
	Eigen::Index reduced_dims = 0; ///< output of the reducer on the last fold
	double extraction_seconds = 0.0;
	double classification_seconds = 0.0;
	ExperimentConfig config;

	bool operator==(const ResultRecord& o) const
	{
		return fold_accuracies == o.fold_accuracies && mean == o.mean && std == o.std && split_sizes == o.split_sizes &&
		       feature_dims == o.feature_dims && reduced_dims == o.reduced_dims;
	}
};

/// Fills mean and std from fold_accuracies.
void summarize(ResultRecord& r);
/// "mean±std%" with two decimals, e.g. "82.06±4.50%".
std::string format_accuracy(const ResultRecord& r);

/// Reduce, classify and score precomputed features under the config's protocol.
ResultRecord evaluate_features(const Eigen::MatrixXd& features, const std::vector<int>& labels, const ExperimentConfig& cfg);
/// Extracts features for every sample once, then evaluate_features.
ResultRecord run_pipeline(const Dataset& ds, const ExperimentConfig& cfg);
ResultRecord run_pipeline(const ExperimentConfig& cfg);

struct SweepGrid
{
	std::vector<int> block_sizes;
	std::vector<double> block_overlaps;
	std::vector<int> cell_sizes;
	std::vector<double> cell_overlaps;
	std::vector<double> ks;
};

struct SweepRow
{
	SphParams params;
	ResultRecord result;
};

struct SweepResult
{
	std::vector<SweepRow> rows;
	std::vector<std::pair<SphParams, std::string>> skipped;
};

/// One pipeline run per valid grid point (SPH features); invalid points are skipped with a reason.
SweepResult sweep(const Dataset& ds, const SweepGrid& grid, const ExperimentConfig& base);

/**
 * CSV schema shared by eval and sweep output:
 * feature,scales,reducer,dims,classifier,lambda,protocol,n,train_count,
 * feature_dims,reduced_dims,fold_accuracies,mean,std,extraction_s,classification_s
 * where scales joins SphParams keys with ';' and fold_accuracies joins with ';'.
 */
void write_result_csv_header(std::ostream& out);
void write_result_csv_row(std::ostream& out, const ResultRecord& r);

struct BenchConfig
{
	std::string name;
	FeatureKind feature = FeatureKind::Sph;
	std::vector<SphParams> scales;
};

struct BenchEntry
{
	std::string name;
	Eigen::Index dims = 0;
	std::vector<double> per_image_seconds; ///< one value per timed repetition
	double mean_seconds = 0.0;
	double std_seconds = 0.0;
	double total_seconds = 0.0; ///< summed over timed repetitions
};

struct BenchReport
{
	std::size_t images = 0;
	int repetitions = 0;
	std::string machine;
	std::vector<BenchEntry> entries;
};

/// Times single-threaded extraction over all images; one untimed warm-up pass per config.
BenchReport bench_extraction(std::span<const GrayImage> images, std::span<const BenchConfig> configs, int repetitions);
void write_bench_report(std::ostream& out, const BenchReport& report);

/**
 * Deterministic synthetic face-like dataset: each class has a random layout
 * of overlapping rectangles; every sample is that layout shifted by up to
 * `jitter` pixels per axis (edge replicated) plus integer noise in
 * [-noise, noise]. Only the seeded 32-bit Mersenne Twister stream is used,
 * so output is identical across platforms.
 */
struct SynthSpec
{
	int classes = 40;
	int samples = 10;
	int jitter = 1;
	int noise = 48;
	int width = 32;
	int height = 32;
	int rectangles = 10;
	std::uint32_t seed = 20160901u;
};

Dataset generate_synthetic(const SynthSpec& spec);
/// Writes root/<label name>/<nn>.pgm. Throws if root exists and is not empty.
void write_dataset(const Dataset& ds, const std::filesystem::path& root);

/// Experiment config as JSON (keys mirror ExperimentConfig; see README).
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& json_text);
std::string config_to_json(const ExperimentConfig& cfg);
SweepGrid parse_sweep_grid(const std::string& json_text);
/// Block-geometry grid: sizes {4,6,8,10} x overlaps {0,1/4,1/2,3/4}, 2x2 cells with 1/2 overlap, k = 1.
SweepGrid default_block_grid();

} // namespace sph
