#include "sph/experiments.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace sph {

using nlohmann::json;

namespace {

SphParams scale_from_json(const json& j)
{
	if (j.is_string())
		return SphParams::parse(j.get<std::string>());
	if (!j.is_object())
		throw std::invalid_argument("config: each scale must be a key string or an object");
	SphParams p;
	p.block_size = j.value("block", p.block_size);
	p.block_overlap = j.value("block_overlap", p.block_overlap);
	p.cell_size = j.value("cell", p.cell_size);
	p.cell_overlap = j.value("cell_overlap", p.cell_overlap);
	p.k = j.value("k", p.k);
	return p;
}

template <typename T>
std::vector<T> list_of(const json& j, const char* key, std::vector<T> fallback)
{
	if (!j.contains(key))
		return fallback;
	return j.at(key).get<std::vector<T>>();
}

} // namespace

ExperimentConfig parse_config(const std::string& json_text)
{
	json j;
	try {
		j = json::parse(json_text);
	} catch (const json::parse_error& e) {
		throw std::invalid_argument(std::string("config: malformed JSON: ") + e.what());
	}
	if (!j.is_object())
		throw std::invalid_argument("config: top level must be an object");

	static const std::set<std::string> known = {"dataset", "feature",  "scales",   "reducer",     "dims", "classifier",
	                                            "lambda",  "protocol", "n",        "train_count", "jobs", "sweep",
	                                            "bench"};
	for (const auto& [key, _] : j.items())
		if (!known.count(key))
			throw std::invalid_argument("config: unknown key '" + key + "'");

	ExperimentConfig cfg;
	try {
		if (j.contains("dataset"))
			cfg.dataset = j.at("dataset").get<std::string>();
		if (j.contains("feature"))
			cfg.feature = parse_feature(j.at("feature").get<std::string>());
		if (j.contains("scales")) {
			cfg.scales.clear();
			for (const auto& s : j.at("scales"))
				cfg.scales.push_back(scale_from_json(s));
		} else if (cfg.feature == FeatureKind::Msph) {
			cfg.scales = default_msph_params();
		}
		if (j.contains("reducer"))
			cfg.reducer = parse_reducer(j.at("reducer").get<std::string>());
		cfg.dims = j.value("dims", cfg.dims);
		if (j.contains("classifier"))
			cfg.classifier = parse_classifier(j.at("classifier").get<std::string>());
		cfg.lambda = j.value("lambda", cfg.lambda);
		if (j.contains("protocol"))
			cfg.protocol.kind = parse_protocol(j.at("protocol").get<std::string>());
		cfg.protocol.n = j.value("n", cfg.protocol.n);
		cfg.protocol.train_count = j.value("train_count", cfg.protocol.train_count);
		cfg.jobs = j.value("jobs", cfg.jobs);
	} catch (const json::exception& e) {
		throw std::invalid_argument(std::string("config: ") + e.what());
	}

	if (cfg.feature == FeatureKind::Sph && cfg.scales.size() != 1)
		throw std::invalid_argument("config: feature 'sph' needs exactly one scale");
	if (cfg.feature == FeatureKind::Msph && cfg.scales.empty())
		throw std::invalid_argument("config: feature 'msph' needs at least one scale");
	for (const auto& s : cfg.scales)
		s.validate();
	if (cfg.dims < 0)
		throw std::invalid_argument("config: dims must be >= 0");
	return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path)
{
	std::ifstream in(path);
	if (!in)
		throw std::invalid_argument("cannot read config file: " + path.string());
	std::stringstream ss;
	ss << in.rdbuf();
	return parse_config(ss.str());
}

std::string config_to_json(const ExperimentConfig& cfg)
{
	json j;
	j["dataset"] = cfg.dataset.string();
	j["feature"] = to_string(cfg.feature);
	j["scales"] = json::array();
	for (const auto& s : cfg.scales)
		j["scales"].push_back(s.key());
	j["reducer"] = to_string(cfg.reducer);
	j["dims"] = cfg.dims;
	j["classifier"] = to_string(cfg.classifier);
	j["lambda"] = cfg.lambda;
	j["protocol"] = to_string(cfg.protocol.kind);
	j["n"] = cfg.protocol.n;
	j["train_count"] = cfg.protocol.train_count;
	j["jobs"] = cfg.jobs;
	return j.dump(2);
}

SweepGrid parse_sweep_grid(const std::string& json_text)
{
	SweepGrid grid = default_block_grid();
	json j;
	try {
		j = json::parse(json_text);
	} catch (const json::parse_error& e) {
		throw std::invalid_argument(std::string("config: malformed JSON: ") + e.what());
	}
	if (!j.contains("sweep"))
		return grid;
	const json& s = j.at("sweep");
	try {
		grid.block_sizes = list_of(s, "block_sizes", grid.block_sizes);
		grid.block_overlaps = list_of(s, "block_overlaps", grid.block_overlaps);
		grid.cell_sizes = list_of(s, "cell_sizes", grid.cell_sizes);
		grid.cell_overlaps = list_of(s, "cell_overlaps", grid.cell_overlaps);
		grid.ks = list_of(s, "ks", grid.ks);
	} catch (const json::exception& e) {
		throw std::invalid_argument(std::string("config: sweep: ") + e.what());
	}
	return grid;
}

} // namespace sph
