// End-to-end runs of the sph executable.

#include "sph/descriptor.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <sys/wait.h>

namespace sph {
namespace {

namespace fs = std::filesystem;

struct CliResult
{
	int status = -1;
	std::string output; // stdout and stderr interleaved
};

CliResult run_cli(const std::string& args)
{
	const std::string cmd = std::string("'") + SPH_CLI_PATH + "' " + args + " 2>&1";
	CliResult r;
	std::FILE* pipe = popen(cmd.c_str(), "r");
	if (!pipe)
		return r;
	char buf[4096];
	std::size_t got;
	while ((got = std::fread(buf, 1, sizeof buf, pipe)) > 0)
		r.output.append(buf, got);
	const int raw = pclose(pipe);
	r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
	return r;
}

std::string slurp(const fs::path& p)
{
	std::ifstream in(p, std::ios::binary);
	return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::size_t count_files(const fs::path& root)
{
	std::size_t n = 0;
	for (const auto& e : fs::recursive_directory_iterator(root))
		n += e.is_regular_file();
	return n;
}

TEST(Cli, MissingConfigIsAUsageError)
{
	const CliResult r = run_cli("eval --config /nonexistent/dir/exp.json");
	EXPECT_EQ(r.status, 2);
	EXPECT_NE(r.output.find("/nonexistent/dir/exp.json"), std::string::npos) << r.output;
}

TEST(Cli, UnknownFlagIsAUsageError)
{
	EXPECT_EQ(run_cli("eval --frobnicate 3").status, 2);
	EXPECT_EQ(run_cli("").status, 2);
}

TEST(Cli, GenSynthIsDeterministicAndRefusesNonEmptyOutput)
{
	testing::TempDir dir("cli_gen");
	const CliResult a = run_cli("gen-synth --out '" + (dir.path() / "a").string() + "'");
	ASSERT_EQ(a.status, 0) << a.output;
	const CliResult b = run_cli("gen-synth --out '" + (dir.path() / "b").string() + "'");
	ASSERT_EQ(b.status, 0) << b.output;
	EXPECT_EQ(count_files(dir.path() / "a"), 400u);
	for (const auto& e : fs::recursive_directory_iterator(dir.path() / "a")) {
		if (!e.is_regular_file())
			continue;
		const fs::path rel = fs::relative(e.path(), dir.path() / "a");
		ASSERT_EQ(slurp(e.path()), slurp(dir.path() / "b" / rel)) << rel;
	}
	const CliResult again = run_cli("gen-synth --out '" + (dir.path() / "a").string() + "'");
	EXPECT_NE(again.status, 0);
	EXPECT_NE(again.output.find("not empty"), std::string::npos) << again.output;
}

class CliDataset : public ::testing::Test
{
protected:
	static void SetUpTestSuite()
	{
		dir_ = new testing::TempDir("cli_ds");
		run_cli("gen-synth --out '" + data("synth") + "'");
		run_cli("gen-synth --jitter 0 --noise 0 --classes 5 --samples 4 --out '" + data("clean") + "'");
	}
	static void TearDownTestSuite()
	{
		delete dir_;
		dir_ = nullptr;
	}
	static std::string data(const std::string& name) { return (dir_->path() / name).string(); }

	static testing::TempDir* dir_;
};

testing::TempDir* CliDataset::dir_ = nullptr;

TEST_F(CliDataset, ExtractWritesOneRowPerImage)
{
	const std::string out = data("sph.csv");
	const CliResult r = run_cli("extract --dataset '" + data("synth") + "' --out '" + out + "'");
	ASSERT_EQ(r.status, 0) << r.output;
	std::ifstream in(out);
	const DescriptorFile f = read_descriptor_csv(in);
	ASSERT_EQ(f.records.size(), 400u);
	for (const auto& rec : f.records)
		ASSERT_EQ(rec.values.size(), 735);
	EXPECT_EQ(f.feature, "sph");
	EXPECT_EQ(f.records.back().label, 39);

	const std::string out2 = data("msph.csv");
	ASSERT_EQ(run_cli("extract --feature msph --dataset '" + data("synth") + "' --out '" + out2 + "'").status, 0);
	std::ifstream in2(out2);
	EXPECT_EQ(read_descriptor_csv(in2).records.front().values.size(), 885);
}

TEST_F(CliDataset, EvalOnCleanDataIsPerfect)
{
	const CliResult r = run_cli("eval --dataset '" + data("clean") + "' --protocol paper-nfold --n 2");
	ASSERT_EQ(r.status, 0) << r.output;
	EXPECT_NE(r.output.find("accuracy: 100.00±0.00%"), std::string::npos) << r.output;
	EXPECT_NE(r.output.find("fold 1: train 10, test 10"), std::string::npos) << r.output;
	EXPECT_NE(r.output.find("fold 2: train 10, test 10"), std::string::npos) << r.output;
}

TEST_F(CliDataset, EvalConfigFileWithFlagOverride)
{
	const fs::path cfg = dir_->path() / "exp.json";
	std::ofstream(cfg) << R"({"dataset": ")" << data("clean") << R"(", "classifier": "crc", "protocol": "fixed", "train_count": 3})";
	const std::string csv = data("eval.csv");
	const CliResult r = run_cli("eval --config '" + cfg.string() + "' --reducer lda --out '" + csv + "'");
	ASSERT_EQ(r.status, 0) << r.output;
	EXPECT_NE(r.output.find("reducer: lda"), std::string::npos) << r.output;
	EXPECT_NE(r.output.find("fold 1: train 15, test 5"), std::string::npos) << r.output;
	EXPECT_NE(slurp(csv).find("sph,b8/o0.5/f2/co0.5/k1,lda,"), std::string::npos);
}

TEST_F(CliDataset, TooManyFoldsIsAUsageError)
{
	const CliResult r = run_cli("eval --dataset '" + data("clean") + "' --n 5");
	EXPECT_EQ(r.status, 2);
	EXPECT_NE(r.output.find("fewer than n = 5"), std::string::npos) << r.output;
}

TEST_F(CliDataset, MissingDatasetIsARuntimeError)
{
	EXPECT_EQ(run_cli("eval --dataset '" + data("absent") + "'").status, 1);
}

TEST_F(CliDataset, BenchReportsBothDescriptors)
{
	const CliResult r = run_cli("bench --dataset '" + data("clean") + "' --repetitions 3");
	ASSERT_EQ(r.status, 0) << r.output;
	EXPECT_NE(r.output.find("msph"), std::string::npos);
	EXPECT_NE(r.output.find("885"), std::string::npos);
}

TEST_F(CliDataset, SweepPrintsOneRowPerGridPoint)
{
	const CliResult r = run_cli("sweep --dataset '" + data("clean") + "' --out '" + data("sweep.csv") + "'");
	ASSERT_EQ(r.status, 0) << r.output;
	const std::string csv = slurp(data("sweep.csv"));
	EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 17);
}

} // namespace
} // namespace sph
