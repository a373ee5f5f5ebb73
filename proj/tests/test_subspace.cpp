#include "sph/subspace.hpp"

#include <Eigen/SVD>
#include <gtest/gtest.h>

#include <random>
#include <sstream>

namespace sph {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd random_matrix(std::mt19937& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0)
{
	std::normal_distribution<double> g(0.0, scale);
	MatrixXd m(rows, cols);
	for (Eigen::Index i = 0; i < m.size(); ++i)
		m.data()[i] = g(rng);
	return m;
}

// SVD of the centred data: right singular vectors are the principal axes and
// sigma^2 / (n - 1) the covariance eigenvalues.
struct SvdOracle
{
	MatrixXd axes; // rows
	VectorXd eigenvalues;
};

SvdOracle svd_oracle(const MatrixXd& X)
{
	const MatrixXd c = X.rowwise() - X.colwise().mean();
	Eigen::JacobiSVD<MatrixXd> svd(c, Eigen::ComputeThinV);
	return {svd.matrixV().transpose(), svd.singularValues().array().square() / double(X.rows() - 1)};
}

void expect_orthonormal_rows(const MatrixXd& rows, double tol = 1e-10)
{
	const MatrixXd gram = rows * rows.transpose();
	EXPECT_LT((gram - MatrixXd::Identity(rows.rows(), rows.rows())).cwiseAbs().maxCoeff(), tol);
}

void expect_canonical_signs(const MatrixXd& rows)
{
	for (Eigen::Index r = 0; r < rows.rows(); ++r) {
		Eigen::Index arg = 0;
		rows.row(r).cwiseAbs().maxCoeff(&arg);
		EXPECT_GT(rows(r, arg), 0.0) << "row " << r;
	}
}

TEST(Pca, TwoPointsGiveTheirDifference)
{
	MatrixXd X(2, 3);
	X << 1, 2, 3,
	     3, 2, -1;
	const auto m = fit_pca(X, 1);
	EXPECT_TRUE(m.mean.isApprox(Eigen::Vector3d(2, 2, 1)));
	const Eigen::Vector3d dir = Eigen::Vector3d(-2, 0, 4).normalized();
	EXPECT_NEAR(std::abs(m.components.row(0).dot(dir)), 1.0, 1e-12);
	EXPECT_GT(m.components(0, 2), 0.0);
	// variance of {-sqrt5, +sqrt5} with divisor 1
	EXPECT_NEAR(m.eigenvalues(0), 10.0, 1e-12);
}

TEST(Pca, SingleVaryingAxis)
{
	MatrixXd X = MatrixXd::Zero(5, 4);
	X.col(2) << 1, 2, 3, 4, 5;
	const auto m = fit_pca(X, 1);
	EXPECT_NEAR(m.components(0, 2), 1.0, 1e-12);
	EXPECT_NEAR(m.eigenvalues(0), 2.5, 1e-12);
}

TEST(Pca, MatchesSvdOracle)
{
	std::mt19937 rng(31);
	// tall and wide inputs take the covariance and Gram paths respectively
	for (auto [n, dims] : {std::pair<Eigen::Index, Eigen::Index>{20, 50}, {60, 12}, {12, 12}}) {
		MatrixXd X = random_matrix(rng, n, dims);
		X.col(0) *= 6.0;
		X.col(1) *= 4.0;
		X.col(2) *= 2.5;
		const Eigen::Index d = 5;
		const auto m = fit_pca(X, d);
		const auto o = svd_oracle(X);
		ASSERT_EQ(m.components.rows(), d);
		ASSERT_EQ(m.components.cols(), dims);
		for (Eigen::Index i = 0; i < d; ++i) {
			EXPECT_NEAR(m.eigenvalues(i), o.eigenvalues(i), 1e-9 * o.eigenvalues(0)) << n << "x" << dims << " i=" << i;
			EXPECT_NEAR(std::abs(m.components.row(i).dot(o.axes.row(i))), 1.0, 1e-8);
		}
		expect_orthonormal_rows(m.components);
		expect_canonical_signs(m.components);
		EXPECT_TRUE(std::is_sorted(m.eigenvalues.data(), m.eigenvalues.data() + d, std::greater<>()));
	}
}

TEST(Pca, ReconstructionErrorEqualsDiscardedVariance)
{
	std::mt19937 rng(77);
	const MatrixXd X = random_matrix(rng, 30, 8);
	const auto full = svd_oracle(X);
	for (Eigen::Index d = 1; d <= 7; ++d) {
		const auto m = fit_pca(X, d);
		const MatrixXd c = X.rowwise() - m.mean.transpose();
		const MatrixXd recon = c * m.components.transpose() * m.components;
		const double err = (c - recon).squaredNorm();
		const double discarded = full.eigenvalues.tail(8 - d).sum() * 29.0;
		EXPECT_NEAR(err, discarded, 1e-9 * c.squaredNorm()) << "d=" << d;
	}
}

TEST(Pca, DiagonalCovarianceGivesCoordinateAxes)
{
	std::mt19937 rng(5);
	MatrixXd X(4, 3);
	X << 3, 0, 0,
	    -3, 0, 0,
	     0, 1, 0,
	     0, -1, 0;
	const auto m = fit_pca(X, 2);
	EXPECT_TRUE(m.components.row(0).isApprox(Eigen::RowVector3d(1, 0, 0)));
	EXPECT_TRUE(m.components.row(1).isApprox(Eigen::RowVector3d(0, 1, 0)));
	EXPECT_NEAR(m.eigenvalues(0), 6.0, 1e-12);
	EXPECT_NEAR(m.eigenvalues(1), 2.0 / 3.0, 1e-12);
}

TEST(Pca, IdenticalSamplesFallBackToOrthonormalCompletion)
{
	MatrixXd X = MatrixXd::Ones(4, 6) * 3.0;
	const auto m = fit_pca(X, 3);
	EXPECT_TRUE(m.zero_variance);
	EXPECT_EQ(m.eigenvalues, VectorXd::Zero(3));
	expect_orthonormal_rows(m.components);
	EXPECT_EQ(project(m, X.row(0).transpose()), VectorXd::Zero(3));
}

TEST(Pca, RankDeficientDataCompletesBasis)
{
	std::mt19937 rng(12);
	// 10 samples living on a 2-d plane in 5-d
	const MatrixXd X = random_matrix(rng, 10, 2) * random_matrix(rng, 2, 5);
	const auto m = fit_pca(X, 4);
	EXPECT_FALSE(m.zero_variance);
	expect_orthonormal_rows(m.components);
	EXPECT_GT(m.eigenvalues(1), 1e-6);
	EXPECT_EQ(m.eigenvalues(2), 0.0);
	EXPECT_EQ(m.eigenvalues(3), 0.0);
}

TEST(Pca, RejectsBadDimensions)
{
	const MatrixXd X = MatrixXd::Random(5, 3);
	EXPECT_THROW(fit_pca(X, 0), std::invalid_argument);
	EXPECT_THROW(fit_pca(X, 4), std::invalid_argument);
	EXPECT_THROW(fit_pca(MatrixXd::Random(1, 3), 1), std::invalid_argument);
	EXPECT_NO_THROW(fit_pca(X, 3));
}

TEST(Pca, WorksInSinglePrecision)
{
	std::mt19937 rng(3);
	const Eigen::MatrixXf X = random_matrix(rng, 20, 6).cast<float>();
	const PcaModel<float> m = fit_pca(X, 3);
	EXPECT_LT((m.components * m.components.transpose() - Eigen::MatrixXf::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-5f);
}

TEST(Projection, MeanMapsToOriginAndBatchMatchesSingle)
{
	std::mt19937 rng(8);
	const MatrixXd X = random_matrix(rng, 15, 9);
	const auto m = fit_pca(X, 4);
	EXPECT_LT(project(m, m.mean).norm(), 1e-12);
	const MatrixXd batch = project_rows(m, X);
	for (Eigen::Index i = 0; i < X.rows(); ++i)
		EXPECT_LT((batch.row(i).transpose() - project(m, X.row(i).transpose())).norm(), 1e-12);
}

TEST(Projection, FullRankPcaPreservesDistances)
{
	std::mt19937 rng(19);
	const MatrixXd X = random_matrix(rng, 12, 6);
	const auto m = fit_pca(X, 6);
	const MatrixXd Y = project_rows(m, X);
	for (Eigen::Index i = 0; i < 12; ++i)
		for (Eigen::Index j = i + 1; j < 12; ++j)
			EXPECT_NEAR((Y.row(i) - Y.row(j)).norm(), (X.row(i) - X.row(j)).norm(), 1e-10);
}

TEST(Projection, DimensionMismatchThrows)
{
	const auto m = fit_pca(MatrixXd::Random(6, 4), 2);
	EXPECT_THROW(project(m, VectorXd::Zero(5)), std::invalid_argument);
	EXPECT_THROW(project_rows(m, MatrixXd::Zero(2, 3)), std::invalid_argument);
}

// Three Gaussian blobs far apart relative to their spread.
struct Blobs
{
	MatrixXd X;
	std::vector<int> labels;
};

Blobs make_blobs(std::mt19937& rng, int per_class, Eigen::Index dims, double separation)
{
	Blobs b;
	b.X.resize(3 * per_class, dims);
	std::normal_distribution<double> g(0.0, 1.0);
	const MatrixXd centres = random_matrix(rng, 3, dims).rowwise().normalized() * separation;
	for (int c = 0; c < 3; ++c)
		for (int i = 0; i < per_class; ++i) {
			for (Eigen::Index k = 0; k < dims; ++k)
				b.X(c * per_class + i, k) = centres(c, k) + g(rng);
			b.labels.push_back(c);
		}
	return b;
}

TEST(Lda, SeparatesBlobs)
{
	std::mt19937 rng(100);
	const Blobs b = make_blobs(rng, 20, 10, 20.0);
	const auto m = fit_lda(b.X, b.labels, 2);
	EXPECT_EQ(m.output_dims(), 2);
	const MatrixXd Y = project_rows(m, b.X);

	// per-class means in the projected space, then pooled within-class spread
	std::vector<Eigen::RowVectorXd> mu(3, Eigen::RowVectorXd::Zero(2));
	for (Eigen::Index i = 0; i < Y.rows(); ++i)
		mu[b.labels[i]] += Y.row(i) / 20.0;
	double within = 0.0;
	for (Eigen::Index i = 0; i < Y.rows(); ++i)
		within += (Y.row(i) - mu[b.labels[i]]).squaredNorm();
	const double pooled_sd = std::sqrt(within / (Y.rows() - 3));
	for (int a = 0; a < 3; ++a)
		for (int c = a + 1; c < 3; ++c)
			EXPECT_GT((mu[a] - mu[c]).norm(), 5.0 * pooled_sd);
	EXPECT_TRUE(std::is_sorted(m.fisher_ratios.data(), m.fisher_ratios.data() + 2, std::greater<>()));
}

TEST(Lda, TwoSymmetricClassesAlignWithMeanDifference)
{
	std::mt19937 rng(6);
	std::normal_distribution<double> g(0.0, 1.0);
	MatrixXd X(40, 4);
	std::vector<int> labels;
	for (int i = 0; i < 40; ++i) {
		const double side = i < 20 ? -1.0 : 1.0;
		// isotropic noise, class means at +-5 e1
		X.row(i) << 5.0 * side + g(rng), g(rng), g(rng), g(rng);
		labels.push_back(i < 20 ? 0 : 1);
	}
	const auto m = fit_lda(X, labels, 1);
	const Eigen::RowVectorXd w = m.combined.row(0).normalized();
	EXPECT_GT(std::abs(w(0)), 0.95);
	EXPECT_GT(w(0), 0.0);
}

TEST(Lda, OutputDimsBoundedByClassCount)
{
	std::mt19937 rng(2);
	const Blobs b = make_blobs(rng, 5, 6, 10.0);
	EXPECT_NO_THROW(fit_lda(b.X, b.labels, 2));
	EXPECT_THROW(fit_lda(b.X, b.labels, 3), std::invalid_argument);
	EXPECT_THROW(fit_lda(b.X, b.labels, 0), std::invalid_argument);
	EXPECT_THROW(fit_lda(b.X, std::vector<int>(15, 0), 1), std::invalid_argument);
	EXPECT_THROW(fit_lda(b.X, std::vector<int>(3, 0), 1), std::invalid_argument);
}

TEST(Lda, OneSamplePerClassStillFits)
{
	std::mt19937 rng(4);
	const MatrixXd X = random_matrix(rng, 4, 10);
	const auto m = fit_lda(X, {0, 1, 2, 3}, 3);
	EXPECT_EQ(m.pca_stage.output_dims(), 3);
	EXPECT_TRUE(m.combined.allFinite());
	const MatrixXd Y = project_rows(m, X);
	for (Eigen::Index i = 0; i < 4; ++i)
		for (Eigen::Index j = i + 1; j < 4; ++j)
			EXPECT_GT((Y.row(i) - Y.row(j)).norm(), 1e-9);
}

TEST(ModelIo, PcaRoundTripsExactly)
{
	std::mt19937 rng(14);
	const auto m = fit_pca(random_matrix(rng, 10, 7), 3);
	std::stringstream ss;
	save_model(ss, m);
	const auto back = load_pca(ss);
	EXPECT_EQ(back.mean, m.mean);
	EXPECT_EQ(back.components, m.components);
	EXPECT_EQ(back.eigenvalues, m.eigenvalues);
}

TEST(ModelIo, LdaRoundTripsExactly)
{
	std::mt19937 rng(15);
	const Blobs b = make_blobs(rng, 6, 5, 8.0);
	const auto m = fit_lda(b.X, b.labels, 2);
	std::stringstream ss;
	save_model(ss, m);
	const auto back = load_lda(ss);
	EXPECT_EQ(back.fisher_ratios, m.fisher_ratios);
	EXPECT_EQ(back.lda_projection, m.lda_projection);
	EXPECT_LT((project_rows(back, b.X) - project_rows(m, b.X)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ModelIo, RejectsWrongHeader)
{
	std::stringstream ss("# sph-lda v1\n");
	EXPECT_THROW(load_pca(ss), std::runtime_error);
}

} // namespace
} // namespace sph
