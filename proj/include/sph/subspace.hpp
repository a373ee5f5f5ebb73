#pragma once

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sph {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/**
 * Principal axes of a sample matrix. Components are stored as orthonormal
 * rows, eigenvalues are those of the sample covariance (divisor n - 1) in
 * descending order.
 */
template <typename Scalar>
struct PcaModel
{
	VectorX<Scalar> mean;
	MatrixX<Scalar> components; ///< d x input_dims
	VectorX<Scalar> eigenvalues;
	bool zero_variance = false; ///< all training samples were identical

	Eigen::Index input_dims() const { return mean.size(); }
	Eigen::Index output_dims() const { return components.rows(); }
	const MatrixX<Scalar>& projection() const { return components; }
};

/// PCA pre-projection followed by a Fisher discriminant projection.
template <typename Scalar>
struct LdaModel
{
	PcaModel<Scalar> pca_stage;
	MatrixX<Scalar> lda_projection; ///< d x pca_stage.output_dims()
	VectorX<Scalar> fisher_ratios;  ///< generalized eigenvalues, descending
	MatrixX<Scalar> combined;       ///< lda_projection * pca_stage.components

	const VectorX<Scalar>& mean() const { return pca_stage.mean; }
	Eigen::Index input_dims() const { return pca_stage.input_dims(); }
	Eigen::Index output_dims() const { return combined.rows(); }
	const MatrixX<Scalar>& projection() const { return combined; }
};

namespace detail {

// Flips each row so its largest-magnitude entry (first on ties) is positive.
template <typename Derived>
void canonical_signs(Eigen::MatrixBase<Derived>& rows)
{
	for (Eigen::Index r = 0; r < rows.rows(); ++r) {
		Eigen::Index arg = 0;
		rows.row(r).cwiseAbs().maxCoeff(&arg);
		if (rows(r, arg) < 0)
			rows.row(r) *= -1;
	}
}

// Extends `rows` (orthonormal) to `count` orthonormal rows using the
// standard basis vectors in index order as candidates.
template <typename Scalar>
void complete_basis(MatrixX<Scalar>& rows, Eigen::Index filled, Eigen::Index count)
{
	const Eigen::Index dims = rows.cols();
	for (Eigen::Index e = 0; e < dims && filled < count; ++e) {
		VectorX<Scalar> v = VectorX<Scalar>::Unit(dims, e);
		for (int pass = 0; pass < 2; ++pass)
			for (Eigen::Index r = 0; r < filled; ++r)
				v -= rows.row(r).dot(v) * rows.row(r).transpose();
		const Scalar n = v.norm();
		if (n > Scalar(0.5)) {
			rows.row(filled++) = (v / n).transpose();
		}
	}
	if (filled < count)
		throw std::logic_error("complete_basis: could not extend basis");
}

inline std::string format_scalar(double v)
{
	char buf[64];
	auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
	(void)ec;
	return std::string(buf, end);
}

} // namespace detail

/**
 * Fits a d-dimensional PCA to the rows of X. Uses the n x n Gram matrix when
 * the sample count is below the input dimension. Axes with numerically zero
 * variance are filled with an orthonormal completion and eigenvalue 0.
 */
template <typename Derived>
PcaModel<typename Derived::Scalar> fit_pca(const Eigen::MatrixBase<Derived>& X, Eigen::Index d)
{
	using Scalar = typename Derived::Scalar;
	const Eigen::Index n = X.rows();
	const Eigen::Index dims = X.cols();
	if (n < 2)
		throw std::invalid_argument("fit_pca: need at least two samples");
	if (d < 1 || d > std::min(n - 1, dims))
		throw std::invalid_argument("fit_pca: target dimension " + std::to_string(d) + " outside [1, " +
		                            std::to_string(std::min(n - 1, dims)) + "]");

	PcaModel<Scalar> model;
	model.mean = X.colwise().mean().transpose();
	const MatrixX<Scalar> centered = X.rowwise() - model.mean.transpose();

	MatrixX<Scalar> axes(d, dims);
	VectorX<Scalar> scatter(d); // eigenvalues of the scatter matrix (unnormalised)
	Eigen::Index found = 0;

	const bool gram = dims > n;
	const MatrixX<Scalar> small = gram ? MatrixX<Scalar>(centered * centered.transpose())
	                                   : MatrixX<Scalar>(centered.transpose() * centered);
	Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> eig(small);
	if (eig.info() != Eigen::Success)
		throw std::runtime_error("fit_pca: eigendecomposition failed");

	const Eigen::Index m = small.rows();
	const Scalar top = std::max(eig.eigenvalues()(m - 1), Scalar(0));
	const Scalar tol = top * static_cast<Scalar>(m) * std::numeric_limits<Scalar>::epsilon() * Scalar(16);
	for (Eigen::Index i = 0; i < d; ++i) {
		const Scalar ev = eig.eigenvalues()(m - 1 - i);
		if (!(ev > tol) || top == Scalar(0))
			break;
		if (gram) {
			// |X_c^T u|^2 = u^T G u = ev
			axes.row(found) = (centered.transpose() * eig.eigenvectors().col(m - 1 - i)).transpose() / std::sqrt(ev);
		} else {
			axes.row(found) = eig.eigenvectors().col(m - 1 - i).transpose();
		}
		scatter(found) = ev;
		++found;
	}
	model.zero_variance = found == 0;
	if (found < d) {
		detail::complete_basis<Scalar>(axes, found, d);
		scatter.tail(d - found).setZero();
	}
	detail::canonical_signs(axes);
	model.components = std::move(axes);
	model.eigenvalues = scatter / static_cast<Scalar>(n - 1);
	return model;
}

/**
 * Fisher LDA with small-sample handling: the data are first reduced by PCA
 * to n - C dimensions (n - 1 when every sample is its own class), then the
 * between/within scatter ratio is maximised. The within-class scatter is
 * regularised by gamma * I with gamma = 1e-6 * trace(Sw) / dim; when Sw
 * vanishes, trace(Sb) stands in for trace(Sw).
 */
template <typename Derived>
LdaModel<typename Derived::Scalar> fit_lda(const Eigen::MatrixBase<Derived>& X, const std::vector<int>& labels,
                                           Eigen::Index d)
{
	using Scalar = typename Derived::Scalar;
	const Eigen::Index n = X.rows();
	if (static_cast<Eigen::Index>(labels.size()) != n)
		throw std::invalid_argument("fit_lda: label count does not match sample count");

	std::map<int, std::vector<Eigen::Index>> members;
	for (Eigen::Index i = 0; i < n; ++i)
		members[labels[static_cast<std::size_t>(i)]].push_back(i);
	const auto classes = static_cast<Eigen::Index>(members.size());
	if (classes < 2)
		throw std::invalid_argument("fit_lda: need at least two classes");
	if (d < 1 || d > classes - 1)
		throw std::invalid_argument("fit_lda: target dimension " + std::to_string(d) + " outside [1, " +
		                            std::to_string(classes - 1) + "]");

	Eigen::Index pre_dims = n - classes;
	if (pre_dims < 1)
		pre_dims = n - 1;
	pre_dims = std::min(pre_dims, X.cols());

	LdaModel<Scalar> model;
	model.pca_stage = fit_pca(X, pre_dims);
	const MatrixX<Scalar> Y = (X.rowwise() - model.pca_stage.mean.transpose()) * model.pca_stage.components.transpose();

	const VectorX<Scalar> grand = Y.colwise().mean().transpose();
	MatrixX<Scalar> sw = MatrixX<Scalar>::Zero(pre_dims, pre_dims);
	MatrixX<Scalar> sb = MatrixX<Scalar>::Zero(pre_dims, pre_dims);
	for (const auto& [label, idx] : members) {
		VectorX<Scalar> mu = VectorX<Scalar>::Zero(pre_dims);
		for (auto i : idx)
			mu += Y.row(i).transpose();
		mu /= static_cast<Scalar>(idx.size());
		for (auto i : idx) {
			const VectorX<Scalar> dev = Y.row(i).transpose() - mu;
			sw.noalias() += dev * dev.transpose();
		}
		const VectorX<Scalar> between = mu - grand;
		sb.noalias() += static_cast<Scalar>(idx.size()) * between * between.transpose();
	}

	Scalar gamma = Scalar(1e-6) * sw.trace() / static_cast<Scalar>(pre_dims);
	if (!(gamma > Scalar(0)))
		gamma = Scalar(1e-6) * sb.trace() / static_cast<Scalar>(pre_dims);
	if (!(gamma > Scalar(0)))
		gamma = Scalar(1e-6);
	sw.diagonal().array() += gamma;

	Eigen::GeneralizedSelfAdjointEigenSolver<MatrixX<Scalar>> geig(sb, sw);
	if (geig.info() != Eigen::Success)
		throw std::runtime_error("fit_lda: generalized eigendecomposition failed");

	MatrixX<Scalar> w(d, pre_dims);
	VectorX<Scalar> ratios(d);
	for (Eigen::Index i = 0; i < d; ++i) {
		w.row(i) = geig.eigenvectors().col(pre_dims - 1 - i).transpose();
		ratios(i) = geig.eigenvalues()(pre_dims - 1 - i);
	}
	MatrixX<Scalar> combined = w * model.pca_stage.components;
	for (Eigen::Index r = 0; r < d; ++r) {
		Eigen::Index arg = 0;
		combined.row(r).cwiseAbs().maxCoeff(&arg);
		if (combined(r, arg) < 0) {
			combined.row(r) *= -1;
			w.row(r) *= -1;
		}
	}
	model.lda_projection = std::move(w);
	model.fisher_ratios = std::move(ratios);
	model.combined = std::move(combined);
	return model;
}

template <typename Model>
concept LinearProjection = requires(const Model& m) {
	m.projection();
	m.input_dims();
};

template <typename Model>
const auto& model_mean(const Model& m)
{
	if constexpr (requires { m.mean(); })
		return m.mean();
	else
		return m.mean;
}

/// (x - mean) mapped through the model's projection.
template <LinearProjection Model, typename Derived>
auto project(const Model& model, const Eigen::MatrixBase<Derived>& x)
{
	using Scalar = typename Derived::Scalar;
	if (x.size() != model.input_dims())
		throw std::invalid_argument("project: expected " + std::to_string(model.input_dims()) + " dims, got " +
		                            std::to_string(x.size()));
	return VectorX<Scalar>(model.projection() * (x.derived().reshaped() - model_mean(model)));
}

/// Row-wise batch form of project().
template <LinearProjection Model, typename Derived>
auto project_rows(const Model& model, const Eigen::MatrixBase<Derived>& X)
{
	using Scalar = typename Derived::Scalar;
	if (X.cols() != model.input_dims())
		throw std::invalid_argument("project_rows: expected " + std::to_string(model.input_dims()) + " columns, got " +
		                            std::to_string(X.cols()));
	return MatrixX<Scalar>((X.rowwise() - model_mean(model).transpose()) * model.projection().transpose());
}

// Model dumps: one line per vector, "<tag>,<v0>,<v1>,...", after a version line.

namespace detail {

template <typename Derived>
void write_row(std::ostream& out, const char* tag, const Eigen::DenseBase<Derived>& v)
{
	out << tag;
	for (Eigen::Index i = 0; i < v.size(); ++i)
		out << ',' << format_scalar(static_cast<double>(v.derived().reshaped()(i)));
	out << '\n';
}

template <typename Scalar>
void write_pca_body(std::ostream& out, const PcaModel<Scalar>& m)
{
	out << "dims," << m.input_dims() << ',' << m.output_dims() << '\n';
	write_row(out, "mean", m.mean);
	write_row(out, "eigenvalues", m.eigenvalues);
	for (Eigen::Index r = 0; r < m.components.rows(); ++r)
		write_row(out, "component", m.components.row(r));
}

struct TaggedRow
{
	std::string tag;
	std::vector<double> values;
};

inline TaggedRow read_row(std::istream& in, const std::string& expected)
{
	std::string line;
	if (!std::getline(in, line))
		throw std::runtime_error("model file: unexpected end, wanted '" + expected + "'");
	std::istringstream ss(line);
	TaggedRow row;
	std::getline(ss, row.tag, ',');
	if (row.tag != expected)
		throw std::runtime_error("model file: expected '" + expected + "', found '" + row.tag + "'");
	std::string cell;
	while (std::getline(ss, cell, ',')) {
		double v = 0.0;
		auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
		if (ec != std::errc() || end != cell.data() + cell.size())
			throw std::runtime_error("model file: bad number '" + cell + "'");
		row.values.push_back(v);
	}
	return row;
}

template <typename Scalar>
VectorX<Scalar> to_vector(const std::vector<double>& v, std::size_t expected)
{
	if (v.size() != expected)
		throw std::runtime_error("model file: wrong vector length");
	VectorX<Scalar> out(static_cast<Eigen::Index>(v.size()));
	for (std::size_t i = 0; i < v.size(); ++i)
		out(static_cast<Eigen::Index>(i)) = static_cast<Scalar>(v[i]);
	return out;
}

template <typename Scalar>
PcaModel<Scalar> read_pca_body(std::istream& in)
{
	const auto dims = read_row(in, "dims").values;
	if (dims.size() != 2)
		throw std::runtime_error("model file: malformed dims row");
	const auto input = static_cast<std::size_t>(dims[0]);
	const auto output = static_cast<std::size_t>(dims[1]);
	PcaModel<Scalar> m;
	m.mean = to_vector<Scalar>(read_row(in, "mean").values, input);
	m.eigenvalues = to_vector<Scalar>(read_row(in, "eigenvalues").values, output);
	m.components.resize(static_cast<Eigen::Index>(output), static_cast<Eigen::Index>(input));
	for (std::size_t r = 0; r < output; ++r)
		m.components.row(static_cast<Eigen::Index>(r)) = to_vector<Scalar>(read_row(in, "component").values, input).transpose();
	m.zero_variance = m.eigenvalues.size() > 0 && m.eigenvalues.maxCoeff() == Scalar(0);
	return m;
}

inline void expect_version(std::istream& in, const std::string& version)
{
	std::string line;
	if (!std::getline(in, line) || line != version)
		throw std::runtime_error("model file: expected header '" + version + "'");
}

} // namespace detail

template <typename Scalar>
void save_model(std::ostream& out, const PcaModel<Scalar>& m)
{
	out << "# sph-pca v1\n";
	detail::write_pca_body(out, m);
}

template <typename Scalar>
void save_model(std::ostream& out, const LdaModel<Scalar>& m)
{
	out << "# sph-lda v1\n";
	detail::write_pca_body(out, m.pca_stage);
	detail::write_row(out, "fisher_ratios", m.fisher_ratios);
	for (Eigen::Index r = 0; r < m.lda_projection.rows(); ++r)
		detail::write_row(out, "lda", m.lda_projection.row(r));
}

template <typename Scalar = double>
PcaModel<Scalar> load_pca(std::istream& in)
{
	detail::expect_version(in, "# sph-pca v1");
	return detail::read_pca_body<Scalar>(in);
}

template <typename Scalar = double>
LdaModel<Scalar> load_lda(std::istream& in)
{
	detail::expect_version(in, "# sph-lda v1");
	LdaModel<Scalar> m;
	m.pca_stage = detail::read_pca_body<Scalar>(in);
	const auto ratios = detail::read_row(in, "fisher_ratios").values;
	m.fisher_ratios = detail::to_vector<Scalar>(ratios, ratios.size());
	const auto pre = static_cast<std::size_t>(m.pca_stage.output_dims());
	m.lda_projection.resize(static_cast<Eigen::Index>(ratios.size()), static_cast<Eigen::Index>(pre));
	for (std::size_t r = 0; r < ratios.size(); ++r)
		m.lda_projection.row(static_cast<Eigen::Index>(r)) = detail::to_vector<Scalar>(detail::read_row(in, "lda").values, pre).transpose();
	m.combined = m.lda_projection * m.pca_stage.components;
	return m;
}

} // namespace sph
