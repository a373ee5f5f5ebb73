#pragma once

#include "sph/subspace.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace sph {

/// Training features, one sample per row, with integer labels.
template <typename Scalar>
class Gallery
{
public:
	Gallery(MatrixX<Scalar> vectors, std::vector<int> labels)
	    : vectors_(std::move(vectors)), labels_(std::move(labels))
	{
		if (vectors_.rows() == 0)
			throw std::invalid_argument("Gallery: no samples");
		if (static_cast<Eigen::Index>(labels_.size()) != vectors_.rows())
			throw std::invalid_argument("Gallery: label count does not match sample count");
		for (Eigen::Index i = 0; i < vectors_.rows(); ++i)
			class_members_[labels_[static_cast<std::size_t>(i)]].push_back(i);
	}

	const MatrixX<Scalar>& vectors() const { return vectors_; }
	const std::vector<int>& labels() const { return labels_; }
	Eigen::Index size() const { return vectors_.rows(); }
	Eigen::Index dims() const { return vectors_.cols(); }
	/// Sample indices per class, classes in ascending id order.
	const std::map<int, std::vector<Eigen::Index>>& classes() const { return class_members_; }

private:
	MatrixX<Scalar> vectors_;
	std::vector<int> labels_;
	std::map<int, std::vector<Eigen::Index>> class_members_;
};

template <typename Scalar>
struct Prediction
{
	int label = -1;
	Scalar score = 0; ///< NNC: Euclidean distance; CRC: regularized residual
	std::map<int, Scalar> class_scores;
};

namespace detail {

template <typename Scalar, typename Derived>
void check_query(const Gallery<Scalar>& g, const Eigen::MatrixBase<Derived>& q)
{
	if (q.size() != g.dims())
		throw std::invalid_argument("classify: query has " + std::to_string(q.size()) + " dims, gallery has " +
		                            std::to_string(g.dims()));
}

} // namespace detail

/// Euclidean nearest neighbour; ties go to the lowest sample index.
template <typename Scalar, typename Derived>
Prediction<Scalar> nnc_classify(const Gallery<Scalar>& gallery, const Eigen::MatrixBase<Derived>& query)
{
	detail::check_query(gallery, query);
	const VectorX<Scalar> q = query.derived().reshaped();
	Prediction<Scalar> p;
	Scalar best = std::numeric_limits<Scalar>::infinity();
	for (Eigen::Index i = 0; i < gallery.size(); ++i) {
		const Scalar d2 = (gallery.vectors().row(i).transpose() - q).squaredNorm();
		const int label = gallery.labels()[static_cast<std::size_t>(i)];
		auto [it, fresh] = p.class_scores.try_emplace(label, d2);
		if (!fresh && d2 < it->second)
			it->second = d2;
		if (d2 < best) {
			best = d2;
			p.label = label;
		}
	}
	for (auto& [label, d2] : p.class_scores)
		d2 = std::sqrt(d2);
	p.score = std::sqrt(best);
	return p;
}

/**
 * Collaborative representation classifier. The gallery's samples become
 * L2-normalised dictionary atoms X; a query y is coded by ridge regression
 * a = (X^T X + lambda I)^-1 X^T y and assigned to the class c minimising
 * |y - X_c a_c| / |a_c| (lowest class id on ties).
 */
template <typename Scalar>
class CrcClassifier
{
public:
	CrcClassifier(const Gallery<Scalar>& gallery, Scalar lambda)
	    : gallery_(&gallery), lambda_(lambda)
	{
		if (!(lambda > Scalar(0)))
			throw std::invalid_argument("CrcClassifier: lambda must be positive");
		dictionary_ = gallery.vectors().transpose();
		for (Eigen::Index j = 0; j < dictionary_.cols(); ++j) {
			const Scalar n = dictionary_.col(j).norm();
			if (n > Scalar(0))
				dictionary_.col(j) /= n;
		}
		MatrixX<Scalar> gram = dictionary_.transpose() * dictionary_;
		gram.diagonal().array() += lambda;
		coder_ = Eigen::LLT<MatrixX<Scalar>>(gram).solve(dictionary_.transpose());
	}

	const MatrixX<Scalar>& dictionary() const { return dictionary_; }
	Scalar lambda() const { return lambda_; }

	/// Ridge coding coefficients, one per gallery sample.
	template <typename Derived>
	VectorX<Scalar> code(const Eigen::MatrixBase<Derived>& query) const
	{
		detail::check_query(*gallery_, query);
		return coder_ * query.derived().reshaped();
	}

	template <typename Derived>
	Prediction<Scalar> classify(const Eigen::MatrixBase<Derived>& query) const
	{
		const VectorX<Scalar> y = query.derived().reshaped();
		const VectorX<Scalar> alpha = code(y);
		Prediction<Scalar> p;
		Scalar best = std::numeric_limits<Scalar>::infinity();
		for (const auto& [label, idx] : gallery_->classes()) {
			VectorX<Scalar> recon = VectorX<Scalar>::Zero(y.size());
			Scalar coef2 = 0;
			for (auto i : idx) {
				recon.noalias() += alpha(i) * dictionary_.col(i);
				coef2 += alpha(i) * alpha(i);
			}
			const Scalar residual = (y - recon).norm();
			const Scalar score = coef2 > Scalar(0) ? residual / std::sqrt(coef2) : std::numeric_limits<Scalar>::infinity();
			p.class_scores[label] = score;
			if (score < best) {
				best = score;
				p.label = label;
			}
		}
		// every coefficient vanished: fall back to the lowest class id
		if (p.label < 0)
			p.label = gallery_->classes().begin()->first;
		p.score = p.class_scores[p.label];
		return p;
	}

private:
	const Gallery<Scalar>* gallery_;
	Scalar lambda_;
	MatrixX<Scalar> dictionary_; ///< dims x n, unit columns
	MatrixX<Scalar> coder_;      ///< n x dims
};

template <typename Scalar, typename Derived>
Prediction<Scalar> crc_classify(const Gallery<Scalar>& gallery, const Eigen::MatrixBase<Derived>& query, Scalar lambda)
{
	return CrcClassifier<Scalar>(gallery, lambda).classify(query);
}

/// Fraction of exact label matches.
inline double evaluate(const std::vector<int>& predicted, const std::vector<int>& truth)
{
	if (predicted.size() != truth.size())
		throw std::invalid_argument("evaluate: prediction and truth lengths differ");
	if (truth.empty())
		throw std::invalid_argument("evaluate: no predictions");
	std::size_t hits = 0;
	for (std::size_t i = 0; i < truth.size(); ++i)
		hits += predicted[i] == truth[i];
	return static_cast<double>(hits) / static_cast<double>(truth.size());
}

} // namespace sph
