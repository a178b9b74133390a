#include "cmi/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cmi {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw DimensionError("Matrix: data length does not match rows*cols");
    }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) throw DimensionError("Matrix: ragged initializer");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::column(std::span<const double> values) {
    return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

Matrix Matrix::row(std::span<const double> values) {
    return Matrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Matrix::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Matrix Matrix::transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
}

std::string Matrix::shape_string() const {
    std::ostringstream os;
    os << rows_ << "x" << cols_;
    return os.str();
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(what) + ": shape mismatch " + a.shape_string() + " vs " +
                             b.shape_string());
    }
}

Matrix gather_rows(const Matrix& src, std::span<const std::size_t> indices) {
    Matrix out(indices.size(), src.cols());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= src.rows()) throw DimensionError("gather_rows: index out of range");
        auto from = src.row_span(indices[i]);
        std::copy(from.begin(), from.end(), out.row_span(i).begin());
    }
    return out;
}

Matrix hconcat(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) throw DimensionError("hconcat: row counts differ");
    Matrix out(a.rows(), a.cols() + b.cols());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        auto dst = out.row_span(r);
        auto ra = a.row_span(r);
        auto rb = b.row_span(r);
        std::copy(ra.begin(), ra.end(), dst.begin());
        std::copy(rb.begin(), rb.end(), dst.begin() + static_cast<std::ptrdiff_t>(a.cols()));
    }
    return out;
}

Matrix cosine_similarity(const Matrix& a, const Matrix& b, double tau) {
    if (a.cols() != b.cols()) throw DimensionError("cosine_similarity: width mismatch");
    if (!(tau > 0.0)) throw DomainError("cosine_similarity: tau must be positive");
    auto norms = [](const Matrix& m) {
        std::vector<double> n(m.rows());
        for (std::size_t r = 0; r < m.rows(); ++r) {
            double s = 0.0;
            for (double v : m.row_span(r)) s += v * v;
            n[r] = std::sqrt(s);
            if (n[r] == 0.0) throw DomainError("cosine_similarity: zero-norm row");
        }
        return n;
    };
    const auto na = norms(a);
    const auto nb = norms(b);
    Matrix s(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < b.rows(); ++j) {
            double dot = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) dot += a(i, k) * b(j, k);
            s(i, j) = std::clamp(dot / (na[i] * nb[j]), -1.0, 1.0) / tau;
        }
    }
    return s;
}

}  // namespace cmi
