#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cmi {

class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Dense row-major matrix of doubles. Vectors are stored as 1 x n or n x 1.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix column(std::span<const double> values);
    static Matrix row(std::span<const double> values);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::span<double> row_span(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row_span(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool same_shape(const Matrix& other) const { return rows_ == other.rows_ && cols_ == other.cols_; }
    void fill(double v);
    bool all_finite() const;
    Matrix transposed() const;
    std::string shape_string() const;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

void require_same_shape(const Matrix& a, const Matrix& b, const char* what);

/// Rows of `src` selected by `indices`, in order.
Matrix gather_rows(const Matrix& src, std::span<const std::size_t> indices);

/// [a | b], requires equal row counts.
Matrix hconcat(const Matrix& a, const Matrix& b);

/// Pairwise cosine similarity scaled by 1/tau. Throws DomainError on a zero-norm row.
Matrix cosine_similarity(const Matrix& a, const Matrix& b, double tau);

}  // namespace cmi
