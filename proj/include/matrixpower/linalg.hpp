#pragma once

// Small dense linear algebra for the moment structures handled by the
// library (dimension rarely above 30).

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace matrixpower {

using Vector = std::vector<double>;

/// Dense row-major matrix.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(std::size_t n);
    static Matrix diagonal(std::span<const double> d);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool is_square() const noexcept { return rows_ == cols_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
    const std::vector<double>& data() const noexcept { return data_; }

    Matrix transpose() const;
    /// Submatrix on the given row and column index lists.
    Matrix select(std::span<const std::size_t> rows, std::span<const std::size_t> cols) const;
    Vector diag() const;
    double trace() const;
    double max_abs() const;
    double frobenius() const;

    Matrix& operator+=(const Matrix& other);
    Matrix& operator-=(const Matrix& other);
    Matrix& operator*=(double s);

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);
Matrix operator*(double s, Matrix a);
Matrix operator*(const Matrix& a, const Matrix& b);
Vector operator*(const Matrix& a, std::span<const double> x);
Matrix outer(std::span<const double> a, std::span<const double> b);
double dot(std::span<const double> a, std::span<const double> b);

/// Symmetric matrix. Entries are stored in full and mirrored on write, so
/// `(i, j)` and `(j, i)` are always bit-identical.
class SymMatrix {
public:
    SymMatrix() = default;
    explicit SymMatrix(std::size_t dim, double fill = 0.0);
    /// Throws InvariantError unless `m` is square and exactly symmetric.
    explicit SymMatrix(Matrix m);
    SymMatrix(std::initializer_list<std::initializer_list<double>> rows);

    /// Averages `m` with its transpose.
    static SymMatrix symmetrized(const Matrix& m);
    static SymMatrix identity(std::size_t n);
    static SymMatrix diagonal(std::span<const double> d);

    std::size_t dim() const noexcept { return m_.rows(); }
    double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }
    void set(std::size_t i, std::size_t j, double v) {
        m_(i, j) = v;
        m_(j, i) = v;
    }
    void add(std::size_t i, std::size_t j, double v) {
        m_(i, j) += v;
        if (i != j) m_(j, i) += v;
    }

    const Matrix& matrix() const noexcept { return m_; }
    SymMatrix select(std::span<const std::size_t> idx) const;
    Vector diag() const { return m_.diag(); }
    double trace() const { return m_.trace(); }

    SymMatrix& operator+=(const SymMatrix& o);
    SymMatrix& operator*=(double s);

    friend bool operator==(const SymMatrix&, const SymMatrix&) = default;

private:
    Matrix m_;
};

SymMatrix operator+(SymMatrix a, const SymMatrix& b);
SymMatrix operator*(SymMatrix a, double s);
SymMatrix operator*(double s, SymMatrix a);
/// A * S * A', symmetrized exactly.
SymMatrix congruence(const Matrix& a, const SymMatrix& s);

/// Lower-triangular Cholesky factor. Throws NotPositiveDefinite when a pivot
/// falls below 1e-12 times the largest diagonal entry.
Matrix chol(const SymMatrix& spd);

/// Solves L L' x = b for a Cholesky factor L.
Vector chol_solve(const Matrix& lower, std::span<const double> b);
Matrix chol_solve(const Matrix& lower, const Matrix& b);

/// log det of the matrix whose Cholesky factor is `lower`.
double chol_logdet(const Matrix& lower);

SymMatrix spd_inverse(const SymMatrix& spd);
Vector spd_solve(const SymMatrix& spd, std::span<const double> b);

struct SymEigen {
    Vector values;   ///< descending
    Matrix vectors;  ///< orthonormal columns, column j pairs with values[j]
};

/// Cyclic Jacobi eigendecomposition (at most 100 sweeps, then NoConvergence).
SymEigen sym_eigen(const SymMatrix& a);

}  // namespace matrixpower
