#pragma once

#include <initializer_list>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "koopcert/rational.hpp"

namespace koopcert {

struct DimensionMismatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct SingularMatrix : std::domain_error {
    SingularMatrix() : std::domain_error("matrix is singular") {}
};
struct NotFullRowRank : std::domain_error {
    NotFullRowRank() : std::domain_error("matrix does not have full row rank") {}
};

// Dense matrix over exact rationals. All algorithms below use rational
// Gauss-Jordan elimination with a fixed pivot rule (first nonzero entry in
// column order, lowest row index first), so identical inputs always produce
// identical outputs. Zero-sized dimensions are legal and arise naturally in
// the degenerate CAP blocks (n1 = 0 or n2 = 0).
class RationalMatrix {
public:
    RationalMatrix() : rows_(0), cols_(0) {}
    RationalMatrix(size_t rows, size_t cols)
        : rows_(rows), cols_(cols), a_(rows * cols) {}

    RationalMatrix(std::initializer_list<std::initializer_list<Rational>> init) {
        rows_ = init.size();
        cols_ = rows_ == 0 ? 0 : init.begin()->size();
        a_.reserve(rows_ * cols_);
        for (const auto& row : init) {
            if (row.size() != cols_)
                throw DimensionMismatch("ragged initializer for RationalMatrix");
            for (const auto& v : row) a_.push_back(v);
        }
    }

    static RationalMatrix identity(size_t n) {
        RationalMatrix m(n, n);
        for (size_t i = 0; i < n; ++i) m.at(i, i) = 1;
        return m;
    }
    static RationalMatrix zeros(size_t rows, size_t cols) { return RationalMatrix(rows, cols); }

    size_t rows() const { return rows_; }
    size_t cols() const { return cols_; }

    Rational& at(size_t r, size_t c) {
        check_index(r, c);
        return a_[r * cols_ + c];
    }
    const Rational& at(size_t r, size_t c) const {
        check_index(r, c);
        return a_[r * cols_ + c];
    }

    bool operator==(const RationalMatrix& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_ && a_ == o.a_;
    }
    bool operator!=(const RationalMatrix& o) const { return !(*this == o); }

    bool is_zero() const {
        for (const auto& v : a_)
            if (v != 0) return false;
        return true;
    }

    RationalMatrix transpose() const {
        RationalMatrix t(cols_, rows_);
        for (size_t r = 0; r < rows_; ++r)
            for (size_t c = 0; c < cols_; ++c) t.at(c, r) = at(r, c);
        return t;
    }

    RationalMatrix operator+(const RationalMatrix& o) const {
        require_same_shape(o, "operator+");
        RationalMatrix s(rows_, cols_);
        for (size_t i = 0; i < a_.size(); ++i) s.a_[i] = a_[i] + o.a_[i];
        return s;
    }
    RationalMatrix operator-(const RationalMatrix& o) const {
        require_same_shape(o, "operator-");
        RationalMatrix s(rows_, cols_);
        for (size_t i = 0; i < a_.size(); ++i) s.a_[i] = a_[i] - o.a_[i];
        return s;
    }
    RationalMatrix operator*(const RationalMatrix& o) const {
        if (cols_ != o.rows_)
            throw DimensionMismatch("matmul: " + shape_string() + " * " + o.shape_string());
        RationalMatrix p(rows_, o.cols_);
        for (size_t r = 0; r < rows_; ++r)
            for (size_t k = 0; k < cols_; ++k) {
                const Rational& v = at(r, k);
                if (v == 0) continue;
                for (size_t c = 0; c < o.cols_; ++c) p.at(r, c) += v * o.at(k, c);
            }
        return p;
    }
    RationalMatrix operator*(const Rational& s) const {
        RationalMatrix p(rows_, cols_);
        for (size_t i = 0; i < a_.size(); ++i) p.a_[i] = a_[i] * s;
        return p;
    }

    RationalMatrix block(size_t row0, size_t col0, size_t nrows, size_t ncols) const {
        if (row0 + nrows > rows_ || col0 + ncols > cols_)
            throw DimensionMismatch("block out of range");
        RationalMatrix b(nrows, ncols);
        for (size_t r = 0; r < nrows; ++r)
            for (size_t c = 0; c < ncols; ++c) b.at(r, c) = at(row0 + r, col0 + c);
        return b;
    }

    void swap_rows(size_t i, size_t j) {
        if (i == j) return;
        for (size_t c = 0; c < cols_; ++c) std::swap(at(i, c), at(j, c));
    }
    void scale_row(size_t i, const Rational& s) {
        for (size_t c = 0; c < cols_; ++c) at(i, c) *= s;
    }
    // row i += s * row j
    void add_scaled_row(size_t i, size_t j, const Rational& s) {
        if (s == 0) return;
        for (size_t c = 0; c < cols_; ++c) at(i, c) += s * at(j, c);
    }

    std::string shape_string() const {
        return std::to_string(rows_) + "x" + std::to_string(cols_);
    }

private:
    void check_index(size_t r, size_t c) const {
        if (r >= rows_ || c >= cols_)
            throw DimensionMismatch("index (" + std::to_string(r) + "," + std::to_string(c) +
                                    ") out of range for " + shape_string());
    }
    void require_same_shape(const RationalMatrix& o, const char* op) const {
        if (rows_ != o.rows_ || cols_ != o.cols_)
            throw DimensionMismatch(std::string(op) + ": " + shape_string() + " vs " +
                                    o.shape_string());
    }

    size_t rows_, cols_;
    std::vector<Rational> a_;
};

// Reduced row echelon form of m, together with the invertible transform
// accumulated from the same row operations (transform * m == rref).
struct RrefResult {
    RationalMatrix rref;
    RationalMatrix transform;
    std::vector<size_t> pivot_cols;
};

inline RrefResult rref_with_transform(RationalMatrix m) {
    RationalMatrix t = RationalMatrix::identity(m.rows());
    std::vector<size_t> pivots;
    size_t pivot_row = 0;
    for (size_t col = 0; col < m.cols() && pivot_row < m.rows(); ++col) {
        size_t sel = m.rows();
        for (size_t r = pivot_row; r < m.rows(); ++r) {
            if (m.at(r, col) != 0) {
                sel = r;
                break;
            }
        }
        if (sel == m.rows()) continue;
        m.swap_rows(pivot_row, sel);
        t.swap_rows(pivot_row, sel);
        Rational inv = Rational(1) / m.at(pivot_row, col);
        m.scale_row(pivot_row, inv);
        t.scale_row(pivot_row, inv);
        for (size_t r = 0; r < m.rows(); ++r) {
            if (r == pivot_row) continue;
            Rational factor = -m.at(r, col);
            m.add_scaled_row(r, pivot_row, factor);
            t.add_scaled_row(r, pivot_row, factor);
        }
        pivots.push_back(col);
        ++pivot_row;
    }
    return {std::move(m), std::move(t), std::move(pivots)};
}

inline size_t rank(const RationalMatrix& m) {
    return rref_with_transform(m).pivot_cols.size();
}

inline RationalMatrix inverse(const RationalMatrix& m) {
    if (m.rows() != m.cols()) throw DimensionMismatch("inverse: matrix not square");
    RrefResult r = rref_with_transform(m);
    if (r.pivot_cols.size() != m.rows()) throw SingularMatrix();
    return r.transform;
}

// Right inverse X with m * X == I, for full-row-rank m. Free variables are
// set to zero, which makes the result canonical: X[p_i, :] = E[i, :] for
// pivot columns p_i of the RREF and zero elsewhere.
inline RationalMatrix right_inverse(const RationalMatrix& m) {
    RrefResult r = rref_with_transform(m);
    if (r.pivot_cols.size() != m.rows()) throw NotFullRowRank();
    RationalMatrix x(m.cols(), m.rows());
    for (size_t i = 0; i < r.pivot_cols.size(); ++i)
        for (size_t c = 0; c < m.rows(); ++c) x.at(r.pivot_cols[i], c) = r.transform.at(i, c);
    return x;
}

// Row compression of a nonzero, row-rank-deficient matrix:
// t_bar * b == [d_bar; 0] with d_bar of full row rank r. The transform comes
// from Gauss-Jordan elimination, so it is rational and deterministic.
struct RowCompression {
    RationalMatrix t_bar;
    RationalMatrix d_bar;
    size_t rank = 0;
};

struct ZeroMatrixError : std::domain_error {
    ZeroMatrixError() : std::domain_error("row_compress: matrix is zero") {}
};
struct FullRowRankError : std::domain_error {
    FullRowRankError() : std::domain_error("row_compress: matrix already has full row rank") {}
};

inline RowCompression row_compress(const RationalMatrix& b) {
    RrefResult r = rref_with_transform(b);
    size_t rk = r.pivot_cols.size();
    if (rk == 0) throw ZeroMatrixError();
    if (rk == b.rows()) throw FullRowRankError();
    return {r.transform, r.rref.block(0, 0, rk, b.cols()), rk};
}

// Exact solution of A * X = B with free variables set to zero.
// Returns nullopt when the system is inconsistent.
inline std::optional<RationalMatrix> solve_exact(const RationalMatrix& a,
                                                 const RationalMatrix& b) {
    if (a.rows() != b.rows())
        throw DimensionMismatch("solve_exact: " + a.shape_string() + " vs " + b.shape_string());
    RrefResult r = rref_with_transform(a);
    RationalMatrix rhs = r.transform * b;
    size_t npiv = r.pivot_cols.size();
    for (size_t row = npiv; row < a.rows(); ++row)
        for (size_t c = 0; c < b.cols(); ++c)
            if (rhs.at(row, c) != 0) return std::nullopt;
    RationalMatrix x(a.cols(), b.cols());
    for (size_t i = 0; i < npiv; ++i) {
        size_t pc = r.pivot_cols[i];
        // non-pivot columns of the RREF multiply free variables, all zero
        for (size_t c = 0; c < b.cols(); ++c) x.at(pc, c) = rhs.at(i, c);
    }
    return x;
}

// Stacks a grid of blocks into one matrix. Within each block-row all blocks
// must share the row count, and the column counts of each block-column must
// agree across block-rows.
inline RationalMatrix block_assemble(
    const std::vector<std::vector<RationalMatrix>>& parts) {
    if (parts.empty()) return RationalMatrix();
    size_t total_rows = 0, total_cols = 0;
    bool cols_known = false;
    for (const auto& brow : parts) {
        if (brow.empty()) throw DimensionMismatch("block_assemble: empty block row");
        size_t h = brow[0].rows(), w = 0;
        for (const auto& blk : brow) {
            if (blk.rows() != h) throw DimensionMismatch("block_assemble: inconsistent row sizes");
            w += blk.cols();
        }
        if (!cols_known) {
            total_cols = w;
            cols_known = true;
        } else if (w != total_cols) {
            throw DimensionMismatch("block_assemble: inconsistent column sizes");
        }
        total_rows += h;
    }
    RationalMatrix out(total_rows, total_cols);
    size_t r0 = 0;
    for (const auto& brow : parts) {
        size_t c0 = 0;
        size_t h = brow[0].rows();
        for (const auto& blk : brow) {
            for (size_t r = 0; r < blk.rows(); ++r)
                for (size_t c = 0; c < blk.cols(); ++c) out.at(r0 + r, c0 + c) = blk.at(r, c);
            c0 += blk.cols();
        }
        r0 += h;
    }
    return out;
}

inline RationalMatrix blockdiag(const RationalMatrix& a, const RationalMatrix& b) {
    return block_assemble({{a, RationalMatrix::zeros(a.rows(), b.cols())},
                           {RationalMatrix::zeros(b.rows(), a.cols()), b}});
}

}  // namespace koopcert
