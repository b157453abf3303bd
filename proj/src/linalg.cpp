#include "anomet/linalg.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "anomet/errors.hpp"

namespace anomet {

namespace {

void require_same_dim(const Vec& a, const Vec& b, const char* what) {
    if (a.size() != b.size()) {
        throw std::invalid_argument(std::string(what) + ": dimension mismatch (" +
                                    std::to_string(a.size()) + " vs " +
                                    std::to_string(b.size()) + ")");
    }
}

} // namespace

Mat Mat::identity(size_t n) {
    Mat m(n, n);
    for (size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

double dot(const Vec& a, const Vec& b) {
    require_same_dim(a, b, "dot");
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double l2_norm(const Vec& x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

Vec l2_normalize(const Vec& x) {
    double n = l2_norm(x);
    if (n < 1e-12) {
        throw DegenerateInputError("l2_normalize: zero vector has no direction");
    }
    Vec out(x.size());
    for (size_t i = 0; i < x.size(); ++i) out[i] = x[i] / n;
    return out;
}

double cosine_sim(const Vec& a, const Vec& b) {
    require_same_dim(a, b, "cosine_sim");
    double na = l2_norm(a);
    double nb = l2_norm(b);
    if (na < 1e-12 || nb < 1e-12) {
        throw DegenerateInputError("cosine_sim: zero vector has no direction");
    }
    return dot(a, b) / (na * nb);
}

Vec matvec(const Mat& m, const Vec& x) {
    if (m.cols != x.size()) {
        throw std::invalid_argument("matvec: shape mismatch (" + std::to_string(m.rows) +
                                    "x" + std::to_string(m.cols) + " times " +
                                    std::to_string(x.size()) + ")");
    }
    Vec y(m.rows, 0.0);
    for (size_t i = 0; i < m.rows; ++i) {
        double s = 0.0;
        const double* row = m.data.data() + i * m.cols;
        for (size_t j = 0; j < m.cols; ++j) s += row[j] * x[j];
        y[i] = s;
    }
    return y;
}

Vec matvec_t(const Mat& m, const Vec& x) {
    if (m.rows != x.size()) {
        throw std::invalid_argument("matvec_t: shape mismatch (" + std::to_string(m.rows) +
                                    "x" + std::to_string(m.cols) + " transposed times " +
                                    std::to_string(x.size()) + ")");
    }
    Vec y(m.cols, 0.0);
    for (size_t i = 0; i < m.rows; ++i) {
        const double* row = m.data.data() + i * m.cols;
        for (size_t j = 0; j < m.cols; ++j) y[j] += row[j] * x[i];
    }
    return y;
}

Mat matmul(const Mat& a, const Mat& b) {
    if (a.cols != b.rows) {
        throw std::invalid_argument("matmul: shape mismatch (" + std::to_string(a.rows) +
                                    "x" + std::to_string(a.cols) + " times " +
                                    std::to_string(b.rows) + "x" + std::to_string(b.cols) + ")");
    }
    Mat c(a.rows, b.cols);
    for (size_t i = 0; i < a.rows; ++i) {
        for (size_t k = 0; k < a.cols; ++k) {
            double aik = a(i, k);
            if (aik == 0.0) continue;
            const double* brow = b.data.data() + k * b.cols;
            double* crow = c.data.data() + i * c.cols;
            for (size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

Mat outer(const Vec& a, const Vec& b) {
    Mat m(a.size(), b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        for (size_t j = 0; j < b.size(); ++j) m(i, j) = a[i] * b[j];
    }
    return m;
}

void add_scaled(Vec& y, double alpha, const Vec& x) {
    require_same_dim(y, x, "add_scaled");
    for (size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
}

void add_outer(Mat& m, double alpha, const Vec& a, const Vec& b) {
    if (m.rows != a.size() || m.cols != b.size()) {
        throw std::invalid_argument("add_outer: shape mismatch");
    }
    for (size_t i = 0; i < a.size(); ++i) {
        double ai = alpha * a[i];
        double* row = m.data.data() + i * m.cols;
        for (size_t j = 0; j < b.size(); ++j) row[j] += ai * b[j];
    }
}

bool all_finite(const Vec& x) {
    for (double v : x) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

bool all_finite(const Mat& m) {
    return all_finite(m.data);
}

} // namespace anomet
