#pragma once

#include <cstddef>
#include <vector>

namespace anomet {

// Fixed-length real vector. Raw encoder outputs and projected embeddings are
// both carried in this form; the dimension is the length.
using Vec = std::vector<double>;

// Dense row-major matrix. Problem sizes stay small (<= 512 x 512), so plain
// contiguous storage is all that is needed.
struct Mat {
    size_t rows = 0;
    size_t cols = 0;
    std::vector<double> data;

    Mat() = default;
    Mat(size_t r, size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& operator()(size_t i, size_t j) { return data[i * cols + j]; }
    double operator()(size_t i, size_t j) const { return data[i * cols + j]; }

    static Mat identity(size_t n);

    bool operator==(const Mat& other) const = default;
};

double dot(const Vec& a, const Vec& b);
double l2_norm(const Vec& x);

// x / ||x||_2. Throws DegenerateInputError when ||x|| < 1e-12: a zero vector
// has no direction.
Vec l2_normalize(const Vec& x);

// <a,b> / (||a|| ||b||). Both vectors must be nonzero and same-dimensional.
double cosine_sim(const Vec& a, const Vec& b);

Vec matvec(const Mat& m, const Vec& x);   // m x
Vec matvec_t(const Mat& m, const Vec& x); // m^T x
Mat matmul(const Mat& a, const Mat& b);
Mat outer(const Vec& a, const Vec& b); // a b^T

void add_scaled(Vec& y, double alpha, const Vec& x);              // y += alpha x
void add_outer(Mat& m, double alpha, const Vec& a, const Vec& b); // m += alpha a b^T

bool all_finite(const Vec& x);
bool all_finite(const Mat& m);

} // namespace anomet
