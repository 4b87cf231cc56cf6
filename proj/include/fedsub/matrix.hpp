#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "fedsub/errors.hpp"

namespace fedsub {

// Dense row-major matrix of doubles.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    double frobenius_norm() const {
        double s = 0.0;
        for (double v : data) s += v * v;
        return std::sqrt(s);
    }
};

inline double euclidean_norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

inline double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
    if (!a.same_shape(b)) throw ShapeError(what);
}

} // namespace fedsub
