#include "absd/core.hpp"

#include <algorithm>

namespace absd {

Vec3 solve3(const Mat3& A, const Vec3& b) {
    double m[3][4] = {{A(0, 0), A(0, 1), A(0, 2), b.x},
                      {A(1, 0), A(1, 1), A(1, 2), b.y},
                      {A(2, 0), A(2, 1), A(2, 2), b.z}};
    // relative pivot floor: rank-deficient inputs reduce to pivots at the
    // roundoff level of the matrix scale, not to exact zeros
    const double floor = 1e-12 * std::max(A.max_abs(), 1e-300);
    for (int col = 0; col < 3; ++col) {
        int piv = col;
        for (int r = col + 1; r < 3; ++r)
            if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
        if (std::abs(m[piv][col]) < floor) throw std::runtime_error("solve3: singular matrix");
        if (piv != col)
            for (int c = col; c < 4; ++c) std::swap(m[piv][c], m[col][c]);
        for (int r = col + 1; r < 3; ++r) {
            double f = m[r][col] / m[col][col];
            for (int c = col; c < 4; ++c) m[r][c] -= f * m[col][c];
        }
    }
    Vec3 x;
    for (int r = 2; r >= 0; --r) {
        double s = m[r][3];
        for (int c = r + 1; c < 3; ++c) s -= m[r][c] * x[c];
        x[r] = s / m[r][r];
    }
    return x;
}

bool cholesky3(const Mat3& A, Mat3& L) {
    L = Mat3::zero();
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = A(i, j);
            for (int k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
            if (i == j) {
                if (s <= 0.0) return false;
                L(i, i) = std::sqrt(s);
            } else {
                L(i, j) = s / L(j, j);
            }
        }
    }
    return true;
}

void sym_eig3(const Mat3& A, std::array<double, 3>& eval, Mat3& V) {
    // cyclic Jacobi; a handful of sweeps reaches machine precision for 3x3
    Mat3 M = A;
    V = Mat3::identity();
    for (int sweep = 0; sweep < 32; ++sweep) {
        double off = std::abs(M(0, 1)) + std::abs(M(0, 2)) + std::abs(M(1, 2));
        if (off == 0.0) break;
        for (int p = 0; p < 2; ++p) {
            for (int q = p + 1; q < 3; ++q) {
                double apq = M(p, q);
                if (apq == 0.0) continue;
                double app = M(p, p), aqq = M(q, q);
                double tau = (aqq - app) / (2.0 * apq);
                double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                double c = 1.0 / std::sqrt(1.0 + t * t);
                double s = t * c;
                for (int k = 0; k < 3; ++k) {
                    double mkp = M(k, p), mkq = M(k, q);
                    M(k, p) = c * mkp - s * mkq;
                    M(k, q) = s * mkp + c * mkq;
                }
                for (int k = 0; k < 3; ++k) {
                    double mpk = M(p, k), mqk = M(q, k);
                    M(p, k) = c * mpk - s * mqk;
                    M(q, k) = s * mpk + c * mqk;
                }
                for (int k = 0; k < 3; ++k) {
                    double vkp = V(k, p), vkq = V(k, q);
                    V(k, p) = c * vkp - s * vkq;
                    V(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    std::array<int, 3> ord = {0, 1, 2};
    std::sort(ord.begin(), ord.end(), [&](int i, int j) { return M(i, i) < M(j, j); });
    Mat3 Vs;
    for (int k = 0; k < 3; ++k) {
        eval[k] = M(ord[k], ord[k]);
        for (int r = 0; r < 3; ++r) Vs(r, k) = V(r, ord[k]);
    }
    V = Vs;
}

double sym_min_eig3(const Mat3& A) {
    std::array<double, 3> ev;
    Mat3 V;
    sym_eig3(A, ev, V);
    return ev[0];
}

Mat3 sym_sqrt3(const Mat3& A) {
    std::array<double, 3> ev;
    Mat3 V;
    sym_eig3(A, ev, V);
    Mat3 R = Mat3::zero();
    for (int k = 0; k < 3; ++k) {
        double s = std::sqrt(std::max(0.0, ev[k]));
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) R(i, j) += s * V(i, k) * V(j, k);
    }
    return R;
}

double gen_min_eig3(const Mat3& A, const Mat3& B) {
    Mat3 L;
    if (!cholesky3(B, L)) throw std::runtime_error("gen_min_eig3: B not positive definite");
    // W = L^-1 A L^-T by two triangular solves
    Mat3 Y;  // solve L Y = A
    for (int c = 0; c < 3; ++c) {
        for (int r = 0; r < 3; ++r) {
            double s = A(r, c);
            for (int k = 0; k < r; ++k) s -= L(r, k) * Y(k, c);
            Y(r, c) = s / L(r, r);
        }
    }
    Mat3 W;  // solve W L^T = Y  ->  L W^T = Y^T
    for (int c = 0; c < 3; ++c) {
        for (int r = 0; r < 3; ++r) {
            double s = Y(c, r);
            for (int k = 0; k < r; ++k) s -= L(r, k) * W(c, k);
            W(c, r) = s / L(r, r);
        }
    }
    // enforce exact symmetry before Jacobi (roundoff in the solves)
    Mat3 S;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) S(i, j) = 0.5 * (W(i, j) + W(j, i));
    return sym_min_eig3(S);
}

double tree_sum(std::span<const double> v) {
    const std::size_t n = v.size();
    if (n == 0) return 0.0;
    if (n <= 8) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t half = n / 2;
    return tree_sum(v.first(half)) + tree_sum(v.subspan(half));
}

}  // namespace absd
