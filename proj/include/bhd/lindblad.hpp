#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "bhd/errors.hpp"
#include "bhd/fock.hpp"

namespace bhd {

using DensityMatrix = Eigen::MatrixXcd;

inline Eigen::SparseMatrix<cplx> to_eigen_sparse(const SparseOperator& op) {
    std::vector<Eigen::Triplet<cplx>> trips;
    trips.reserve(op.entries.size());
    for (const auto& e : op.entries) trips.emplace_back(e.row, e.col, e.value);
    Eigen::SparseMatrix<cplx> m(op.dim, op.dim);
    m.setFromTriplets(trips.begin(), trips.end());
    return m;
}

// gamma * sum_j ( a_j rho a_j^+ - (1/2){a_j^+ a_j, rho} ), written out with
// index arithmetic so it stays independent of the trajectory kernels.
inline void add_dissipator(const BasisSpec& basis, const DensityMatrix& rho, double gamma,
                           DensityMatrix& out) {
    const int L = basis.levels();
    const int dim = basis.dim();
    for (int c = 0; c < dim; ++c) {
        const int c1 = c / L, c2 = c % L;
        for (int r = 0; r < dim; ++r) {
            const int r1 = r / L, r2 = r % L;
            cplx gain(0.0, 0.0);
            if (r1 + 1 < L && c1 + 1 < L)
                gain += std::sqrt(double(r1 + 1) * (c1 + 1)) * rho(r + L, c + L);
            if (r2 + 1 < L && c2 + 1 < L)
                gain += std::sqrt(double(r2 + 1) * (c2 + 1)) * rho(r + 1, c + 1);
            const double loss = 0.5 * double(r1 + r2 + c1 + c2);
            out(r, c) += gamma * (gain - loss * rho(r, c));
        }
    }
}

// Right-hand side of the unconditional master equation:
//   -i[H, rho] + gamma sum_j D[a_j] rho.
inline DensityMatrix lindblad_rhs(const DensityMatrix& rho, const SparseOperator& hamiltonian,
                                  double gamma, const BasisSpec& basis) {
    if (rho.rows() != basis.dim() || rho.cols() != basis.dim())
        throw ArgumentError("lindblad_rhs: dimension mismatch");
    const Eigen::SparseMatrix<cplx> h = to_eigen_sparse(hamiltonian);
    const cplx mi(0.0, -1.0);
    DensityMatrix out = mi * (h * rho - rho * h);
    add_dissipator(basis, rho, gamma, out);
    return out;
}

struct LindbladSeries {
    std::vector<double> times;
    std::vector<double> n1;
    std::vector<double> n2;
    DensityMatrix rho_final;
    double max_trace_drift = 0.0;
    double max_herm_drift = 0.0;
};

inline void populations_of(const DensityMatrix& rho, const BasisSpec& basis, double& n1,
                           double& n2) {
    const int L = basis.levels();
    n1 = 0.0;
    n2 = 0.0;
    for (int i = 0; i < basis.dim(); ++i) {
        const double p = rho(i, i).real();
        n1 += p * (i / L);
        n2 += p * (i % L);
    }
}

// Classic fixed-step RK4 on the master equation with a constant drive.
// State-dependent feedback has no closed unconditional equation, so this
// deliberately only supports open-loop runs; it is the reference that
// trajectory averages are tested against.
inline LindbladSeries lindblad_propagate(const DensityMatrix& rho0, const SystemParams& params,
                                         const BasisSpec& basis, double f_const, double t_final,
                                         double dt, int record_stride = 10) {
    if (!(dt > 0.0) || !(t_final > 0.0))
        throw ArgumentError("lindblad_propagate: need positive dt and t_final");
    const auto steps = static_cast<long long>(std::llround(t_final / dt));
    const SparseOperator h = build_hamiltonian(params, basis, f_const);
    const Eigen::SparseMatrix<cplx> hs = to_eigen_sparse(h);
    const cplx mi(0.0, -1.0);

    const auto rhs = [&](const DensityMatrix& rho) {
        DensityMatrix out = mi * (hs * rho - rho * hs);
        add_dissipator(basis, rho, params.gamma, out);
        return out;
    };

    LindbladSeries series;
    DensityMatrix rho = rho0;
    const auto record = [&](long long k) {
        double n1, n2;
        populations_of(rho, basis, n1, n2);
        series.times.push_back(k * dt);
        series.n1.push_back(n1);
        series.n2.push_back(n2);
        const double trace_drift = std::abs(rho.trace().real() - 1.0) + std::abs(rho.trace().imag());
        series.max_trace_drift = std::max(series.max_trace_drift, trace_drift);
        series.max_herm_drift =
            std::max(series.max_herm_drift, (rho - rho.adjoint()).cwiseAbs().maxCoeff());
        if (trace_drift > 1e-6)
            throw NumericalError("lindblad_propagate: trace drift " + std::to_string(trace_drift) +
                                 " at t=" + std::to_string(k * dt));
    };

    record(0);
    DensityMatrix k1, k2, k3, k4;
    for (long long k = 0; k < steps; ++k) {
        k1 = rhs(rho);
        k2 = rhs(rho + (0.5 * dt) * k1);
        k3 = rhs(rho + (0.5 * dt) * k2);
        k4 = rhs(rho + dt * k3);
        rho += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if ((k + 1) % record_stride == 0 || k + 1 == steps) record(k + 1);
    }
    series.rho_final = rho;
    return series;
}

} // namespace bhd
