#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "bhd/errors.hpp"

namespace bhd {

using cplx = std::complex<double>;
using StateVector = Eigen::VectorXcd;
using DenseMatrix = Eigen::MatrixXcd;

// Two coupled cavities, each truncated to n_max_per_site photons.
// Basis index i = n1 * levels + n2 (n2 fastest); this ordering is part of
// the on-disk format and must not change.
struct BasisSpec {
    int n_max_per_site = 19;

    int levels() const { return n_max_per_site + 1; }
    int dim() const { return levels() * levels(); }
    int index(int n1, int n2) const { return n1 * levels() + n2; }
    int occupation1(int i) const { return i / levels(); }
    int occupation2(int i) const { return i % levels(); }
};

// Physical constants in units of the decay rate gamma.
struct SystemParams {
    double delta = -1.65; // cavity-minus-laser detuning
    double u = 0.3;       // on-site Kerr interaction
    double j = 0.05;      // inter-cavity hopping (may be negative)
    double gamma = 1.0;   // photon loss rate; the unit of energy
    double omega = 1.0;   // overall drive scale

    void validate() const {
        if (!(gamma > 0.0)) throw ArgumentError("SystemParams: gamma must be positive");
        if (!std::isfinite(delta) || !std::isfinite(u) || !std::isfinite(j) ||
            !std::isfinite(omega))
            throw ArgumentError("SystemParams: parameters must be finite");
    }
};

struct SparseEntry {
    int row;
    int col;
    cplx value;
};

// Coordinate-format sparse matrix; entries are kept unique by construction.
struct SparseOperator {
    int dim = 0;
    std::vector<SparseEntry> entries;

    void add(int row, int col, cplx value) { entries.push_back({row, col, value}); }

    StateVector apply(const StateVector& v) const {
        StateVector out = StateVector::Zero(dim);
        for (const auto& e : entries) out[e.row] += e.value * v[e.col];
        return out;
    }

    DenseMatrix to_dense() const {
        DenseMatrix m = DenseMatrix::Zero(dim, dim);
        for (const auto& e : entries) m(e.row, e.col) += e.value;
        return m;
    }

    SparseOperator adjoint() const {
        SparseOperator out;
        out.dim = dim;
        out.entries.reserve(entries.size());
        for (const auto& e : entries) out.add(e.col, e.row, std::conj(e.value));
        return out;
    }
};

// a_site on the truncated two-mode basis: <n-1|a|n> = sqrt(n) on the chosen
// site, identity on the other.
inline SparseOperator build_annihilation(const BasisSpec& basis, int site) {
    if (site != 1 && site != 2) throw ArgumentError("build_annihilation: site must be 1 or 2");
    const int levels = basis.levels();
    SparseOperator op;
    op.dim = basis.dim();
    for (int n1 = 0; n1 < levels; ++n1) {
        for (int n2 = 0; n2 < levels; ++n2) {
            if (site == 1 && n1 > 0)
                op.add(basis.index(n1 - 1, n2), basis.index(n1, n2), std::sqrt(double(n1)));
            if (site == 2 && n2 > 0)
                op.add(basis.index(n1, n2 - 1), basis.index(n1, n2), std::sqrt(double(n2)));
        }
    }
    return op;
}

// a_site^dagger a_site (diagonal).
inline SparseOperator build_number(const BasisSpec& basis, int site) {
    if (site != 1 && site != 2) throw ArgumentError("build_number: site must be 1 or 2");
    SparseOperator op;
    op.dim = basis.dim();
    for (int i = 0; i < basis.dim(); ++i) {
        const int n = (site == 1) ? basis.occupation1(i) : basis.occupation2(i);
        if (n != 0) op.add(i, i, double(n));
    }
    return op;
}

// Drive-independent part: sum_j [ delta*n_j + (u/2)*n_j(n_j-1) ] - j*(a1^+ a2 + a2^+ a1).
inline SparseOperator build_hamiltonian_static(const SystemParams& params, const BasisSpec& basis) {
    params.validate();
    const int levels = basis.levels();
    SparseOperator op;
    op.dim = basis.dim();
    for (int n1 = 0; n1 < levels; ++n1) {
        for (int n2 = 0; n2 < levels; ++n2) {
            const int i = basis.index(n1, n2);
            const double diag = params.delta * (n1 + n2) +
                                0.5 * params.u * (double(n1) * (n1 - 1) + double(n2) * (n2 - 1));
            if (diag != 0.0) op.add(i, i, diag);
            // a1^+ a2: (n1-1, n2+1) -> (n1, n2)
            if (n1 > 0 && n2 < levels - 1)
                op.add(i, basis.index(n1 - 1, n2 + 1),
                       -params.j * std::sqrt(double(n1) * (n2 + 1)));
            // a2^+ a1: (n1+1, n2-1) -> (n1, n2)
            if (n2 > 0 && n1 < levels - 1)
                op.add(i, basis.index(n1 + 1, n2 - 1),
                       -params.j * std::sqrt(double(n2) * (n1 + 1)));
        }
    }
    return op;
}

// Unit-amplitude symmetric drive sum_j (a_j + a_j^dagger); the Hamiltonian
// carries this scaled by omega * f, with f supplied per step by the
// feedback controller.
inline SparseOperator build_drive(const BasisSpec& basis) {
    const int levels = basis.levels();
    SparseOperator op;
    op.dim = basis.dim();
    for (int n1 = 0; n1 < levels; ++n1) {
        for (int n2 = 0; n2 < levels; ++n2) {
            const int i = basis.index(n1, n2);
            if (n1 > 0) op.add(i, basis.index(n1 - 1, n2), std::sqrt(double(n1)));          // a1^+
            if (n1 < levels - 1) op.add(i, basis.index(n1 + 1, n2), std::sqrt(double(n1 + 1))); // a1
            if (n2 > 0) op.add(i, basis.index(n1, n2 - 1), std::sqrt(double(n2)));          // a2^+
            if (n2 < levels - 1) op.add(i, basis.index(n1, n2 + 1), std::sqrt(double(n2 + 1))); // a2
        }
    }
    return op;
}

inline SparseOperator build_hamiltonian(const SystemParams& params, const BasisSpec& basis,
                                        double f_value) {
    if (!std::isfinite(f_value)) throw ArgumentError("build_hamiltonian: f_value must be finite");
    SparseOperator h = build_hamiltonian_static(params, basis);
    const SparseOperator drive = build_drive(basis);
    const double scale = params.omega * f_value;
    if (scale != 0.0) {
        // Drive offsets (+-1, +-levels) never coincide with the static
        // pattern (0, +-(levels-1)), so appending keeps entries unique.
        for (const auto& e : drive.entries) h.add(e.row, e.col, scale * e.value);
    }
    return h;
}

// <psi| a_site^+ a_site |psi> for a normalized state.
inline double expectation_number(const StateVector& state, const BasisSpec& basis, int site) {
    if (site != 1 && site != 2) throw ArgumentError("expectation_number: site must be 1 or 2");
    if (state.size() != basis.dim())
        throw ArgumentError("expectation_number: state dimension mismatch");
    double norm2 = 0.0;
    double acc = 0.0;
    for (int i = 0; i < state.size(); ++i) {
        const double w = std::norm(state[i]);
        norm2 += w;
        const int n = (site == 1) ? basis.occupation1(i) : basis.occupation2(i);
        acc += w * n;
    }
    if (std::abs(std::sqrt(norm2) - 1.0) > 1e-6)
        throw ContractViolation("expectation_number: state is not normalized");
    return acc;
}

inline StateVector vacuum_state(const BasisSpec& basis) {
    StateVector psi = StateVector::Zero(basis.dim());
    psi[basis.index(0, 0)] = 1.0;
    return psi;
}

inline StateVector fock_state(const BasisSpec& basis, int n1, int n2) {
    if (n1 < 0 || n2 < 0 || n1 > basis.n_max_per_site || n2 > basis.n_max_per_site)
        throw ArgumentError("fock_state: occupation outside basis");
    StateVector psi = StateVector::Zero(basis.dim());
    psi[basis.index(n1, n2)] = 1.0;
    return psi;
}

} // namespace bhd
